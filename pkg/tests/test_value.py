import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from storage_ssc import ModelError
from storage_ssc.transform import fundamental
from storage_ssc.value import (Constraint, Region, diagnostics, growth_constant, hjb_check,
                               hjb_row, minorant_Q, minorant_Q_lower_anchor, minorant_row,
                               smooth_fit_probe, u_feynman_kac, value_row, value_W)

LEVELS = (0.0, 0.2, 0.4, 0.45, 0.55, 0.65, 0.69, 0.7, 0.8, 0.95, 1.0)


def test_value_is_stopping_value_in_strip(model, table):
    # W - x Phi = phi(x) Q(F(x)) below c_hat
    for c in (0.2, 0.55):
        for x in (-1.2, -0.3, 0.1, 0.45):
            f = fundamental(model, x)
            V = value_W(model, table, x, c).W - x * model.phi(c)[0]
            assert V == pytest.approx(f.phi_fund * minorant_Q(model, table, f.F, c), abs=1e-13)


def test_x_derivatives_by_differences(model, table):
    h = 1e-5
    xs = np.linspace(-2.9, 2.9, 59)
    for c in LEVELS:
        W, Wx, _, Wxx, _ = value_row(model, table, xs, c)
        Wp = value_row(model, table, xs + h, c)
        Wm = value_row(model, table, xs - h, c)
        # W_xx jumps on the boundaries, so stencils straddling them are skipped
        g = table.point(c).gamma_hat if c < model.c_hat else model.gamma_o
        b = table.point(c).beta_hat if c < model.c_hat else math.inf
        away = (np.abs(xs - g) > 2 * h) & (np.abs(xs - b) > 2 * h)
        np.testing.assert_allclose(((Wp[0] - Wm[0]) / (2 * h))[away], Wx[away], atol=1e-8)
        np.testing.assert_allclose(((Wp[1] - Wm[1]) / (2 * h))[away], Wxx[away], atol=1e-6)


def test_c_derivative_by_differences(model, table):
    h = 1e-6
    xs = np.linspace(-2.9, 2.9, 59)
    for c in (0.1, 0.3, 0.45, 0.55, 0.65, 0.8, 0.95):
        Wc = value_row(model, table, xs, c)[2]
        fd = (value_row(model, table, xs, c + h)[0] - value_row(model, table, xs, c - h)[0]) / (2 * h)
        np.testing.assert_allclose(fd, Wc, atol=1e-6)


def test_continuity_across_c_hat(model, table):
    xs = np.linspace(-3, 3, 61)
    lo = value_row(model, table, xs, model.c_hat - 1e-9)
    hi = value_row(model, table, xs, model.c_hat)
    np.testing.assert_allclose(lo[0], hi[0], atol=1e-8)
    np.testing.assert_allclose(lo[1], hi[1], atol=1e-6)


def test_regions(model, table):
    bp = table.point(0.55)
    assert value_W(model, table, bp.gamma_hat - 0.1, 0.55).region is Region.ACTION_LOWER
    assert value_W(model, table, 0.0, 0.55).region is Region.INACTION
    assert value_W(model, table, bp.beta_hat + 0.1, 0.55).region is Region.ACTION_UPPER
    assert value_W(model, table, 5.0, 0.9).region is Region.INACTION
    assert value_W(model, table, -5.0, 1.0).W == 0.0
    with pytest.raises(ModelError):
        value_W(model, table, 0.0, 1.1)


def test_hjb_grid(model, table):
    xs = np.linspace(-3, 3, 301)
    for c in LEVELS:
        pde, slack, code = hjb_row(model, table, xs, c)
        assert slack.min() >= -1e-10
        assert np.all(np.abs(pde[code == 0]) < 1e-10)
        assert np.all(np.abs(slack[code != 0]) < 1e-12)
        # in the action regions the PDE operator is nonnegative
        assert pde[code != 0].min(initial=1.0) >= -1e-10


def test_hjb_check_labels(model, table):
    r = hjb_check(model, table, 0.0, 0.55)
    assert r.region is Region.INACTION and r.active_constraint is Constraint.PDE
    assert r.hjb == pytest.approx(0.0, abs=1e-12)
    g = table.point(0.55).gamma_hat
    r = hjb_check(model, table, g, 0.55)
    assert r.kink
    r = hjb_check(model, table, -2.5, 0.55)
    assert r.active_constraint is Constraint.GRADIENT


def test_minorant_forms_agree(model, table):
    for c in (0.45, 0.55, 0.69):
        bp = table.point(c)
        for y in np.linspace(bp.y1, bp.y2, 7):
            assert minorant_Q(model, table, y, c) == pytest.approx(
                minorant_Q_lower_anchor(model, table, y, c), abs=1e-12)
    with pytest.raises(ModelError):
        minorant_Q_lower_anchor(model, table, 1.0, 0.2)
    with pytest.raises(ModelError):
        minorant_Q(model, table, 1.0, 0.7)


def test_minorant_row_matches_scalar(model, table):
    ys = np.logspace(-4, 1.5, 40)
    for c in (0.1, 0.55):
        _, Q = minorant_row(model, table, ys, c)
        np.testing.assert_allclose(Q, [minorant_Q(model, table, y, c) for y in ys], atol=1e-14)


def test_smooth_fit(model, table):
    for c in (0.75, 0.85, 0.95):
        p = smooth_fit_probe(model, table, c)
        assert p.upper is None
        assert abs(p.lower_minus + 1) < 1e-5 and abs(p.lower_plus + 1) < 1e-5
    p = smooth_fit_probe(model, table, 0.55)
    assert p.lower_jump > 1e-3 and p.upper_jump > 1e-3
    with pytest.raises(ModelError):
        smooth_fit_probe(model, table, 0.7)
    with pytest.raises(ModelError):
        smooth_fit_probe(model, table, 0.5, h=1.0)


def test_diagnostics_two_routes(model, table):
    for c in (0.1, 0.4, 0.5, 0.65):
        for x in np.linspace(-2.5, 1.0, 15):
            d = diagnostics(model, table, x, c)
            assert d.u_gap == pytest.approx(u_feynman_kac(model, table, x, c), abs=1e-12)
            assert d.u_gap >= -1e-12
    assert diagnostics(model, table, 0.0, 0.2).theta is None
    assert diagnostics(model, table, -0.5, 0.55).theta < 0


def test_growth_bound(model, table):
    K = growth_constant(model)
    xs = np.linspace(-50, 50, 201)
    for c in LEVELS:
        W = value_row(model, table, xs, c)[0]
        assert np.all(np.abs(W) <= K * (1 + np.abs(xs)))


def test_large_negative_x_is_finite(model, table):
    # the single regime has no phi-term, so deep below gamma there is no blow-up
    W = value_row(model, table, np.array([-600.0, -300.0]), 0.2)
    assert np.all(np.isfinite(W[0])) and np.all(np.isfinite(W[2]))


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), st.floats(0.0, 1.0))
def test_hjb_holds_pointwise(x, c):
    from storage_ssc import build_model
    from storage_ssc.boundaries import build_table
    m = build_model(0.5, 0.4)
    t = _TABLES.setdefault("t", build_table(m, []))
    r = hjb_check(m, t, x, c)
    assert r.gradient_slack >= -1e-9
    assert r.pde_residual >= -1e-9
    assert min(abs(r.pde_residual), abs(r.gradient_slack)) <= 1e-9


_TABLES: dict = {}
