import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from storage_ssc import ModelError, build_model
from storage_ssc.boundaries import (Regime, boundary_derivatives, build_table, chat_limit_y2,
                                    residual_F3, residuals_F1_F2, solve_pair, solve_single)
from storage_ssc.transform import E_M2, obstacle_H


def test_single_regime_matches_oracle(model, frozen):
    for c, ref in frozen["single"].items():
        p = solve_single(model, float(c))
        assert p.y1 is None
        assert p.y2 == pytest.approx(ref["y2"], rel=1e-12)


def test_pair_matches_oracle(model, table, frozen):
    for c, ref in frozen["pair"].items():
        p = solve_pair(model, float(c))
        assert p.y1 == pytest.approx(ref["y1"], rel=1e-10)
        assert p.y2 == pytest.approx(ref["y2"], rel=1e-12)
        bp = table.point(float(c))
        assert bp.gamma_hat == pytest.approx(ref["gamma_hat"], rel=1e-11)
        assert bp.beta_hat == pytest.approx(ref["beta_hat"], rel=1e-11)


def test_chat_limit_matches_oracle(frozen):
    assert chat_limit_y2() == pytest.approx(frozen["chat_limit_y2"], rel=1e-12)


def test_pair_is_a_common_tangent(model):
    # independent of the residual forms: equal slopes, chord slope equal to both
    for c in (0.45, 0.6):
        p = solve_pair(model, c)
        h1, h2 = obstacle_H(model, p.y1, c), obstacle_H(model, p.y2, c)
        assert h1.H_y == pytest.approx(h2.H_y, rel=1e-10)
        assert (h2.H - h1.H) / (p.y2 - p.y1) == pytest.approx(h1.H_y, rel=1e-10)


def test_residuals_vanish(model):
    for c in np.linspace(0.401, 0.699, 13):
        p = solve_pair(model, c)
        assert max(abs(r) for r in residuals_F1_F2(model, p.y1, p.y2, c)) < 1e-10
    for c in np.linspace(0.0, 0.4, 9):
        assert abs(residual_F3(model, solve_single(model, c).y2, c)) < 1e-12


def test_stage_agreement(model):
    for c in (0.41, 0.5, 0.69):
        a = solve_pair(model, c, polish=False)
        b = solve_pair(model, c, polish=True)
        assert abs(a.y2 - b.y2) < 1e-9
        assert abs(a.log_y1 - b.log_y1) < 1e-9


def test_domain_errors(model):
    with pytest.raises(ModelError):
        solve_single(model, 0.5)
    with pytest.raises(ModelError):
        solve_pair(model, 0.3)
    with pytest.raises(ModelError):
        residual_F3(model, 2.0, 0.6)
    with pytest.raises(ModelError):
        residuals_F1_F2(model, 0.0, 2.0, 0.5)
    with pytest.raises(ModelError):
        boundary_derivatives(model, 0.8)
    with pytest.raises(ModelError):
        build_table(model, [0.5, 0.2])
    with pytest.raises(ModelError):
        build_table(model, [0.0, 1.2])


def test_regimes_and_sentinels(model, table):
    assert table.point(0.2).regime is Regime.SINGLE_UPPER
    assert table.point(0.2).gamma_hat == -math.inf
    assert table.point(0.5).regime is Regime.TWO_SIDED
    bp = table.point(0.9)
    assert bp.regime is Regime.CONSTANT_LOWER
    assert (bp.gamma_hat, bp.beta_hat, bp.y1, bp.y2) == (-1.0, math.inf, None, None)
    assert str(Regime.TWO_SIDED) == "TwoSided"


def test_snapping_at_the_critical_levels(model, table):
    at_co = table.point(model.c_o)
    assert at_co.regime is Regime.SINGLE_UPPER
    near = table.point(model.c_hat - 1e-10)
    assert near.y1 == E_M2 and near.dy1 == 0.0 and near.dy2 == 0.0
    assert near.y2 == chat_limit_y2()
    assert near.gamma_hat == pytest.approx(model.gamma_o, abs=1e-12)


def test_derivatives_against_differences(model):
    h = 1e-6
    for c in (0.1, 0.3, 0.45, 0.55, 0.65):
        d1, d2 = boundary_derivatives(model, c)
        if c < model.c_o:
            fd2 = (solve_single(model, c + h).y2 - solve_single(model, c - h).y2) / (2 * h)
        else:
            lo, hi = solve_pair(model, c - h), solve_pair(model, c + h)
            fd2 = (hi.y2 - lo.y2) / (2 * h)
            assert d1 == pytest.approx((hi.y1 - lo.y1) / (2 * h), rel=1e-5)
        assert d2 == pytest.approx(fd2, rel=1e-5)


def test_table_workers_identical(model):
    grid = np.linspace(0, 1, 17)
    a = build_table(model, grid)
    b = build_table(model, grid, workers=2)
    np.testing.assert_array_equal(a.y2, b.y2)
    np.testing.assert_array_equal(a.gamma_hat, b.gamma_hat)
    assert a.regime == b.regime and len(a) == 17


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.2, 3.0), st.floats(0.05, 0.95))
def test_boundary_order_and_ranges(a, lam, frac):
    m = build_model(lam, a)
    s = m.sqrt2lam
    c = frac * m.c_hat
    t = build_table(m, [])
    bp = t.point(c)
    assert bp.y2 < math.e ** 2
    assert 0.0 < bp.beta_hat * s < 1.0
    assert bp.gamma_hat * s <= -1.0 + 1e-12
    assert bp.gamma_hat < bp.beta_hat


@settings(max_examples=30, deadline=None)
@given(st.floats(0.401, 0.6989), st.floats(1e-4, 1e-3))
def test_monotone_in_c(c, step):
    m = build_model(0.5, 0.4)
    lo, hi = solve_pair(m, c), solve_pair(m, min(c + step, 0.6999))
    assert hi.y1 > lo.y1
    assert hi.y2 < lo.y2
