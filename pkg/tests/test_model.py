import math

import pytest
from hypothesis import given, strategies as st

from storage_ssc import ModelError, build_custom_model, build_model
from storage_ssc.model import phi_eval, running_terms


def test_canonical_levels(model):
    assert model.c_hat == 0.7
    assert model.c_o == 0.4
    assert model.r_hat == pytest.approx(0.09, abs=1e-15)
    assert model.gamma_o == -1.0
    assert model.sqrt2lam == 1.0


def test_phi_at_one_and_derivatives(model):
    assert model.phi(1.0) == (0.0, -0.4, 2.0)
    # numerical derivative of phi and R
    h = 1e-6
    for c in (0.1, 0.5, 0.9):
        fd = (model.phi(c + h)[0] - model.phi(c - h)[0]) / (2 * h)
        assert fd == pytest.approx(model.phi(c)[1], rel=1e-8)
        fd = (model.R(c + h) - model.R(c - h)) / (2 * h)
        assert fd == pytest.approx(model.dR(c), rel=1e-7)


def test_r_gap_is_exact_square(model):
    for c in (0.0, 0.3, 0.69999, 0.7, 1.0):
        assert model.r_gap(c) == (c - 0.7) ** 2
        assert model.r_gap(c) == pytest.approx(model.r_hat - model.R(c), abs=1e-15)


def test_k_vanishes_at_c_hat(model):
    assert model.k(model.c_hat) == pytest.approx(0.0, abs=1e-15)
    assert model.k(0.2) < 0 < model.k(0.9)


@pytest.mark.parametrize("lam,a", [(0.0, 0.4), (-1.0, 0.4), (math.inf, 0.4), (0.5, 0.0),
                                   (0.5, 1.0), (0.5, -0.2), (math.nan, 0.4)])
def test_rejects_bad_parameters(lam, a):
    with pytest.raises(ModelError):
        build_model(lam, a)


def test_unit_interval_guard(model):
    with pytest.raises(ModelError):
        phi_eval(model, 1.5)
    with pytest.raises(ModelError):
        running_terms(model, -0.1)
    assert running_terms(model, 0.5) == (model.R(0.5), model.k(0.5))


def test_custom_model_matches_quadratic():
    a = 0.4
    m = build_custom_model(0.5, lambda c: a * (1 - c) + (1 - c) ** 2,
                           lambda c: -a - 2 * (1 - c), lambda c: 2.0)
    assert m.c_hat == pytest.approx(0.7, abs=1e-12)
    assert m.c_o == pytest.approx(0.4, abs=1e-12)
    assert m.r_hat == pytest.approx(0.09, abs=1e-12)


def test_custom_model_without_c_o_is_rejected():
    # phi = 0.1 (1 - c)^2: R > 0 on all of (0, 1), so no c_o
    with pytest.raises(ModelError):
        build_custom_model(0.5, lambda c: 0.1 * (1 - c) ** 2, lambda c: -0.2 * (1 - c),
                           lambda c: 0.2)


@given(st.floats(0.01, 5.0), st.floats(0.01, 0.99))
def test_level_ordering(lam, a):
    m = build_model(lam, a)
    assert 0 < m.c_o < m.c_hat < 1
    assert m.R(m.c_o) == pytest.approx(0.0, abs=1e-15)
    assert m.r_hat == pytest.approx(m.R(m.c_hat), abs=1e-15)
    assert m.gamma_o * m.sqrt2lam == pytest.approx(-1.0)
    # R is maximised at c_hat
    for c in (0.0, m.c_o, 0.5 * (m.c_hat + 1)):
        assert m.R(c) <= m.r_hat
