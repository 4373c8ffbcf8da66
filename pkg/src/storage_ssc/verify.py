"""The invariant suite run by ``storage-ssc verify``.

Every check reports the largest violation it saw next to the tolerance it
allows; a check passes when ``max_violation <= tolerance``.  Strict
inequalities (e.g. a jump that must be positive) are phrased as a shortfall
against the threshold with tolerance 0.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import boundaries as bd
from .boundaries import BoundaryTable, build_table
from .model import Model
from .transform import E_M2
from .value import (diagnostics, growth_constant, hjb_row, minorant_Q_lower_anchor,
                    minorant_row, smooth_fit_probe, u_feynman_kac, value_row)

__all__ = ["Check", "run_checks", "report"]


@dataclass(frozen=True)
class Check:
    name: str
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_violation <= self.tolerance)

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"

    def as_dict(self) -> dict:
        d = asdict(self)
        d["status"] = self.status
        return {k: d[k] for k in ("name", "status", "max_violation", "tolerance")}


def _inner(model: Model, n: int, pad: float) -> np.ndarray:
    return np.linspace(model.c_o + pad, model.c_hat - pad, n)


def _single(model: Model, n: int) -> np.ndarray:
    return np.linspace(0.0, model.c_o, n)


def check_critical_levels(model: Model) -> Check:
    v = max(abs(model.R(model.c_o)), abs(model.k(model.c_hat)))
    return Check("critical_levels", v, 1e-12)


def check_running_terms(model: Model, n: int = 10_000) -> Check:
    c = np.linspace(0.0, 1.0, n)
    R = np.array([model.R(v) for v in c])
    k = np.array([model.k(v) for v in c])
    # shortfall below strict concavity / strict increase
    concave = np.max(0.5 * (R[:-2] + R[2:]) - R[1:-1])
    increase = np.max(-np.diff(k))
    return Check("running_terms_shape", max(0.0, concave, increase), 0.0)


def check_roots(model: Model, n: int = 50) -> list:
    pair = max(bd.solve_pair(model, c).residual_norm for c in _inner(model, n, 1e-4))
    single = max(abs(bd.residual_F3(model, bd.solve_single(model, c).y2, c))
                 for c in _single(model, n))
    agree = 0.0
    for c in _inner(model, n, 1e-4):
        a = bd.solve_pair(model, c, polish=False)
        b = bd.solve_pair(model, c)
        agree = max(agree, abs(a.log_y1 - b.log_y1) * a.y1, abs(a.y2 - b.y2))
    return [Check("pair_residuals", pair, 1e-10), Check("single_residual", single, 1e-12),
            Check("bisection_newton_agreement", agree, 1e-9)]


def check_monotone_limits(model: Model, n: int = 256) -> list:
    t = build_table(model, _inner(model, n, 1e-4))
    s = model.sqrt2lam
    mono = max(np.max(-np.diff(t.y1)), np.max(np.diff(t.y2)))
    # strictness: any flat step counts as a violation
    mono = mono if mono > 0 else 0.0
    near = bd.solve_pair(model, model.c_hat - 1e-4)
    limit = abs(near.y1 - E_M2)
    dy1 = bd.boundary_derivatives(model, model.c_hat - 1e-4)[0]
    full = build_table(model, np.linspace(0.0, 1.0, n))
    fin_b = full.beta_hat[np.isfinite(full.beta_hat)] * s
    fin_g = full.gamma_hat[np.isfinite(full.gamma_hat)] * s
    y2 = full.y2[np.isfinite(full.y2)]
    bounds = max(0.0, np.max(y2) - math.exp(2.0), np.max(-fin_b), np.max(fin_b - 1.0),
                 np.max(fin_g + 1.0) if fin_g.size else 0.0)
    return [Check("boundary_monotonicity", mono, 0.0),
            Check("y1_limit_at_c_hat", limit, 1e-3),
            Check("dy1_limit_at_c_hat", max(0.0, abs(dy1)), 1e-3),
            Check("boundary_ranges", bounds, 0.0)]


def derivative_gap_at_c_o(model: Model, delta: float) -> float:
    d_lo = bd.boundary_derivatives(model, model.c_o - delta)[1]
    d_hi = bd.boundary_derivatives(model, model.c_o + delta)[1]
    return abs(d_lo - d_hi)


def check_pasting_c_o(model: Model, delta: float = 1e-6) -> list:
    lo = bd.solve_single(model, model.c_o - delta).y2
    hi = bd.solve_pair(model, model.c_o + delta, margin=0.0).y2
    # the two-sided slope approaches the one-sided one only like delta*log(delta)^2,
    # so continuity is checked as a limit: shrinking gaps, small at the finest delta
    gaps = [derivative_gap_at_c_o(model, d) for d in (1e-6, 1e-7, 1e-8)]
    shrink = max(0.0, max(b - a for a, b in zip(gaps, gaps[1:])))
    return [Check("pasting_y2_at_c_o", abs(lo - hi), 1e-4),
            Check("pasting_dy2_gap_shrinks_at_c_o", shrink, 0.0),
            Check("pasting_dy2_at_c_o_limit", gaps[-1], 1e-2)]


def _fd(f, c, h):
    return (f(c + h) - f(c - h)) / (2.0 * h)


def check_derivatives(model: Model, n: int = 20, h: float = 1e-6) -> Check:
    worst = 0.0
    for c in np.linspace(0.02, model.c_o - 0.02, n):
        a = bd.boundary_derivatives(model, c)[1]
        f = _fd(lambda v: bd.solve_single(model, v).y2, c, h)
        worst = max(worst, abs(a - f) / abs(f))
    for c in _inner(model, n, 0.01):
        a1, a2 = bd.boundary_derivatives(model, c)
        f1 = _fd(lambda v: bd.solve_pair(model, v).y1, c, h)
        f2 = _fd(lambda v: bd.solve_pair(model, v).y2, c, h)
        worst = max(worst, abs(a1 - f1) / abs(f1), abs(a2 - f2) / abs(f2))
    return Check("derivatives_vs_finite_differences", worst, 1e-4)


def _levels(model, table, c):
    if c >= model.c_hat:
        return model.gamma_o, math.inf
    p = table.point(c)
    return p.gamma_hat, p.beta_hat


def check_hjb(model: Model, table: BoundaryTable, n_x: int = 400, n_c: int = 200,
              x_range=(-3.0, 3.0), tube: float = 1e-6) -> list:
    xs = np.linspace(*x_range, n_x)
    pde_in = slack_all = slack_act = pde_act = 0.0
    for c in np.linspace(1e-3, 1.0 - 1e-3, n_c):
        if abs(c - model.c_hat) < tube:
            continue
        g, b = _levels(model, table, c)
        keep = (np.abs(xs - g) > tube) & (np.abs(xs - b) > tube)
        pde, slack, code = hjb_row(model, table, xs[keep], c)
        ins = code == 0
        act = ~ins
        pde_in = max(pde_in, np.max(np.abs(pde[ins]), initial=0.0))
        slack_all = max(slack_all, np.max(-slack, initial=0.0))
        slack_act = max(slack_act, np.max(np.abs(slack[act]), initial=0.0))
        pde_act = max(pde_act, np.max(-pde[act], initial=0.0))
    return [Check("hjb_pde_inaction", pde_in, 1e-8),
            Check("hjb_gradient_slack_nonnegative", slack_all, 1e-8),
            Check("hjb_gradient_action", slack_act, 1e-10),
            Check("hjb_pde_sign_action", pde_act, 1e-8)]


def check_smooth_fit(model: Model, table: BoundaryTable, h: float = 1e-4) -> list:
    fit = 0.0
    for c in (0.75, 0.85, 0.95):
        c = model.c_hat + (c - 0.7) * (1.0 - model.c_hat) / 0.3
        p = smooth_fit_probe(model, table, c, h)
        fit = max(fit, abs(p.lower_minus + 1.0), abs(p.lower_plus + 1.0))
    c = model.c_o + 0.5 * (model.c_hat - model.c_o)
    p = smooth_fit_probe(model, table, c, h)
    breakdown = max(0.0, 1e-3 - min(p.lower_jump, p.upper_jump))
    return [Check("smooth_fit_above_c_hat", fit, 1e-5),
            Check("cross_derivative_jump_below_c_hat", breakdown, 0.0)]


def check_geometry(model: Model, table: BoundaryTable, n: int = 10_000) -> list:
    ys = np.logspace(-6.0, 2.0, n)
    w = (ys[2:] - ys[1:-1]) / (ys[2:] - ys[:-2])
    conv = below = contact = anchors = 0.0
    levels = [f * model.c_o for f in (0.25, 0.75)] + [
        model.c_o + f * (model.c_hat - model.c_o) for f in (0.5, 5.0 / 6.0)]
    for c in levels:
        H, Q = minorant_row(model, table, ys, c)
        conv = max(conv, np.max(Q[1:-1] - (w * Q[:-2] + (1.0 - w) * Q[2:])))
        below = max(below, np.max(Q - np.minimum(H, 0.0)))
        p = table.point(c)
        stop = ys >= p.y2
        if p.y1 is not None:
            stop |= ys <= p.y1
            mid = ys[(ys > p.y1) & (ys < p.y2)][:: max(1, n // 200)]
            _, Qm = minorant_row(model, table, mid, c)
            alt = np.array([minorant_Q_lower_anchor(model, table, y, c) for y in mid])
            anchors = max(anchors, np.max(np.abs(alt - Qm), initial=0.0))
        contact = max(contact, np.max(np.abs(Q[stop] - H[stop]), initial=0.0))
    return [Check("minorant_convex", max(conv, 0.0), 1e-9),
            Check("minorant_below_obstacle_and_zero", max(below, 0.0), 0.0),
            Check("minorant_equals_obstacle_on_stopping_set", contact, 0.0),
            Check("tangent_line_forms_agree", anchors, 1e-10)]


def check_diagnostics(model: Model, table: BoundaryTable) -> list:
    c = model.c_o + 0.5 * (model.c_hat - model.c_o)
    p = table.point(c)
    xs = np.linspace(p.gamma_hat, p.beta_hat, 1002)[1:-1]
    theta = np.array([diagnostics(model, table, x, c).theta for x in xs])
    ends = max(abs(diagnostics(model, table, v, c).theta) for v in (p.gamma_hat, p.beta_hat))
    u_min = 0.0
    routes = 0.0
    for cc in np.linspace(0.0, model.c_hat - 1e-3, 50):
        for x in np.linspace(-3.0, 3.0, 200):
            u = diagnostics(model, table, x, cc).u_gap
            u_min = max(u_min, -u)
            routes = max(routes, abs(u - u_feynman_kac(model, table, x, cc)))
    return [Check("theta_negative_inside", max(0.0, np.max(theta)), 0.0),
            Check("theta_zero_at_boundaries", ends, 1e-9),
            Check("u_gap_nonnegative", u_min, 1e-9),
            Check("u_gap_matches_hitting_time_formula", routes, 1e-9)]


def check_c_hat_pasting(model: Model, table: BoundaryTable, delta: float = 1e-7,
                        h: float = 1e-6) -> Check:
    b = table.point(model.c_hat - delta).beta_hat
    xs = np.linspace(model.gamma_o, b, 52)[1:-1]
    ch = model.c_hat
    lo = value_row(model, table, xs, ch - delta)
    hi = value_row(model, table, xs, ch + delta)
    worst = max(np.max(np.abs(lo[i] - hi[i])) for i in range(3))
    worst = max(worst, np.max(np.abs(lo[2] + xs)))
    W0 = value_row(model, table, xs, ch)[0]
    left = (W0 - value_row(model, table, xs, ch - h)[0]) / h
    right = (value_row(model, table, xs, ch + h)[0] - W0) / h
    worst = max(worst, np.max(np.abs(left - right)))
    return Check("c1_pasting_at_c_hat", float(worst), 1e-5)


def check_growth(model: Model, table: BoundaryTable) -> Check:
    K = growth_constant(model)
    xs = np.linspace(-50.0, 50.0, 2001)
    ratio = max(np.max(np.abs(value_row(model, table, xs, c)[0]) / (1.0 + np.abs(xs)))
                for c in np.linspace(0.0, 1.0, 101))
    return Check("sublinear_growth", max(0.0, ratio - K), 0.0)


def run_checks(model: Model, table: BoundaryTable | None = None) -> list:
    """Run the whole suite; ``table`` defaults to a 256-row grid over [0, 1]."""
    if table is None:
        table = build_table(model, np.linspace(0.0, 1.0, 256))
    checks = [check_critical_levels(model), check_running_terms(model)]
    checks += check_roots(model)
    checks += check_monotone_limits(model)
    checks += check_pasting_c_o(model)
    checks.append(check_derivatives(model))
    checks += check_hjb(model, table)
    checks += check_smooth_fit(model, table)
    checks += check_geometry(model, table)
    checks += check_diagnostics(model, table)
    checks.append(check_c_hat_pasting(model, table))
    checks.append(check_growth(model, table))
    return checks


def report(checks) -> dict:
    failed = [c.name for c in checks if not c.passed]
    return {
        "checks": [c.as_dict() for c in checks],
        "summary": {"total": len(checks), "passed": len(checks) - len(failed),
                    "failed": len(failed), "failed_checks": failed, "all_passed": not failed},
    }
