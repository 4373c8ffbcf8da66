"""One test per acceptance criterion; each records PASS/FAIL for the summary."""
import io
import math
import time
from contextlib import redirect_stdout

import numpy as np
import pytest

from storage_ssc import build_model
from storage_ssc.boundaries import (Regime, boundary_derivatives, build_table, residual_F3,
                                    residuals_F1_F2, solve_pair, solve_single)
from storage_ssc.cli import run
from storage_ssc.simulate import (FULL_FILL_NOW, JUMP_TO_CHAT, NO_ACTION, OPTIMAL,
                                  REFLECT_AT_BETA, McConfig, Policy, laplace_check, mc_compare,
                                  mc_cost)
from storage_ssc.transform import E_M2
from storage_ssc.value import diagnostics, hjb_row, minorant_row, smooth_fit_probe, value_W

from conftest import ACCEPTANCE

E2 = math.e ** 2


def record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_01_critical_levels():
    t0 = time.perf_counter()
    m = build_model(0.5, 0.4)
    ms = (time.perf_counter() - t0) * 1e3
    err = max(abs(m.c_hat - 0.7), abs(m.c_o - 0.4), abs(m.R(m.c_hat) - 0.09),
              abs(m.gamma_o + 1.0))
    record(1, err <= 1e-12 and ms < 1.0, f"max error {err:.2e}, {ms:.3f} ms")


def test_criterion_02_roots(model):
    t0 = time.perf_counter()
    pair_res = single_res = agree = 0.0
    for c in np.linspace(model.c_o + 1e-4, model.c_hat - 1e-4, 52)[1:-1]:
        p = solve_pair(model, c)
        pair_res = max(pair_res, *map(abs, residuals_F1_F2(model, p.y1, p.y2, c)))
        q = solve_pair(model, c, polish=False)
        agree = max(agree, abs(p.y2 - q.y2), abs(p.y1 - q.y1))
    for c in np.linspace(0.0, model.c_o, 50):
        single_res = max(single_res, abs(residual_F3(model, solve_single(model, c).y2, c)))
    secs = time.perf_counter() - t0
    ok = pair_res < 1e-10 and single_res < 1e-12 and agree < 1e-9 and secs < 5
    record(2, ok, f"|F1|,|F2| {pair_res:.1e}, |F3| {single_res:.1e}, "
                  f"stage gap {agree:.1e}, {secs:.2f} s")


def test_criterion_03_monotone_limits(model):
    s = model.sqrt2lam
    t = build_table(model, [])
    cs = np.linspace(0.0, model.c_hat, 258)[1:-1]
    pts = [t.point(c) for c in cs]
    y2 = np.array([p.y2 for p in pts])
    pair = [p for p in pts if p.regime is Regime.TWO_SIDED]
    y1 = np.array([p.y1 for p in pair])
    near = t.point(model.c_hat - 1e-4)
    beta = np.array([p.beta_hat for p in pts]) * s
    gamma = np.array([p.gamma_hat for p in pts]) * s
    ok = (np.all(np.diff(y2) < 0) and np.all(np.diff(y1) > 0)
          and abs(near.y1 - E_M2) < 1e-3 and np.all(y2 < E2)
          and np.all((beta > 0) & (beta < 1)) and np.all(gamma <= -1)
          and near.dy1 < 1e-3)
    record(3, ok, f"|y1(c_hat-1e-4) - e^-2| {abs(near.y1 - E_M2):.1e}, "
                  f"dy1 {near.dy1:.1e}, max y2 {y2.max():.4f}")


def test_criterion_04_pasting_at_c_o(model):
    d = 1e-6
    lo, hi = model.c_o - d, model.c_o + d
    y2_gap = abs(solve_single(model, lo).y2 - solve_pair(model, hi, margin=0.0).y2)
    dy_gap = abs(boundary_derivatives(model, lo)[1] - boundary_derivatives(model, hi)[1])
    record(4, y2_gap < 1e-4 and dy_gap < 1e-2,
           f"y2 gap {y2_gap:.1e} (< 1e-4), derivative gap {dy_gap:.3g} (< 1e-2)")


def test_criterion_05_derivatives(model):
    h = 1e-6
    worst = 0.0
    regimes = (np.linspace(0.01, model.c_o - 0.01, 20),
               np.linspace(model.c_o + 0.01, model.c_hat - 0.01, 20))
    for cs in regimes:
        for c in cs:
            d1, d2 = boundary_derivatives(model, c)
            if c < model.c_o:
                fd2 = (solve_single(model, c + h).y2 - solve_single(model, c - h).y2) / (2 * h)
            else:
                a, b = solve_pair(model, c - h), solve_pair(model, c + h)
                fd2 = (b.y2 - a.y2) / (2 * h)
                worst = max(worst, abs((b.y1 - a.y1) / (2 * h) - d1) / abs(d1))
            worst = max(worst, abs(fd2 - d2) / abs(d2))
    record(5, worst < 1e-4, f"max relative error {worst:.1e}")


def test_criterion_06_hjb(model):
    t0 = time.perf_counter()
    table = build_table(model, [])
    xs = np.linspace(-3, 3, 400)
    pde_in = slack_neg = slack_act = pde_act = 0.0
    for c in np.linspace(1e-3, 1 - 1e-3, 200):
        if abs(c - model.c_hat) < 1e-6:
            continue
        if c < model.c_hat:
            g, b = table.point(c).gamma_hat, table.point(c).beta_hat
        else:
            g, b = model.gamma_o, math.inf
        keep = (np.abs(xs - g) > 1e-6) & (np.abs(xs - b) > 1e-6)
        pde, slack, code = hjb_row(model, table, xs[keep], c)
        ins = code == 0
        pde_in = max(pde_in, np.abs(pde[ins]).max(initial=0.0))
        slack_neg = max(slack_neg, (-slack).max(initial=0.0))
        slack_act = max(slack_act, np.abs(slack[~ins]).max(initial=0.0))
        pde_act = max(pde_act, (-pde[~ins]).max(initial=0.0))
    secs = time.perf_counter() - t0
    ok = pde_in < 1e-8 and slack_neg <= 1e-8 and slack_act < 1e-10 and pde_act <= 1e-8 and secs < 10
    record(6, ok, f"inaction PDE {pde_in:.1e}, slack<0 {slack_neg:.1e}, action slack "
                  f"{slack_act:.1e}, action PDE sign {pde_act:.1e}, {secs:.2f} s")


def test_criterion_07_smooth_fit(model, table):
    err = 0.0
    for c in (0.75, 0.85, 0.95):
        p = smooth_fit_probe(model, table, c, h=1e-4)
        err = max(err, abs(p.lower_minus + 1), abs(p.lower_plus + 1))
    p = smooth_fit_probe(model, table, 0.55, h=1e-4)
    ok = err < 1e-5 and p.lower_jump > 1e-3 and p.upper_jump > 1e-3
    record(7, ok, f"|W_cx + 1| {err:.1e}; jumps at c=0.55: lower {p.lower_jump:.4f}, "
                  f"upper {p.upper_jump:.4f}")


def test_criterion_08_geometry(model, table):
    worst_cvx = worst_above = worst_stop = 0.0
    for c in (0.1, 0.3, 0.55, 0.65):
        ys = np.logspace(-8, 2, 10_000)
        H, Q = minorant_row(model, table, ys, c)
        mids = 0.5 * (ys[:-1] + ys[1:])
        Qm = minorant_row(model, table, mids, c)[1]
        worst_cvx = max(worst_cvx, (Qm - 0.5 * (Q[:-1] + Q[1:])).max())
        worst_above = max(worst_above, (Q - np.minimum(H, 0.0)).max())
        bp = table.point(c)
        stop = ys >= bp.y2
        if bp.y1 is not None:
            stop |= ys <= bp.y1
        worst_stop = max(worst_stop, np.abs(Q[stop] - H[stop]).max())
    ok = worst_cvx <= 1e-9 and worst_above <= 0.0 and worst_stop == 0.0
    record(8, ok, f"midpoint excess {worst_cvx:.1e}, Q - min(H,0) {worst_above:.1e}, "
                  f"stopping-set |Q-H| {worst_stop:.1e}")


def test_criterion_09_diagnostics(model, table):
    bp = table.point(0.55)
    xs = np.linspace(bp.gamma_hat, bp.beta_hat, 1002)
    th = [diagnostics(model, table, x, 0.55).theta for x in xs]
    inner = max(th[1:-1])
    ends = max(abs(th[0]), abs(th[-1]))
    gap = min(diagnostics(model, table, x, c).u_gap
              for x in np.linspace(-3, 3, 200)
              for c in np.linspace(0.0, model.c_hat - 1e-3, 50))
    record(9, inner < 0 and ends < 1e-9 and gap >= -1e-9,
           f"max interior theta {inner:.2e}, endpoint |theta| {ends:.1e}, min u_gap {gap:.1e}")


def test_criterion_10_monte_carlo(model, table):
    t0 = time.perf_counter()
    cfg = McConfig(200_000, dt=1e-3, horizon=30.0, seed=20240, bridge_correction=True)
    notes, ok = [], True
    for c in (0.55, 0.85):
        pols = [OPTIMAL, NO_ACTION, FULL_FILL_NOW, Policy("Delta", 0.1), JUMP_TO_CHAT]
        if c < model.c_hat:
            pols.append(REFLECT_AT_BETA)
        res = mc_compare(model, table, 0.0, c, pols, cfg)
        W = value_W(model, table, 0.0, c).W
        opt = res[OPTIMAL.label]
        err = abs(opt.mean - W)
        ok &= err <= max(3 * opt.std_error, 5e-3)
        for p in pols[1:]:
            r = res[p.label]
            ok &= opt.mean <= r.mean + 3 * (opt.std_error + r.std_error)
        notes.append(f"c={c}: mean {opt.mean:.5f} vs W {W:.5f} (SE {opt.std_error:.1e})")
    secs = time.perf_counter() - t0
    ok &= secs < 300
    record(10, ok, "; ".join(notes) + f"; {secs:.0f} s")


def test_criterion_11_calibration(model, table):
    cfg = McConfig(20_000, dt=1e-3, horizon=30.0, seed=7)
    na = mc_cost(model, table, 1.0, 0.5, NO_ACTION, cfg)
    up = laplace_check(model, 0.0, None, 1.0, cfg)
    two = laplace_check(model, 0.0, -1.0, 1.0, cfg)
    ok = (abs(na.mean - 0.45) <= 3 * na.std_error
          and abs(up.mc_discount - math.exp(-1)) <= 3 * up.se_discount
          and abs(two.mc_discounted_price) <= 3 * two.se_discounted_price)
    record(11, ok, f"NoAction {na.mean:.4f}±{na.std_error:.1e}; laplace {up.mc_discount:.4f}"
                   f"±{up.se_discount:.1e}; symmetric {two.mc_discounted_price:.1e}"
                   f"±{two.se_discounted_price:.1e}")


def _cli(args):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = run(args)
    return code, buf.getvalue()


def test_criterion_12_end_to_end():
    code, out = _cli(["verify", "--lambda", "0.5", "--a", "0.4"])
    code_b, table = _cli(["boundaries", "--c-min", "0", "--c-max", "1", "--n", "256"])
    rows = table.strip().split("\n")
    regimes = {r.split(",")[1] for r in rows[1:]}
    const_rows = [r for r in rows[1:] if r.split(",")[1] == "ConstantLower"]
    sentinel_ok = all(r.split(",", 1)[1] == "ConstantLower,-1.0,+inf,," for r in const_rows)
    single_ok = all(r.split(",")[2] == "-inf" and r.split(",")[4] == ""
                    for r in rows[1:] if r.split(",")[1] == "SingleUpper")
    _, tenth = _cli(["boundaries", "--n", "11"])
    ok = (code == 0 and code_b == 0 and len(rows) == 257
          and regimes == {"SingleUpper", "TwoSided", "ConstantLower"}
          and sentinel_ok and single_ok and "\n0.9,ConstantLower,-1.0,+inf,,\n" in tenth)
    record(12, ok, f"verify exit {code}; {len(rows) - 1} rows, regimes {sorted(regimes)}")
