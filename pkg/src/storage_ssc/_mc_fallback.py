"""Pure-numpy path kernel, the reference semantics of the compiled one.

Each pair of antithetic paths draws its normals from ``Philox(key=[seed, pair])``
so every pair is an independent, schedulable unit.  Coarse increments are the
sequential sum of ``substeps`` fine increments, which couples runs at different
step sizes.

A *barrier policy* is one row of ``params``::

    L1, U1, L2, phi1, phi2, jump_low1, jump_up1, jump_low2, fill0, fill1, stop

Phase 0 runs at cost rate ``phi1`` until the price leaves ``(L1, U1)``.  A lower
exit pays ``jump_low1`` units at the level ``L1`` and ends the path; an upper exit
pays ``jump_up1`` at ``U1`` and switches to phase 1 (rate ``phi2``, lower level
``L2``, final jump ``jump_low2``), unless ``stop`` is set.  An exit detected
during step ``i`` is executed at ``t_{i+1}``.  Paths still running at the
horizon are filled with ``fill0``/``fill1`` units at the terminal price.
Running cost uses the left-rectangle rule on the prefix sums
``acc_k = sum_{i<k} disc_i X_i``.

Crossing between grid points is detected either by the grid value beyond the
level or, with ``bridge``, by a uniform below the Brownian-bridge crossing
probability ``exp(-2 a b / dt)``.  Uniforms are a counter hash of
``(seed, pair, 4 i + 2 antithetic + upper)`` so they do not depend on evaluation
order.
"""
from __future__ import annotations

import math

import numpy as np

BRIDGE_FLOOR = -40.0
_C1 = np.uint64(0x9E3779B97F4A7C15)
_C2 = np.uint64(0xBF58476D1CE4E5B9)
_C3 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / 9007199254740992.0
_BATCH_ELEMENTS = 2_000_000


def _mix(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _C1
        z = (z ^ (z >> np.uint64(30))) * _C2
        z = (z ^ (z >> np.uint64(27))) * _C3
    return z ^ (z >> np.uint64(31))


def pair_keys(seed, pairs):
    return _mix(_mix(np.uint64(seed)) ^ np.asarray(pairs, dtype=np.uint64))


def bridge_uniform(keys, counters):
    h = _mix(np.asarray(keys, dtype=np.uint64) ^ np.asarray(counters, dtype=np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * _U53


def pair_normals(seed, pair, count):
    return np.random.Generator(np.random.Philox(key=[seed, pair])).standard_normal(count)


def coarse_increments(z, dt, substeps):
    """Sequentially summed fine increments; shape (..., n)."""
    sdt = math.sqrt(dt / substeps)
    inc = (sdt * z).reshape(*z.shape[:-1], -1, substeps)
    dW = inc[..., 0].copy()
    for k in range(1, substeps):
        dW = dW + inc[..., k]
    return dW


def _crossing(a, b, dt, bridge, keys, counters):
    """Boolean crossing flags for distances ``a`` (before) and ``b`` (after) a step."""
    hit = b <= 0.0
    if not bridge:
        return hit
    with np.errstate(invalid="ignore", over="ignore"):
        e = -2.0 * a * b / dt
    cand = ~hit & (e > BRIDGE_FLOOR)
    if cand.any():
        rows, cols = np.nonzero(cand)
        u = bridge_uniform(keys[rows], counters[rows, cols])
        hit = hit.copy()
        hit[rows, cols] = u < np.exp(e[rows, cols])
    return hit


def _first(flags):
    """Index of the first True per row, or -1."""
    idx = np.argmax(flags, axis=1)
    return np.where(flags[np.arange(flags.shape[0]), idx], idx, -1)


def _run_batch_raw(x0, disc, lam_dt, dt, bridge, keys, anti, X, A, params):
    M, n1 = X.shape
    n = n1 - 1
    Xa, Xb = X[:, :n], X[:, 1:]
    steps = np.arange(n, dtype=np.uint64)
    base = 4 * steps[None, :] + 2 * anti.astype(np.uint64)[:, None]
    rows = np.arange(M)
    out = []
    for row in params:
        L1, U1, L2, phi1, phi2, jl1, ju1, jl2, f0, f1, stop = (float(v) for v in row)
        cost = np.zeros(M)
        side = np.zeros(M, dtype=np.int8)
        k_ev = np.full(M, -1, dtype=np.int64)
        exd = np.zeros(M)
        trunc = np.zeros(M, dtype=np.int8)
        if x0 <= L1:
            cost[:] = disc[0] * x0 * jl1
            side[:] = 1
            k_ev[:] = 0
            exd[:] = disc[0]
            out.append((cost, side, k_ev, exd, trunc))
            continue
        if x0 >= U1:
            cost[:] = disc[0] * x0 * ju1
            side[:] = 2
            k_ev[:] = 0
            exd[:] = disc[0]
            if stop or x0 <= L2:
                if not stop:
                    cost[:] = cost + disc[0] * x0 * jl2
                out.append((cost, side, k_ev, exd, trunc))
                continue
            up = np.ones(M, dtype=bool)
            k1 = np.zeros(M, dtype=np.int64)
        else:
            zero = np.zeros((M, n), dtype=bool)
            gl = Xb <= L1 if not math.isinf(L1) else zero
            gu = Xb >= U1 if not math.isinf(U1) else zero
            bl = (_crossing(Xa - L1, Xb - L1, dt, bridge, keys, base)
                  if not math.isinf(L1) else zero)
            bu = (_crossing(U1 - Xa, U1 - Xb, dt, bridge, keys, base + np.uint64(1))
                  if not math.isinf(U1) else zero)
            code = np.where(gl, 1, np.where(gu, 2, np.where(bl, 1, np.where(bu, 2, 0))))
            first = _first(code != 0)
            hit = first >= 0
            k1 = np.where(hit, first + 1, n)
            sd = np.where(hit, code[rows, np.maximum(first, 0)], 0).astype(np.int8)
            lo = sd == 1
            up = sd == 2
            acc_k = A[rows, k1]
            cost = np.where(lo, lam_dt * phi1 * acc_k + disc[k1] * L1 * jl1, cost)
            cost = np.where(up, lam_dt * phi1 * acc_k + disc[k1] * U1 * ju1, cost)
            side = sd
            k_ev = np.where(hit, k1, -1)
            exd = np.where(hit, disc[k1], 0.0)
            none = ~hit
            cost = np.where(none, lam_dt * phi1 * A[:, n] + disc[n] * X[:, n] * f0, cost)
            trunc = none.astype(np.int8)
            if stop:
                out.append((cost, side, k_ev, exd, trunc))
                continue
        # phase 1 for the paths that left through the top
        start = np.where(up, A[rows, k1], 0.0)
        if not math.isinf(L2):
            fl = _crossing(Xa - L2, Xb - L2, dt, bridge, keys, base)
            fl &= np.arange(n)[None, :] >= k1[:, None]
            second = _first(fl)
        else:
            second = np.full(M, -1, dtype=np.int64)
        done = up & (second >= 0)
        k2 = np.where(done, second + 1, n)
        cost = np.where(done, cost + (lam_dt * phi2 * (A[rows, k2] - start) + disc[k2] * L2 * jl2),
                        cost)
        open_ = up & ~done
        cost = np.where(open_, cost + (lam_dt * phi2 * (A[:, n] - start) + disc[n] * X[:, n] * f1),
                        cost)
        trunc = np.where(open_, 1, trunc).astype(np.int8)
        out.append((cost, side, k_ev, exd, trunc))
    return out


def simulate_pairs(x0, disc, lam, dt, substeps, seed, pair_start, pair_end, bridge, params,
                   need_full, cost, side, k_event, exit_disc, trunc, acc_total, tail):
    """Same contract as the compiled ``simulate_pairs``."""
    disc = np.asarray(disc, dtype=float)
    params = np.asarray(params, dtype=float)
    n = disc.shape[0] - 1
    lam_dt = lam * dt
    batch = max(1, _BATCH_ELEMENTS // (2 * n))
    for b0 in range(pair_start, pair_end, batch):
        b1 = min(pair_end, b0 + batch)
        pairs = np.arange(b0, b1)
        z = np.stack([pair_normals(seed, int(p), n * substeps) for p in pairs])
        dW = coarse_increments(z, dt, substeps)
        B = len(pairs)
        inc = np.empty((B, 2, n))
        inc[:, 0] = dW
        inc[:, 1] = -dW
        inc = inc.reshape(2 * B, n)
        X = np.empty((2 * B, n + 1))
        X[:, 0] = x0
        X[:, 1:] = inc
        X = np.cumsum(X, axis=1)
        A = np.zeros((2 * B, n + 1))
        A[:, 1:] = np.cumsum(disc[:n] * X[:, :n], axis=1)
        keys = np.repeat(pair_keys(seed, pairs), 2)
        anti = np.tile(np.array([0, 1]), B)
        res = _run_batch(float(x0), disc, lam_dt, dt, bridge, keys, anti, X, A, params)
        r0, r1 = b0 - pair_start, b1 - pair_start
        for p, (c_, s_, k_, e_, t_) in enumerate(res):
            cost[r0:r1, :, p] = c_.reshape(B, 2)
            side[r0:r1, :, p] = s_.reshape(B, 2)
            k_event[r0:r1, :, p] = k_.reshape(B, 2)
            exit_disc[r0:r1, :, p] = e_.reshape(B, 2)
            trunc[r0:r1, :, p] = t_.reshape(B, 2)
        acc_total[r0:r1] = A[:, n].reshape(B, 2)
        tail[r0:r1] = (disc[n] * X[:, n]).reshape(B, 2)


def _run_batch(*args):
    # inactive levels are +-inf; products with them are masked out afterwards
    with np.errstate(invalid="ignore", over="ignore"):
        return _run_batch_raw(*args)
