# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path kernel.  Semantics are documented in ``_mc_fallback``."""
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, sqrt, isinf
from libc.stdint cimport int8_t, int64_t, uint64_t
from libc.stdlib cimport free, malloc

from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal_fill

from numpy.random import Philox

cdef enum:
    MAXPOL = 8

cdef double BRIDGE_FLOOR = -40.0  # exp(-40) is below any useful crossing probability

cdef double U53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = z + <uint64_t>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t pair_key, uint64_t counter) noexcept nogil:
    return <double>(_mix(pair_key ^ counter) >> 11) * U53


cdef inline bint _crosses(double a, double b, double dt, bint bridge,
                          uint64_t pair_key, uint64_t counter) noexcept nogil:
    # a, b: signed distances to the level before/after the step (a > 0 alive)
    cdef double e
    if b <= 0.0:
        return True
    if not bridge:
        return False
    e = -2.0 * a * b / dt
    if e <= BRIDGE_FLOOR:
        return False
    return _uniform(pair_key, counter) < exp(e)


cdef inline void _drift(double* X, double* acc, const double* dW, const double* disc,
                        double sign, Py_ssize_t i0, Py_ssize_t n) noexcept nogil:
    # remaining steps once no policy can trigger an event
    cdef double x = X[0], a = acc[0]
    cdef Py_ssize_t i
    for i in range(i0, n):
        a = a + disc[i] * x
        x = x + sign * dW[i]
    X[0] = x
    acc[0] = a


cdef void _run_path(double x0, const double* dW, const double* disc, double lam_dt,
                    double dt, Py_ssize_t n, bint bridge, uint64_t pair_key, int anti,
                    double sign, const double[:, ::1] params, int npol, bint need_full,
                    double* cost, int8_t* side, int64_t* k_event, double* exit_disc,
                    int8_t* trunc, double* acc_out, double* tail_out) noexcept nogil:
    cdef int phase[MAXPOL]
    cdef double start[MAXPOL]
    cdef double X = x0, Xn, acc = 0.0
    cdef Py_ssize_t i
    cdef int p, active = 0, hit
    cdef double L1, U1, L2
    cdef uint64_t base

    for p in range(npol):
        phase[p] = 0
        start[p] = 0.0
        cost[p] = 0.0
        side[p] = 0
        k_event[p] = -1
        exit_disc[p] = 0.0
        trunc[p] = 0
        L1 = params[p, 0]
        U1 = params[p, 1]
        if X <= L1:
            cost[p] = lam_dt * params[p, 3] * acc + disc[0] * X * params[p, 5]
            side[p] = 1
            k_event[p] = 0
            exit_disc[p] = disc[0]
            phase[p] = 2
        elif X >= U1:
            cost[p] = lam_dt * params[p, 3] * acc + disc[0] * X * params[p, 6]
            side[p] = 2
            k_event[p] = 0
            exit_disc[p] = disc[0]
            if params[p, 10] != 0.0:
                phase[p] = 2
            else:
                phase[p] = 1
                if X <= params[p, 2]:
                    cost[p] = cost[p] + (lam_dt * params[p, 4] * (acc - start[p])
                                         + disc[0] * X * params[p, 7])
                    phase[p] = 2
        # a phase with no reachable level only accrues cost: keep it passive
        if phase[p] == 0 and isinf(L1) and isinf(U1):
            phase[p] = 3
        elif phase[p] == 1 and isinf(params[p, 2]):
            phase[p] = 4
        if phase[p] < 2:
            active += 1

    for i in range(n):
        if active == 0:
            if not need_full:
                break
            _drift(&X, &acc, dW, disc, sign, i, n)
            break
        acc = acc + disc[i] * X
        Xn = X + sign * dW[i]
        if active > 0:
            base = 4 * <uint64_t>i + 2 * <uint64_t>anti
            for p in range(npol):
                if phase[p] == 0:
                    L1 = params[p, 0]
                    U1 = params[p, 1]
                    hit = 0
                    if not isinf(L1) and Xn <= L1:
                        hit = 1
                    elif not isinf(U1) and Xn >= U1:
                        hit = 2
                    elif not isinf(L1) and _crosses(X - L1, Xn - L1, dt, bridge, pair_key, base):
                        hit = 1
                    elif not isinf(U1) and _crosses(U1 - X, U1 - Xn, dt, bridge, pair_key, base + 1):
                        hit = 2
                    if hit == 1:
                        cost[p] = lam_dt * params[p, 3] * acc + disc[i + 1] * L1 * params[p, 5]
                        side[p] = 1
                        k_event[p] = i + 1
                        exit_disc[p] = disc[i + 1]
                        phase[p] = 2
                        active -= 1
                    elif hit == 2:
                        cost[p] = lam_dt * params[p, 3] * acc + disc[i + 1] * U1 * params[p, 6]
                        side[p] = 2
                        k_event[p] = i + 1
                        exit_disc[p] = disc[i + 1]
                        if params[p, 10] != 0.0:
                            phase[p] = 2
                            active -= 1
                        else:
                            start[p] = acc
                            if isinf(params[p, 2]):
                                phase[p] = 4
                                active -= 1
                            else:
                                phase[p] = 1
                elif phase[p] == 1:
                    L2 = params[p, 2]
                    if _crosses(X - L2, Xn - L2, dt, bridge, pair_key, base):
                        cost[p] = cost[p] + (lam_dt * params[p, 4] * (acc - start[p])
                                             + disc[i + 1] * L2 * params[p, 7])
                        phase[p] = 2
                        active -= 1
        X = Xn

    for p in range(npol):
        if phase[p] == 0 or phase[p] == 3:
            cost[p] = lam_dt * params[p, 3] * acc + disc[n] * X * params[p, 8]
            trunc[p] = 1
        elif phase[p] == 1 or phase[p] == 4:
            cost[p] = cost[p] + (lam_dt * params[p, 4] * (acc - start[p])
                                 + disc[n] * X * params[p, 9])
            trunc[p] = 1
    acc_out[0] = acc
    tail_out[0] = disc[n] * X


def simulate_pairs(double x0, const double[::1] disc, double lam, double dt, int substeps,
                   uint64_t seed, int64_t pair_start, int64_t pair_end, bint bridge,
                   const double[:, ::1] params, bint need_full,
                   double[:, :, ::1] cost, int8_t[:, :, ::1] side, int64_t[:, :, ::1] k_event,
                   double[:, :, ::1] exit_disc, int8_t[:, :, ::1] trunc,
                   double[:, ::1] acc_total, double[:, ::1] tail):
    """Simulate pairs ``pair_start..pair_end`` into rows ``0..pair_end-pair_start``."""
    cdef Py_ssize_t n = disc.shape[0] - 1
    cdef Py_ssize_t nf = n * substeps
    cdef int npol = params.shape[0]
    cdef double sdt = sqrt(dt / substeps)
    cdef double lam_dt = lam * dt
    cdef double s
    cdef double* z
    cdef double* dW
    cdef bitgen_t* rng
    cdef int64_t pair
    cdef Py_ssize_t r, i, k
    cdef int anti
    cdef uint64_t seed_key = _mix(seed)
    cdef uint64_t pair_key
    if npol > MAXPOL:
        raise ValueError(f"at most {MAXPOL} barrier policies per pass")
    z = <double*>malloc(nf * sizeof(double))
    dW = <double*>malloc(n * sizeof(double))
    if z == NULL or dW == NULL:
        free(z)
        free(dW)
        raise MemoryError()
    try:
        for pair in range(pair_start, pair_end):
            r = pair - pair_start
            bg = Philox(key=[seed, pair])
            rng = <bitgen_t*>PyCapsule_GetPointer(bg.capsule, "BitGenerator")
            pair_key = _mix(seed_key ^ <uint64_t>pair)
            with nogil:
                random_standard_normal_fill(rng, nf, z)
                for i in range(n):
                    s = sdt * z[i * substeps]
                    for k in range(1, substeps):
                        s = s + sdt * z[i * substeps + k]
                    dW[i] = s
                for anti in range(2):
                    _run_path(x0, dW, &disc[0], lam_dt, dt, n, bridge, pair_key, anti,
                              1.0 - 2.0 * anti, params, npol, need_full,
                              &cost[r, anti, 0], &side[r, anti, 0], &k_event[r, anti, 0],
                              &exit_disc[r, anti, 0], &trunc[r, anti, 0],
                              &acc_total[r, anti], &tail[r, anti])
    finally:
        free(z)
        free(dW)
