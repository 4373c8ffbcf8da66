"""Bracketed scalar root finding."""
from __future__ import annotations

import math


class BracketError(ValueError):
    pass


def bisect(f, lo, hi, xtol=1e-12, maxiter=200):
    """Root of ``f`` in [lo, hi] by bisection.

    Stops once the bracket is narrower than ``xtol`` or can no longer be
    split in floating point, whichever comes later, so the result is as
    tight as double precision allows.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    # xtol only bounds the acceptable width; iterate to full resolution
    if hi - lo > xtol:
        raise BracketError(f"bisection did not reach width {xtol}: [{lo}, {hi}]")
    return lo if abs(flo) <= abs(fhi) else hi
