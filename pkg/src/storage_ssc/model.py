"""Problem parameters, the running-cost factor and the critical inventory levels.

The cost factor ``phi`` must be C^2, decreasing and strictly convex on [0, 1]
with ``phi(1) = 0``.  The default family is

    phi(c) = a (1 - c) + (1 - c)^2,    0 < a < 1,

for which ``R(c) = 1 - c - phi(c) = (1 - c)(c - a)`` and every critical level
has a closed form.  A user-supplied ``phi`` is accepted through
:func:`build_custom_model`; its critical levels are then located by bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

from ._roots import bisect

__all__ = [
    "Model",
    "ModelError",
    "build_model",
    "build_custom_model",
    "phi_eval",
    "running_terms",
]

ROOT_TOL = 1e-12


class ModelError(ValueError):
    """Raised for parameters outside the supported regime."""


@dataclass(frozen=True)
class Model:
    """Immutable parameter set with its derived critical levels.

    ``lam`` is the discount rate, ``a`` the coefficient of the quadratic
    family (``None`` for a custom cost factor).  ``c_hat`` is the root of
    ``k``, ``c_o`` the root of ``R`` in (0, 1), ``r_hat = R(c_hat)`` and
    ``gamma_o = -1/sqrt(2 lam)`` is the constant lower boundary for
    ``c >= c_hat``.
    """

    lam: float
    a: Optional[float]
    c_hat: float
    c_o: float
    r_hat: float
    gamma_o: float
    phi_funcs: Optional[Tuple[Callable, Callable, Callable]] = field(
        default=None, repr=False, compare=False
    )

    @property
    def sqrt2lam(self) -> float:
        return math.sqrt(2.0 * self.lam)

    def phi(self, c: float) -> Tuple[float, float, float]:
        if self.phi_funcs is None:
            u = 1.0 - c
            return self.a * u + u * u, -self.a - 2.0 * u, 2.0
        f, df, d2f = self.phi_funcs
        return float(f(c)), float(df(c)), float(d2f(c))

    def R(self, c: float) -> float:
        if self.phi_funcs is None:
            return (1.0 - c) * (c - self.a)
        return 1.0 - c - self.phi(c)[0]

    def dR(self, c: float) -> float:
        """R'(c) = -(1 + phi'(c)); positive below c_hat."""
        if self.phi_funcs is None:
            return 1.0 + self.a - 2.0 * c
        return -1.0 - self.phi(c)[1]

    def r_gap(self, c: float) -> float:
        """R(c_hat) - R(c), evaluated without cancellation where possible."""
        if self.phi_funcs is None:
            d = c - self.c_hat
            return d * d
        return self.r_hat - self.R(c)

    def k(self, c: float) -> float:
        return self.lam * (1.0 + self.phi(c)[1])


def _validate(m: Model) -> Model:
    if not 0.0 < m.c_o < m.c_hat < 1.0:
        raise ModelError(f"need 0 < c_o < c_hat < 1, got c_o={m.c_o}, c_hat={m.c_hat}")
    if not m.r_hat > 0.0:
        raise ModelError(f"R(c_hat) must be positive, got {m.r_hat}")
    if abs(m.R(m.c_o)) > ROOT_TOL or abs(m.k(m.c_hat)) > ROOT_TOL * max(1.0, m.lam):
        raise ModelError("critical levels do not solve R(c_o)=0, k(c_hat)=0")
    return m


def build_model(lam: float, a: float) -> Model:
    """Model for the quadratic cost family.

    >>> m = build_model(0.5, 0.4)
    >>> (m.c_hat, m.c_o, round(m.r_hat, 12), m.gamma_o)
    (0.7, 0.4, 0.09, -1.0)
    """
    lam = float(lam)
    a = float(a)
    if not (math.isfinite(lam) and lam > 0.0):
        raise ModelError(f"lambda must be positive, got {lam}")
    if not 0.0 < a < 1.0:
        raise ModelError(f"a must lie in (0, 1), got {a}")
    c_hat = (1.0 + a) / 2.0
    m = Model(
        lam=lam,
        a=a,
        c_hat=c_hat,
        c_o=a,
        r_hat=(1.0 - a) ** 2 / 4.0,
        gamma_o=-1.0 / math.sqrt(2.0 * lam),
    )
    return _validate(m)


def build_custom_model(
    lam: float,
    phi: Callable[[float], float],
    dphi: Callable[[float], float],
    d2phi: Callable[[float], float],
) -> Model:
    """Model for an arbitrary admissible cost factor.

    ``c_hat`` solves ``phi'(c) = -1`` and ``c_o`` solves ``R(c) = 0`` on
    (0, c_hat); both are bracketed and bisected to 1e-12.  Raises
    :class:`ModelError` when either root is missing from (0, 1).
    """
    lam = float(lam)
    if not (math.isfinite(lam) and lam > 0.0):
        raise ModelError(f"lambda must be positive, got {lam}")
    if abs(phi(1.0)) > 1e-12:
        raise ModelError("phi(1) must vanish")

    def k_over_lam(c):
        return 1.0 + dphi(c)

    if not (k_over_lam(0.0) < 0.0 < k_over_lam(1.0)):
        raise ModelError("phi'(c) = -1 has no root in (0, 1)")
    c_hat = bisect(k_over_lam, 0.0, 1.0, xtol=ROOT_TOL)

    def R(c):
        return 1.0 - c - phi(c)

    if not (R(0.0) < 0.0 < R(c_hat)):
        # the c_o outside (0, 1) case is not constructed here
        raise ModelError("R has no root in (0, c_hat); unsupported cost factor")
    c_o = bisect(R, 0.0, c_hat, xtol=ROOT_TOL)
    m = Model(
        lam=lam,
        a=None,
        c_hat=c_hat,
        c_o=c_o,
        r_hat=R(c_hat),
        gamma_o=-1.0 / math.sqrt(2.0 * lam),
        phi_funcs=(phi, dphi, d2phi),
    )
    return _validate(m)


def _check_unit(c: float) -> None:
    if not 0.0 <= c <= 1.0:
        raise ModelError(f"inventory level must lie in [0, 1], got {c}")


def phi_eval(model: Model, c: float) -> Tuple[float, float, float]:
    """(phi, phi', phi'') at ``c`` in [0, 1]."""
    _check_unit(c)
    return model.phi(c)


def running_terms(model: Model, c: float) -> Tuple[float, float]:
    """(R(c), k(c)) at ``c`` in [0, 1]."""
    _check_unit(c)
    return model.R(c), model.k(c)
