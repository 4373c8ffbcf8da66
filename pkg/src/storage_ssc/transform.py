"""Fundamental solutions, the coordinate change y = F(x), and the obstacle H.

With ``s = sqrt(2 lam)`` the decreasing and increasing solutions of
``u''/2 = lam u`` are ``phi(x) = exp(-s x)`` and ``psi(x) = exp(s x)``;
``F = psi/phi = exp(2 s x)``.  The stopping payoff ``G`` and the explicit
value piece ``W^o`` are piecewise exponential-affine in ``x`` with a single
kink at ``gamma_o = -1/s``.  ``H(y, c) = G(F^{-1}(y), c) / phi(F^{-1}(y))``
is the same payoff viewed in the transformed coordinate; its kink sits at
``y = e^-2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Model, ModelError

__all__ = [
    "FundamentalAt",
    "ObstacleAt",
    "fundamental",
    "F_inverse",
    "w_o_eval",
    "payoff_G",
    "obstacle_H",
    "obstacle_values",
]

E_M1 = math.exp(-1.0)
E_M2 = math.exp(-2.0)
T_KINK = -2.0  # ln(e^-2)
EXP_LIMIT = 700.0


@dataclass(frozen=True)
class FundamentalAt:
    x: float
    phi_fund: float
    psi_fund: float
    F: float


@dataclass(frozen=True)
class ObstacleAt:
    """H and its partials at one (y, c).

    At ``y = 0`` the y-derivatives blow up; they are then returned as signed
    infinities (nan where the sign is undetermined) with ``unbounded`` set.
    ``side`` records which branch supplied ``H_yy`` at the kink ``y = e^-2``.
    """

    y: float
    c: float
    H: float
    H_y: float
    H_c: float
    H_yc: float
    H_yy: float
    unbounded: bool = False
    side: str = "left"


def fundamental(model: Model, x: float) -> FundamentalAt:
    s = model.sqrt2lam
    if abs(s * x) > EXP_LIMIT:
        raise ModelError(f"|sqrt(2 lam) x| = {abs(s * x):.1f} exceeds the numeric range")
    return FundamentalAt(x=x, phi_fund=math.exp(-s * x), psi_fund=math.exp(s * x),
                         F=math.exp(2.0 * s * x))


def F_inverse(model: Model, y: float) -> float:
    if y <= 0.0:
        raise ModelError("F^{-1} needs y > 0")
    return math.log(y) / (2.0 * model.sqrt2lam)


def w_o_eval(model: Model, x: float, c: float):
    """(W^o, W^o_x, W^o_c) for ``c`` in [c_hat, 1]."""
    if not model.c_hat <= c <= 1.0:
        raise ModelError(f"W^o is only defined for c in [c_hat, 1], got {c}")
    if x <= model.gamma_o:
        return x * (1.0 - c), 1.0 - c, -x
    s = model.sqrt2lam
    ph, dph, _ = model.phi(c)
    e = math.exp(-s * x) * E_M1
    return (-e * model.R(c) / s + x * ph,
            e * model.R(c) + ph,
            -e * model.dR(c) / s + x * dph)


def payoff_G(model: Model, x: float, c: float):
    """(G, G_x, G_c) for ``c`` in [0, c_hat]."""
    if not 0.0 <= c <= model.c_hat:
        raise ModelError(f"G is only defined for c in [0, c_hat], got {c}")
    Rc = model.R(c)
    if x <= model.gamma_o:
        return x * Rc, Rc, x * model.dR(c)
    s = model.sqrt2lam
    e = math.exp(-s * x) * E_M1
    return (-e * model.r_hat / s - x * model.r_gap(c),
            e * model.r_hat - model.r_gap(c),
            x * model.dR(c))


# -- log-space pieces used by the root solvers --------------------------------
#
# With t = ln y the obstacle reads, for K the branch coefficient,
#   H   = (K / 2s) e^{t/2} t            (+ const on the right branch)
#   H_y = (K / 2s) e^{-t/2} (1 + t/2)
# which stays finite for t down to -1400.

def branch_coef(model: Model, t: float, c: float) -> float:
    return model.R(c) if t <= T_KINK else -model.r_gap(c)


def H_log(model: Model, t: float, c: float) -> float:
    s = model.sqrt2lam
    if t <= T_KINK:
        return model.R(c) * math.exp(0.5 * t) * t / (2.0 * s)
    return -E_M1 * model.r_hat / s - model.r_gap(c) * math.exp(0.5 * t) * t / (2.0 * s)


def Hy_log(model: Model, t: float, c: float) -> float:
    return branch_coef(model, t, c) * math.exp(-0.5 * t) * (1.0 + 0.5 * t) / (2.0 * model.sqrt2lam)


def obstacle_H(model: Model, y: float, c: float, side: str = "left") -> ObstacleAt:
    """Obstacle and partials.  ``side`` picks the branch of ``H_yy`` at ``y = e^-2``."""
    if y < 0.0:
        raise ModelError("obstacle needs y >= 0")
    if not 0.0 <= c <= model.c_hat:
        raise ModelError(f"obstacle is only defined for c in [0, c_hat], got {c}")
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    s = model.sqrt2lam
    Rc = model.R(c)
    dR = model.dR(c)
    if y == 0.0:
        sgn = math.copysign(1.0, Rc) if Rc != 0.0 else math.nan
        return ObstacleAt(y=0.0, c=c, H=0.0, H_y=-sgn * math.inf, H_c=0.0,
                          H_yc=-math.copysign(math.inf, dR), H_yy=sgn * math.inf,
                          unbounded=True, side=side)
    t = math.log(y)
    left = t < T_KINK or (t == T_KINK and side == "left")
    K = Rc if left else -model.r_gap(c)
    half = math.exp(0.5 * t)
    H = H_log(model, t, c)
    H_y = K * (1.0 + 0.5 * t) / (half * 2.0 * s)
    H_yy = -K * t / (half * half * half * 8.0 * s)
    H_c = dR * half * t / (2.0 * s)
    H_yc = dR * (1.0 + 0.5 * t) / (half * 2.0 * s)
    return ObstacleAt(y=y, c=c, H=H, H_y=H_y, H_c=H_c, H_yc=H_yc, H_yy=H_yy, side=side)


def obstacle_values(model: Model, ys, c: float) -> np.ndarray:
    """``H(y, c)`` over an array of ``y >= 0``."""
    if not 0.0 <= c <= model.c_hat:
        raise ModelError(f"obstacle is only defined for c in [0, c_hat], got {c}")
    y = np.asarray(ys, dtype=float)
    if np.any(y < 0.0):
        raise ModelError("obstacle needs y >= 0")
    s = model.sqrt2lam
    pos = y > 0.0
    t = np.log(np.where(pos, y, 1.0))
    core = np.where(pos, np.exp(0.5 * t) * t / (2.0 * s), 0.0)
    left = t <= T_KINK
    return np.where(left, model.R(c) * core,
                    -E_M1 * model.r_hat / s - model.r_gap(c) * core)
