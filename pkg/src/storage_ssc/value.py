"""The candidate value function and its verification diagnostics.

Below ``c_hat`` the value is ``W(x, c) = x Phi(c) + V(x, c)`` where ``V`` is the
stopping value ``phi(x) Q(F(x), c)`` built from the convex minorant ``Q`` of
the obstacle.  Inside the strip ``(gamma_hat, beta_hat)`` this is
``A(c) psi(x) + B(c) phi(x)`` with ``A`` the tangent slope at ``y2`` and ``B``
its intercept; outside the strip ``V`` coincides with the payoff ``G``.  From
``c_hat`` on the value is the explicit piece ``W^o``.

Every derivative is analytic; finite differences appear only in
:func:`smooth_fit_probe`, which measures kinks of ``W_cx``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .boundaries import BoundaryPoint, BoundaryTable, Regime
from .model import Model, ModelError
from .transform import E_M1, obstacle_H, obstacle_values

__all__ = [
    "Region",
    "Constraint",
    "ValuePoint",
    "HjbResidual",
    "SmoothFitProbe",
    "Diagnostics",
    "StripCoefficients",
    "minorant_Q",
    "minorant_Q_lower_anchor",
    "minorant_row",
    "strip_coefficients",
    "value_W",
    "value_row",
    "hjb_check",
    "hjb_row",
    "smooth_fit_probe",
    "diagnostics",
    "u_feynman_kac",
    "growth_constant",
]

KINK_TOL = 1e-9
HJB_TOL = 1e-8


class Region(str, enum.Enum):
    INACTION = "Inaction"
    ACTION_LOWER = "ActionLower"
    ACTION_UPPER = "ActionUpper"

    def __str__(self) -> str:
        return self.value


class Constraint(str, enum.Enum):
    PDE = "PDE"
    GRADIENT = "Gradient"
    BOTH = "Both"

    def __str__(self) -> str:
        return self.value


_REGIONS = (Region.INACTION, Region.ACTION_LOWER, Region.ACTION_UPPER)


@dataclass(frozen=True)
class ValuePoint:
    x: float
    c: float
    W: float
    W_x: float
    W_c: float
    W_xx: float
    region: Region


@dataclass(frozen=True)
class HjbResidual:
    """Both sides of the variational inequality at one state.

    ``pde_residual`` is ``W_xx/2 - lam W + lam x Phi(c)`` and ``gradient_slack``
    is ``W_c + x``; the inequality reads ``max(-pde, -slack) = 0``.
    """

    x: float
    c: float
    pde_residual: float
    gradient_slack: float
    active_constraint: Constraint
    region: Region
    kink: bool

    @property
    def hjb(self) -> float:
        return max(-self.pde_residual, -self.gradient_slack)


@dataclass(frozen=True)
class StripCoefficients:
    """``V = A psi + B phi`` inside the strip, with the c-derivatives of A, B."""

    A: float
    B: float
    dA: float
    dB: float


# -- minorant ------------------------------------------------------------------

def _check_below_chat(model: Model, c: float) -> None:
    if not 0.0 <= c < model.c_hat:
        raise ModelError(f"need c in [0, c_hat), got {c}")


def minorant_Q(model: Model, table: BoundaryTable, y: float, c: float) -> float:
    """Largest non-positive convex minorant of ``H(., c)``, anchored at ``y2``."""
    _check_below_chat(model, c)
    if y < 0.0:
        raise ModelError("Q needs y >= 0")
    bp = table.point(c)
    lo = 0.0 if bp.y1 is None else bp.y1
    if y >= bp.y2 or (bp.y1 is not None and y <= lo):
        return obstacle_H(model, y, c).H
    if bp.y1 is None:
        # the line passes through the origin
        return obstacle_H(model, bp.y2, c, side="right").H_y * y
    top = obstacle_H(model, bp.y2, c, side="right")
    return top.H_y * (y - bp.y2) + top.H


def minorant_Q_lower_anchor(model: Model, table: BoundaryTable, y: float, c: float) -> float:
    """Same tangent line written through ``(y1, H(y1))``; two-sided regime only."""
    bp = table.point(c)
    if bp.regime is not Regime.TWO_SIDED:
        raise ModelError("the lower-anchored form needs c in (c_o, c_hat)")
    low = obstacle_H(model, bp.y1, c)
    return low.H_y * (y - bp.y1) + low.H


def minorant_row(model: Model, table: BoundaryTable, ys, c: float):
    """``(H, Q)`` over an array of ``y`` at one level ``c < c_hat``."""
    _check_below_chat(model, c)
    y = np.asarray(ys, dtype=float)
    H = obstacle_values(model, y, c)
    bp = table.point(c)
    top = obstacle_H(model, bp.y2, c, side="right")
    if bp.y1 is None:
        line = top.H_y * y
        inside = y < bp.y2
    else:
        line = top.H_y * (y - bp.y2) + top.H
        inside = (y > bp.y1) & (y < bp.y2)
    return H, np.where(inside, line, H)


def strip_coefficients(model: Model, bp: BoundaryPoint) -> StripCoefficients:
    c = bp.c
    top = obstacle_H(model, bp.y2, c, side="right")
    dA = top.H_yy * bp.dy2 + top.H_yc
    if bp.regime is Regime.SINGLE_UPPER:
        # the line passes through the origin: intercept and its derivative vanish
        return StripCoefficients(top.H_y, 0.0, dA, 0.0)
    return StripCoefficients(top.H_y, top.H - top.H_y * bp.y2, dA, top.H_c - dA * bp.y2)


# -- value function ----------------------------------------------------------------

def _w_o_arrays(model: Model, x: np.ndarray, c: float):
    """(W^o, W^o_x, W^o_c, W^o_xx) at level ``c >= c_hat``, vectorised in x."""
    s = model.sqrt2lam
    ph, dph, _ = model.phi(c)
    Rc, dR = model.R(c), model.dR(c)
    left = x <= model.gamma_o
    e = np.exp(-s * np.where(left, 0.0, x)) * E_M1
    W = np.where(left, x * (1.0 - c), -e * Rc / s + x * ph)
    Wx = np.where(left, 1.0 - c, e * Rc + ph)
    Wc = np.where(left, -x, -e * dR / s + x * dph)
    Wxx = np.where(left, 0.0, -s * e * Rc)
    return W, Wx, Wc, Wxx


def value_row(model: Model, table: BoundaryTable, xs, c: float):
    """Vectorised value at one inventory level.

    Returns ``(W, W_x, W_c, W_xx, region_code)`` arrays; region codes index
    ``(Inaction, ActionLower, ActionUpper)``.
    """
    if not 0.0 <= c <= 1.0:
        raise ModelError(f"c must lie in [0, 1], got {c}")
    x = np.asarray(xs, dtype=float)
    if c >= model.c_hat:
        W, Wx, Wc, Wxx = _w_o_arrays(model, x, c)
        code = np.where(x <= model.gamma_o, 1, 0)
        return W, Wx, Wc, Wxx, code
    bp = table.point(c)
    lower = x <= bp.gamma_hat
    upper = x >= bp.beta_hat
    inside = ~(lower | upper)
    s = model.sqrt2lam
    ph, dph, _ = model.phi(c)
    W = np.empty_like(x)
    Wx = np.empty_like(x)
    Wc = np.empty_like(x)
    Wxx = np.empty_like(x)

    xl = x[lower]
    W[lower] = xl * (1.0 - c)
    Wx[lower] = 1.0 - c
    Wc[lower] = -xl
    Wxx[lower] = 0.0

    xu = x[upper]
    Wo, Wox, _, Woxx = _w_o_arrays(model, xu, model.c_hat)
    W[upper] = xu * (model.c_hat - c) + Wo
    Wx[upper] = (model.c_hat - c) + Wox
    Wc[upper] = -xu
    Wxx[upper] = Woxx

    xi = x[inside]
    if xi.size:
        k = strip_coefficients(model, bp)
        psi = np.exp(s * xi)
        phi = np.exp(-s * xi)
        V = k.A * psi + k.B * phi
        W[inside] = xi * ph + V
        Wx[inside] = ph + s * (k.A * psi - k.B * phi)
        Wc[inside] = xi * dph + k.dA * psi + k.dB * phi
        Wxx[inside] = 2.0 * model.lam * V
    code = np.where(lower, 1, np.where(upper, 2, 0))
    return W, Wx, Wc, Wxx, code


def value_W(model: Model, table: BoundaryTable, x: float, c: float) -> ValuePoint:
    W, Wx, Wc, Wxx, code = value_row(model, table, np.array([float(x)]), c)
    return ValuePoint(x=float(x), c=float(c), W=float(W[0]), W_x=float(Wx[0]),
                      W_c=float(Wc[0]), W_xx=float(Wxx[0]), region=_REGIONS[int(code[0])])


def growth_constant(model: Model) -> float:
    """A constant ``K`` with ``|W(x, c)| <= K (1 + |x|)`` on the whole state space."""
    return 1.0 + model.phi(0.0)[0] + 1.0 / model.sqrt2lam


# -- HJB residuals -------------------------------------------------------------------

def _boundaries_at(model: Model, table: BoundaryTable, c: float):
    if c >= model.c_hat:
        return model.gamma_o, math.inf
    bp = table.point(c)
    return bp.gamma_hat, bp.beta_hat


def hjb_row(model: Model, table: BoundaryTable, xs, c: float):
    """(pde_residual, gradient_slack, region_code) arrays at one level."""
    x = np.asarray(xs, dtype=float)
    W, _, Wc, Wxx, code = value_row(model, table, x, c)
    ph = model.phi(c)[0]
    lam = model.lam
    pde = 0.5 * Wxx - lam * W + lam * x * ph
    return pde, Wc + x, code


def hjb_check(model: Model, table: BoundaryTable, x: float, c: float) -> HjbResidual:
    """Variational-inequality residuals at one state.

    On a boundary curve ``W_xx`` jumps; the one-sided value from the action
    side is used and ``kink`` is set.
    """
    pde, slack, code = hjb_row(model, table, np.array([float(x)]), c)
    pde, slack = float(pde[0]), float(slack[0])
    g, b = _boundaries_at(model, table, c)
    kink = abs(x - g) < KINK_TOL or abs(x - b) < KINK_TOL
    pde_tight = abs(pde) <= HJB_TOL
    grad_tight = abs(slack) <= HJB_TOL
    if pde_tight and grad_tight:
        active = Constraint.BOTH
    elif grad_tight:
        active = Constraint.GRADIENT
    else:
        active = Constraint.PDE
    return HjbResidual(x=float(x), c=float(c), pde_residual=pde, gradient_slack=slack,
                       active_constraint=active, region=_REGIONS[int(code[0])], kink=kink)


# -- smooth fit --------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothFitProbe:
    """One-sided estimates of ``W_cx`` at each finite boundary."""

    c: float
    lower: Optional[float]
    lower_minus: Optional[float]
    lower_plus: Optional[float]
    lower_jump: Optional[float]
    upper: Optional[float]
    upper_minus: Optional[float]
    upper_plus: Optional[float]
    upper_jump: Optional[float]


def _one_sided_wcx(model, table, b, c, h):
    # second-order one-sided differences of the analytic W_c
    xs = np.array([b - 2 * h, b - h, b, b + h, b + 2 * h])
    Wc = value_row(model, table, xs, c)[2]
    minus = (3.0 * Wc[2] - 4.0 * Wc[1] + Wc[0]) / (2.0 * h)
    plus = (-3.0 * Wc[2] + 4.0 * Wc[3] - Wc[4]) / (2.0 * h)
    return float(minus), float(plus)


def smooth_fit_probe(model: Model, table: BoundaryTable, c: float, h: float = 1e-4) -> SmoothFitProbe:
    if not 1e-6 < h < 1e-2:
        raise ModelError(f"step must lie in (1e-6, 1e-2), got {h}")
    if c == model.c_hat:
        raise ModelError("the probe is undefined at c = c_hat")
    g, b = _boundaries_at(model, table, c)
    lo = (None, None, None, None)
    up = (None, None, None, None)
    if math.isfinite(g):
        m, p = _one_sided_wcx(model, table, g, c, h)
        lo = (g, m, p, abs(p - m))
    if math.isfinite(b):
        m, p = _one_sided_wcx(model, table, b, c, h)
        up = (b, m, p, abs(p - m))
    return SmoothFitProbe(c, *lo, *up)


# -- appendix diagnostics -------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostics:
    theta: Optional[float]
    u_gap: float


def _theta(s, x, g, b):
    return x * math.sinh(s * (b - g)) - g * math.sinh(s * (b - x)) - b * math.sinh(s * (x - g))


def diagnostics(model: Model, table: BoundaryTable, x: float, c: float) -> Diagnostics:
    """``theta`` (two-sided regime only) and ``u_gap = V_c - G_c``.

    ``u_gap`` vanishes identically off the strip, where ``V = G``.
    """
    _check_below_chat(model, c)
    bp = table.point(c)
    theta = None
    if bp.regime is Regime.TWO_SIDED:
        theta = _theta(model.sqrt2lam, x, bp.gamma_hat, bp.beta_hat)
    if x <= bp.gamma_hat or x >= bp.beta_hat:
        return Diagnostics(theta, 0.0)
    k = strip_coefficients(model, bp)
    s = model.sqrt2lam
    Vc = k.dA * math.exp(s * x) + k.dB * math.exp(-s * x)
    return Diagnostics(theta, Vc - x * model.dR(c))


def u_feynman_kac(model: Model, table: BoundaryTable, x: float, c: float) -> float:
    """``u = V_c - G_c`` from hitting-time expectations of the free Brownian motion.

    An independent route to the same quantity as ``diagnostics(...).u_gap``:
    one-sided exit for ``c <= c_o``, two-sided sinh ratios above.
    """
    _check_below_chat(model, c)
    bp = table.point(c)
    g, b = bp.gamma_hat, bp.beta_hat
    if x <= g or x >= b:
        return 0.0
    s = model.sqrt2lam
    lead = 1.0 + model.phi(c)[1]
    if bp.regime is Regime.SINGLE_UPPER:
        return lead * (x - b * math.exp(s * (x - b)))
    return lead * _theta(s, x, g, b) / math.sinh(s * (b - g))
