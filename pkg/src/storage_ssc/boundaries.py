"""Free boundaries of the control problem.

For each inventory level ``c`` below ``c_hat`` the lower/upper boundaries are
images under ``F^{-1}`` of the contact points of the convex minorant of the
obstacle ``H(., c)``:

* ``c_o < c < c_hat``: a line tangent to ``H`` at ``y1 in (0, e^-2)`` and
  ``y2 in (1, e^2)`` (the double tangent), found from ``F1 = F2 = 0``;
* ``0 <= c <= c_o``: a line through the origin tangent at ``y2 in (1, e^2)``,
  found from ``F3 = 0``; there is no lower boundary.

Internally the small point is parametrised by ``u = ln(y1) + 2 < 0``; the
residuals are rewritten in terms of ``R(c_hat) - R(c)`` so that neither end of
the regime loses precision (``y1`` underflows near ``c_o``, and the system
degenerates as ``c -> c_hat``).
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from ._roots import bisect
from .model import Model, ModelError
from .transform import E_M1, E_M2

__all__ = [
    "Regime",
    "YPair",
    "BoundaryPoint",
    "BoundaryTable",
    "UnderflowWarning",
    "residuals_F1_F2",
    "residual_F3",
    "solve_single",
    "solve_pair",
    "boundary_derivatives",
    "build_table",
    "chat_limit_y2",
]

E2 = math.exp(2.0)
SNAP = 1e-9
RESIDUAL_TOL = 1e-10
NEWTON_MAXITER = 50
U_FLOOR = -1400.0  # ln y1 >= -1402: y1 itself underflows long before this
UNDERFLOW_T = -600.0


class Regime(str, enum.Enum):
    SINGLE_UPPER = "SingleUpper"
    TWO_SIDED = "TwoSided"
    CONSTANT_LOWER = "ConstantLower"

    def __str__(self) -> str:
        return self.value


class UnderflowWarning(RuntimeWarning):
    """``y1`` is below e^-600; the caller is effectively at ``c_o``."""


@dataclass(frozen=True)
class YPair:
    """Transformed boundary points at one inventory level.

    ``y1`` is ``None`` in the single-boundary regime.  ``log_y1`` keeps the
    small point when ``y1`` itself would underflow.
    """

    c: float
    y1: Optional[float]
    y2: float
    residual_norm: float
    log_y1: Optional[float] = None


# -- building blocks ---------------------------------------------------------

def _f1(u):
    """y1^{-1/2}(1 + ln(y1)/2) with y1 = e^{u-2}."""
    return math.exp(1.0 - 0.5 * u) * 0.5 * u


def _f(u):
    """y1^{1/2}(1 - ln(y1)/2)."""
    return math.exp(0.5 * u - 1.0) * (2.0 - 0.5 * u)


def _f_minus_2e(u):
    """_f(u) - 2/e without cancellation for small |u|."""
    return E_M1 * (2.0 * math.expm1(0.5 * u) - 0.5 * u * math.exp(0.5 * u))


def _g(y):
    """y^{-1/2}(1 + ln(y)/2)."""
    return (1.0 + 0.5 * math.log(y)) / math.sqrt(y)


def _f2(y):
    """y^{1/2}(1 - ln(y)/2)."""
    return math.sqrt(y) * (1.0 - 0.5 * math.log(y))


def _dg(y):
    return -0.25 * math.log(y) / (y * math.sqrt(y))


def _df2(y):
    return -0.25 * math.log(y) / math.sqrt(y)


def _sys_u(model: Model, u: float, y2: float, c: float):
    """(F1, F2) as functions of (u, y2), evaluated in a cancellation-free form."""
    Rc = model.R(c)
    gap = model.r_gap(c)
    F1 = Rc * _f1(u) + gap * _g(y2)
    F2 = model.r_hat * _f_minus_2e(u) + gap * (_f2(y2) - _f(u))
    return F1, F2


def _jac_u(model: Model, u: float, y2: float, c: float):
    Rc = model.R(c)
    gap = model.r_gap(c)
    a11 = 0.25 * Rc * math.exp(1.0 - 0.5 * u) * (2.0 - u)
    a21 = 0.25 * Rc * math.exp(0.5 * u - 1.0) * (2.0 - u)
    return a11, gap * _dg(y2), a21, gap * _df2(y2)


# -- residuals ---------------------------------------------------------------

def residuals_F1_F2(model: Model, y1: float, y2: float, c: float):
    """(F1, F2) evaluated literally at (y1, y2; c)."""
    if y1 <= 0.0 or y2 <= 0.0:
        raise ModelError("F1, F2 need y1 > 0 and y2 > 0")
    Rc = model.R(c)
    d = Rc - model.r_hat
    l1, l2 = math.log(y1), math.log(y2)
    F1 = (1.0 + 0.5 * l1) / math.sqrt(y1) * Rc - (1.0 + 0.5 * l2) / math.sqrt(y2) * d
    F2 = (math.sqrt(y1) * (1.0 - 0.5 * l1) * Rc - math.sqrt(y2) * (1.0 - 0.5 * l2) * d
          - 2.0 * E_M1 * model.r_hat)
    return F1, F2


def _residuals_log(model: Model, log_y1: float, y2: float, c: float):
    """Literal (F1, F2) with y1 given by its logarithm."""
    Rc = model.R(c)
    d = Rc - model.r_hat
    l2 = math.log(y2)
    F1 = (1.0 + 0.5 * log_y1) * math.exp(-0.5 * log_y1) * Rc - (1.0 + 0.5 * l2) / math.sqrt(y2) * d
    F2 = (math.exp(0.5 * log_y1) * (1.0 - 0.5 * log_y1) * Rc - math.sqrt(y2) * (1.0 - 0.5 * l2) * d
          - 2.0 * E_M1 * model.r_hat)
    return F1, F2


def _f3_target(model: Model, c: float) -> float:
    return 2.0 * E_M1 * model.r_hat / model.r_gap(c)


def residual_F3(model: Model, y: float, c: float) -> float:
    if y <= 0.0:
        raise ModelError("F3 needs y > 0")
    if not 0.0 <= c <= model.c_o:
        raise ModelError(f"F3 only applies for c in [0, c_o], got {c}")
    return _f2(y) - _f3_target(model, c)


# -- solvers -----------------------------------------------------------------

def solve_single(model: Model, c: float) -> YPair:
    """Tangency point of the line through the origin, ``c`` in [0, c_o]."""
    if not 0.0 <= c <= model.c_o:
        raise ModelError(f"single-boundary regime needs c in [0, c_o], got {c}")
    target = _f3_target(model, c)
    # _f2 falls from 1 to 0 on (1, e^2) and 0 < target < 1
    y2 = bisect(lambda y: _f2(y) - target, 1.0 + 1e-12, E2 - 1e-12, xtol=1e-12)
    return YPair(c=c, y1=None, y2=y2, residual_norm=abs(_f2(y2) - target))


def _inner_u(model: Model, y2: float, c: float) -> float:
    """Slope match on the convex piece: the u with F1(u, y2) = 0."""
    rhs = -model.r_gap(c) * _g(y2) / model.R(c)
    lo = -2.0
    while _f1(lo) > rhs:
        lo *= 2.0
        if lo < U_FLOOR:
            raise ModelError(f"tangency point below e^{U_FLOOR:.0f} at c={c}")
    return bisect(lambda u: _f1(u) - rhs, lo, 0.0, xtol=1e-12 * max(1.0, -lo))


def _gap_sign(model: Model, y2: float, c: float) -> float:
    # tangent-line gap at the inner contact point, up to the factor 1/(2 sqrt(2 lam))
    u = _inner_u(model, y2, c)
    return _sys_u(model, u, y2, c)[1]


def _stage1(model: Model, c: float):
    y2 = bisect(lambda y: _gap_sign(model, y, c), 1.0 + 1e-12, E2 - 1e-12, xtol=1e-12)
    return _inner_u(model, y2, c), y2


def _newton(model: Model, c: float, u: float, y2: float):
    F1, F2 = _sys_u(model, u, y2, c)
    norm = max(abs(F1), abs(F2))
    for _ in range(NEWTON_MAXITER):
        a11, a12, a21, a22 = _jac_u(model, u, y2, c)
        det = a11 * a22 - a12 * a21
        du = -(F1 * a22 - a12 * F2) / det
        dy = -(a11 * F2 - a21 * F1) / det
        step = 1.0
        while True:
            un, yn = u + step * du, y2 + step * dy
            if un < 0.0 and 1.0 < yn < E2:
                G1, G2 = _sys_u(model, un, yn, c)
                new_norm = max(abs(G1), abs(G2))
                if new_norm <= norm or step < 1e-6:
                    break
            step *= 0.5
            if step < 1e-12:
                return u, y2
        converged = abs(un - u) <= 4e-16 * max(1.0, abs(u)) and abs(yn - y2) <= 4e-16 * yn
        u, y2, F1, F2, norm = un, yn, G1, G2, new_norm
        if converged or norm == 0.0:
            break
    return u, y2


def solve_pair(model: Model, c: float, margin: float = SNAP, polish: bool = True) -> YPair:
    """Double-tangent points for ``c`` in (c_o, c_hat).

    Stage 1 is a nested bisection: an inner slope match on the convex piece of
    ``H`` and an outer bisection on the sign of the tangent-line gap, which
    decreases in ``y2``.  With ``polish`` the result is refined by Newton
    steps on (F1, F2) using the explicit Jacobian.
    """
    if not model.c_o + margin <= c <= model.c_hat - margin:
        raise ModelError(
            f"two-boundary regime needs c in (c_o, c_hat) with margin {margin}, got {c}")
    u, y2 = _stage1(model, c)
    if polish:
        u, y2 = _newton(model, c, u, y2)
    log_y1 = u - 2.0
    if log_y1 < UNDERFLOW_T:
        warnings.warn(f"y1 = e^{log_y1:.1f} at c={c}; too close to c_o", UnderflowWarning,
                      stacklevel=2)
    F1, F2 = _residuals_log(model, log_y1, y2, c)
    return YPair(c=c, y1=math.exp(log_y1), y2=y2, residual_norm=max(abs(F1), abs(F2)),
                 log_y1=log_y1)


@lru_cache(maxsize=None)
def chat_limit_y2() -> float:
    """Limit of y2 as c increases to c_hat.

    With ``v = e sqrt(y2)`` the limiting tangency reads
    ``v^2 (2 - ln v) - ln v - 2 v = 0``; the relevant root lies in (e, e^2).
    The limit does not depend on the model.
    """
    v = bisect(lambda v: v * v * (2.0 - math.log(v)) - math.log(v) - 2.0 * v,
               math.e, E2, xtol=1e-14)
    return (v / math.e) ** 2


# -- derivatives ---------------------------------------------------------------

def _pair_derivatives(model: Model, u: float, y2: float, c: float):
    """(dy1/dc, dy2/dc) from the implicit function theorem on (F1, F2)."""
    dR = model.dR(c)
    gap = model.r_gap(c)
    y1 = math.exp(u - 2.0)
    F1c = dR * (_f1(u) - _g(y2))
    F2c = dR * (_f(u) - _f2(y2))
    a11, _, a21, _ = _jac_u(model, u, y2, c)
    dg, df2 = _dg(y2), _df2(y2)
    red = a11 * df2 - dg * a21  # determinant with the factor R(c_hat)-R(c) removed
    du = (-F1c * df2 + dg * F2c) / red
    dy2 = (-a11 * F2c + a21 * F1c) / (gap * red)
    return y1 * du, dy2


def _single_derivative(model: Model, y2: float, c: float) -> float:
    gap = model.r_gap(c)
    return (-8.0 * E_M1 * model.r_hat * model.dR(c) / (gap * gap)
            * math.sqrt(y2) / math.log(y2))


def boundary_derivatives(model: Model, c: float):
    """(dy1/dc or None, dy2/dc) inside one regime interval."""
    if 0.0 <= c < model.c_o:
        return None, _single_derivative(model, solve_single(model, c).y2, c)
    if model.c_o < c < model.c_hat:
        p = solve_pair(model, c, margin=0.0)
        return _pair_derivatives(model, p.log_y1 + 2.0, p.y2, c)
    raise ModelError(f"boundary derivatives need c in [0, c_o) or (c_o, c_hat), got {c}")


# -- per-level boundary record and the table -------------------------------------

@dataclass(frozen=True)
class BoundaryPoint:
    """Everything the value function needs about the boundaries at one ``c``.

    ``gamma_hat``/``beta_hat`` are extended reals.  ``y1``/``dy1`` are ``None``
    when there is no lower boundary in the transformed problem, and
    ``y2``/``dy2`` are ``None`` for ``c >= c_hat``.
    """

    c: float
    regime: Regime
    gamma_hat: float
    beta_hat: float
    y1: Optional[float]
    y2: Optional[float]
    dy1: Optional[float]
    dy2: Optional[float]
    log_y1: Optional[float] = None


def _point(model: Model, c: float) -> BoundaryPoint:
    if not 0.0 <= c <= 1.0:
        raise ModelError(f"c must lie in [0, 1], got {c}")
    two_s = 2.0 * model.sqrt2lam
    if c >= model.c_hat:
        return BoundaryPoint(c, Regime.CONSTANT_LOWER, model.gamma_o, math.inf,
                             None, None, None, None)
    if c >= model.c_hat - SNAP:
        # limits: y1 -> e^-2 with vanishing slope, y2 -> model-free limit
        y2 = chat_limit_y2()
        return BoundaryPoint(c, Regime.TWO_SIDED, model.gamma_o, math.log(y2) / two_s,
                             E_M2, y2, 0.0, 0.0, log_y1=-2.0)
    if c <= model.c_o + SNAP:
        cc = min(c, model.c_o)
        y2 = solve_single(model, cc).y2
        dy2 = _single_derivative(model, y2, cc)
        return BoundaryPoint(c, Regime.SINGLE_UPPER, -math.inf, math.log(y2) / two_s,
                             None, y2, None, dy2)
    p = solve_pair(model, c)
    dy1, dy2 = _pair_derivatives(model, p.log_y1 + 2.0, p.y2, c)
    return BoundaryPoint(c, Regime.TWO_SIDED, p.log_y1 / two_s, math.log(p.y2) / two_s,
                         p.y1, p.y2, dy1, dy2, log_y1=p.log_y1)


@dataclass
class BoundaryTable:
    """Boundaries tabulated on a c-grid, plus exact evaluation off the grid.

    Row arrays use ``-inf``/``+inf`` sentinels for absent boundaries and
    ``nan`` for absent transformed points.  :meth:`point` solves at any ``c``
    (memoised), so consumers never interpolate.
    """

    model: Model
    c_grid: np.ndarray
    gamma_hat: np.ndarray
    beta_hat: np.ndarray
    regime: list
    y1: np.ndarray
    y2: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def point(self, c: float) -> BoundaryPoint:
        c = float(c)
        bp = self._cache.get(c)
        if bp is None:
            bp = self._cache[c] = _point(self.model, c)
        return bp

    def gamma_hat_at(self, c: float) -> float:
        return self.point(c).gamma_hat

    def beta_hat_at(self, c: float) -> float:
        return self.point(c).beta_hat

    def __len__(self) -> int:
        return len(self.c_grid)


def _row(args):
    model, c = args
    return _point(model, c)


def build_table(model: Model, c_grid: Sequence[float], workers: int = 1) -> BoundaryTable:
    """Solve the boundaries on every grid level.

    Rows are independent; ``workers > 1`` farms them out to processes and the
    output is identical to the serial build.
    """
    grid = np.asarray(c_grid, dtype=float)
    if grid.ndim != 1:
        raise ModelError("c_grid must be one-dimensional")
    if np.any(np.diff(grid) < 0) or (grid.size and (grid[0] < 0.0 or grid[-1] > 1.0)):
        raise ModelError("c_grid must be sorted within [0, 1]")
    if workers > 1 and grid.size > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            points = list(ex.map(_row, [(model, float(c)) for c in grid], chunksize=8))
    else:
        points = [_point(model, float(c)) for c in grid]
    table = BoundaryTable(
        model=model,
        c_grid=grid,
        gamma_hat=np.array([p.gamma_hat for p in points]),
        beta_hat=np.array([p.beta_hat for p in points]),
        regime=[p.regime for p in points],
        y1=np.array([np.nan if p.y1 is None else p.y1 for p in points]),
        y2=np.array([np.nan if p.y2 is None else p.y2 for p in points]),
    )
    table._cache.update({p.c: p for p in points})
    return table
