"""Monte Carlo evaluation of the optimal control and of comparison policies.

The price is a Brownian motion started at ``x`` on an Euler grid of step
``dt`` up to a truncation horizon ``T``.  Every policy in one call to
:func:`mc_compare` sees the same paths, so cost differences are estimated
with common random numbers.  Paths come in antithetic pairs; the reported
standard error is the path-level sample deviation over ``sqrt(n_paths)``,
which overstates the error of the pair-averaged mean.

Barrier policies (the optimal control, ReflectAtBeta and the hitting-time
checks) run inside the path kernel; open-loop policies are exact functions
of ``sum_i disc_i X_i dt`` and of the terminal discounted price, which the
kernel reports for every path.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .boundaries import BoundaryTable
from .model import Model, ModelError

__all__ = [
    "Policy",
    "OPTIMAL",
    "NO_ACTION",
    "FULL_FILL_NOW",
    "JUMP_TO_CHAT",
    "REFLECT_AT_BETA",
    "McConfig",
    "PathOutcome",
    "McEstimate",
    "LaplaceCheck",
    "apply_optimal_policy",
    "closed_form_cost",
    "mc_cost",
    "mc_compare",
    "laplace_check",
    "run_kernel",
]

TRUNCATION_BUDGET = 1e-6
MAX_DT = 1e-2
INF = math.inf


@dataclass(frozen=True)
class Policy:
    """A control policy; ``delta`` is used by ``Delta`` only."""

    kind: str
    delta: Optional[float] = None

    KINDS = ("Optimal", "NoAction", "FullFillNow", "Delta", "JumpToChatThenNothing",
             "ReflectAtBeta")
    _ALIASES = {"optimal": "Optimal", "none": "NoAction", "noaction": "NoAction",
                "fill": "FullFillNow", "fullfillnow": "FullFillNow",
                "jump-chat": "JumpToChatThenNothing", "jumptochatthennothing": "JumpToChatThenNothing",
                "reflect": "ReflectAtBeta", "reflectatbeta": "ReflectAtBeta"}

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ModelError(f"unknown policy {self.kind!r}")
        if (self.kind == "Delta") != (self.delta is not None):
            raise ModelError("delta is required for Delta and only for Delta")
        if self.delta is not None and not self.delta >= 0.0:
            raise ModelError(f"delta must be nonnegative, got {self.delta}")

    @classmethod
    def parse(cls, text: str) -> "Policy":
        """Parse ``optimal``, ``none``, ``fill``, ``jump-chat``, ``reflect`` or ``delta:0.1``."""
        key = text.strip()
        low = key.lower()
        if low.startswith("delta"):
            _, _, num = key.partition(":")
            if not num:
                _, _, num = key.partition("(")
                num = num.rstrip(")")
            try:
                return cls("Delta", float(num))
            except ValueError:
                raise ModelError(f"cannot parse policy {text!r}") from None
        if low in cls._ALIASES:
            return cls(cls._ALIASES[low])
        if key in cls.KINDS:
            return cls(key)
        raise ModelError(f"cannot parse policy {text!r}")

    @property
    def label(self) -> str:
        return f"Delta({self.delta!r})" if self.kind == "Delta" else self.kind


OPTIMAL = Policy("Optimal")
NO_ACTION = Policy("NoAction")
FULL_FILL_NOW = Policy("FullFillNow")
JUMP_TO_CHAT = Policy("JumpToChatThenNothing")
REFLECT_AT_BETA = Policy("ReflectAtBeta")


@dataclass(frozen=True)
class McConfig:
    """Simulation settings.

    ``substeps`` draws ``substeps`` fine normals per step of size ``dt``, so
    that runs at different ``dt`` with a common fine grid share their paths.
    ``lam``, when given, lets the horizon budget be checked at construction;
    it is always checked against the model before simulating.
    """

    n_paths: int
    dt: float = 1e-3
    horizon: float = 30.0
    seed: int = 0
    bridge_correction: bool = True
    substeps: int = 1
    workers: int = 1
    lam: Optional[float] = None
    backend: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if not (isinstance(self.n_paths, (int, np.integer)) and self.n_paths >= 2
                and self.n_paths % 2 == 0):
            raise ModelError(f"n_paths must be a positive even integer, got {self.n_paths}")
        if not 0.0 < self.dt <= MAX_DT:
            raise ModelError(f"dt must lie in (0, {MAX_DT}], got {self.dt}")
        if not self.horizon > 0.0:
            raise ModelError(f"horizon must be positive, got {self.horizon}")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ModelError("horizon must be an integer multiple of dt")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ModelError("seed must fit in an unsigned 64-bit integer")
        if int(self.substeps) < 1 or int(self.workers) < 1:
            raise ModelError("substeps and workers must be at least 1")
        if self.lam is not None:
            self.check_horizon(self.lam)

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n_pairs(self) -> int:
        return self.n_paths // 2

    def check_horizon(self, lam: float) -> None:
        if not math.exp(-lam * self.horizon) < TRUNCATION_BUDGET:
            raise ModelError(f"exp(-lam T) = {math.exp(-lam * self.horizon):.3g} is not below "
                             f"{TRUNCATION_BUDGET}; increase the horizon")


@dataclass(frozen=True)
class PathOutcome:
    cost: float
    tau_hit: Optional[float]
    hit_side: str  # "Lower", "Upper" or "None"
    jump_events: list
    truncated: bool = False


@dataclass(frozen=True)
class McEstimate:
    """Sample mean and path-level standard error."""

    mean: float
    std_error: float
    n_paths: int
    config: McConfig
    truncated_paths: int = 0
    bias_budget: float = 0.0
    policy: str = ""


# -- single path reference ----------------------------------------------------------

def _optimal_levels(model: Model, table: BoundaryTable, c: float):
    if c >= model.c_hat:
        return model.gamma_o, INF
    bp = table.point(c)
    return bp.gamma_hat, bp.beta_hat


def apply_optimal_policy(model: Model, table: BoundaryTable, x: float, c: float,
                         increments: Sequence[float], dt: float,
                         uniforms: Optional[np.ndarray] = None) -> PathOutcome:
    """Run the optimal control along one discretised price path.

    ``increments`` are the Brownian increments per step.  ``uniforms`` (shape
    ``(n, 2)``, columns lower/upper) switch on the bridge crossing test; the
    same column pair is reused for the second, lower-only stage.
    """
    if not 0.0 <= c <= 1.0:
        raise ModelError(f"c must lie in [0, 1], got {c}")
    dW = np.asarray(increments, dtype=float)
    n = dW.size
    lam = model.lam
    events = []
    if c >= 1.0:
        return PathOutcome(0.0, None, "None", events)
    low, up = _optimal_levels(model, table, c)
    inv = c
    cost = 0.0
    X = float(x)
    tau, side = None, "None"

    def jump(t, price, size):
        nonlocal cost, inv
        events.append((t, size))
        cost += math.exp(-lam * t) * price * size
        inv += size

    def crossed(a, b, u):
        if b <= 0.0:
            return True
        if u is None:
            return False
        e = -2.0 * a * b / dt
        return e > -40.0 and u < math.exp(e)

    stage = 0
    if X <= low:
        jump(0.0, X, 1.0 - inv)
        return PathOutcome(cost, 0.0, "Lower", events)
    if X >= up:
        jump(0.0, X, model.c_hat - inv)
        tau, side, stage = 0.0, "Upper", 1
        low, up = model.gamma_o, INF
    for i in range(n):
        t_next = (i + 1) * dt
        cost += math.exp(-lam * i * dt) * lam * X * model.phi(inv)[0] * dt
        Xn = X + dW[i]
        ul = uw = None
        if uniforms is not None:
            ul, uw = uniforms[i]
        if stage == 0:
            if Xn <= low or (Xn < up and crossed(X - low, Xn - low, ul)):
                jump(t_next, low, 1.0 - inv)
                return PathOutcome(cost, t_next, "Lower", events)
            if Xn >= up or crossed(up - X, up - Xn, uw):
                jump(t_next, up, model.c_hat - inv)
                tau, side, stage = t_next, "Upper", 1
                low, up = model.gamma_o, INF
        elif crossed(X - low, Xn - low, ul):
            jump(t_next, low, 1.0 - inv)
            return PathOutcome(cost, tau, side, events)
        X = Xn
    fill = 1.0 - inv
    if fill > 0.0:
        cost += math.exp(-lam * n * dt) * X * fill
        events.append((n * dt, fill))
    return PathOutcome(cost, tau, side, events, truncated=fill > 0.0)


# -- closed forms ------------------------------------------------------------------

def closed_form_cost(model: Model, policy: Policy, x: float, c: float) -> float:
    """Exact expected cost of the open-loop policies with an infinite horizon."""
    if not 0.0 <= c <= 1.0:
        raise ModelError(f"c must lie in [0, 1], got {c}")
    if policy.kind == "NoAction":
        return x * model.phi(c)[0]
    if policy.kind == "FullFillNow":
        return x * (1.0 - c)
    if policy.kind == "Delta":
        d = policy.delta
        if c + d > 1.0 + 1e-15:
            raise ModelError(f"c + delta = {c + d} exceeds 1")
        return x * (d + model.phi(min(c + d, 1.0))[0])
    if policy.kind == "JumpToChatThenNothing":
        d = max(model.c_hat - c, 0.0)
        return x * (d + model.phi(c + d)[0])
    raise ModelError(f"no closed form for {policy.label}")


# -- kernel driver -----------------------------------------------------------------------

@dataclass
class KernelRun:
    cost: np.ndarray
    side: np.ndarray
    k_event: np.ndarray
    exit_disc: np.ndarray
    truncated: np.ndarray
    acc_total: np.ndarray
    tail: np.ndarray


def run_kernel(lam: float, x: float, params: np.ndarray, cfg: McConfig, need_full: bool = True,
               backend: Optional[str] = None) -> KernelRun:
    """Simulate all pairs, split into ``cfg.workers`` contiguous chunks.

    Each pair has its own random stream, so the output does not depend on
    the chunking.
    """
    kern = _backend.kernel(backend or cfg.backend)
    n = cfg.n_steps
    disc = np.exp(-lam * cfg.dt * np.arange(n + 1))
    params = np.ascontiguousarray(np.atleast_2d(params), dtype=float)
    npol = params.shape[0]
    P = cfg.n_pairs
    out = KernelRun(
        cost=np.zeros((P, 2, npol)),
        side=np.zeros((P, 2, npol), dtype=np.int8),
        k_event=np.zeros((P, 2, npol), dtype=np.int64),
        exit_disc=np.zeros((P, 2, npol)),
        truncated=np.zeros((P, 2, npol), dtype=np.int8),
        acc_total=np.zeros((P, 2)),
        tail=np.zeros((P, 2)),
    )

    def work(lo, hi):
        kern.simulate_pairs(float(x), disc, float(lam), float(cfg.dt), int(cfg.substeps),
                            int(cfg.seed), lo, hi, bool(cfg.bridge_correction), params,
                            bool(need_full), out.cost[lo:hi], out.side[lo:hi],
                            out.k_event[lo:hi], out.exit_disc[lo:hi], out.truncated[lo:hi],
                            out.acc_total[lo:hi], out.tail[lo:hi])

    workers = min(int(cfg.workers), P)
    if workers <= 1:
        work(0, P)
    else:
        bounds = np.linspace(0, P, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(work, bounds[:-1], bounds[1:]))
    return out


def _barrier_row(model: Model, table: BoundaryTable, policy: Policy, c: float):
    ph = model.phi(c)[0]
    ph_hat = model.phi(model.c_hat)[0]
    row = [-INF, INF, -INF, ph, 0.0, 0.0, 0.0, 0.0, 1.0 - c, 0.0, 0.0]
    if policy.kind == "Optimal":
        low, up = _optimal_levels(model, table, c)
        row[0], row[1], row[5] = low, up, 1.0 - c
        if math.isfinite(up):
            row[2], row[4], row[6], row[7], row[9] = (model.gamma_o, ph_hat, model.c_hat - c,
                                                      1.0 - model.c_hat, 1.0 - model.c_hat)
    elif policy.kind == "ReflectAtBeta":
        if c >= model.c_hat:
            raise ModelError("ReflectAtBeta needs c < c_hat")
        # pushing X below beta_hat(C) with beta_hat decreasing lands at C = c_hat at once
        row[1] = table.point(c).beta_hat
        row[4], row[6], row[9] = ph_hat, model.c_hat - c, 1.0 - model.c_hat
    else:
        raise ModelError(f"{policy.label} is not a barrier policy")
    return row


def _open_loop_delta(model: Model, policy: Policy, c: float) -> float:
    if policy.kind == "NoAction":
        return 0.0
    if policy.kind == "Delta":
        if c + policy.delta > 1.0 + 1e-15:
            raise ModelError(f"c + delta = {c + policy.delta} exceeds 1")
        return min(policy.delta, 1.0 - c)
    return max(model.c_hat - c, 0.0)


def _estimate(values: np.ndarray, cfg: McConfig, truncated: int, budget: float, label: str):
    # path-level standard error; with antithetic pairs this is conservative
    flat = np.ascontiguousarray(values).reshape(-1)
    n = flat.size
    se = float(np.std(flat, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(mean=float(np.mean(flat)), std_error=se, n_paths=n, config=cfg,
                      truncated_paths=int(truncated), bias_budget=budget, policy=label)


def _truncation_budget(lam: float, x: float, cfg: McConfig) -> float:
    # the forced fill moves at most one unit at price X_T
    return math.exp(-lam * cfg.horizon) * (abs(x) + math.sqrt(cfg.horizon))


def mc_compare(model: Model, table: BoundaryTable, x: float, c: float,
               policies: Sequence[Policy], cfg: McConfig) -> dict:
    """Estimate several policies on one common set of paths.

    Returns ``{policy.label: McEstimate}``.
    """
    if not 0.0 <= c <= 1.0:
        raise ModelError(f"c must lie in [0, 1], got {c}")
    cfg.check_horizon(model.lam)
    barrier = [p for p in policies if p.kind in ("Optimal", "ReflectAtBeta")]
    open_loop = [p for p in policies if p.kind in ("NoAction", "Delta", "JumpToChatThenNothing")]
    params = (np.array([_barrier_row(model, table, p, c) for p in barrier])
              if barrier else np.zeros((0, 11)))
    deltas = {p: _open_loop_delta(model, p, c) for p in open_loop}
    budget = _truncation_budget(model.lam, x, cfg)
    results = {}
    run = None
    if barrier or open_loop:
        run = run_kernel(model.lam, x, params, cfg, need_full=bool(open_loop))
    for j, p in enumerate(barrier):
        results[p.label] = _estimate(run.cost[:, :, j], cfg, run.truncated[:, :, j].sum(),
                                     budget, p.label)
    lam_dt = model.lam * cfg.dt
    for p in open_loop:
        d = deltas[p]
        rest = 1.0 - c - d
        vals = x * d + lam_dt * model.phi(c + d)[0] * run.acc_total + run.tail * rest
        results[p.label] = _estimate(vals, cfg, cfg.n_paths if rest > 0.0 else 0, budget, p.label)
    for p in policies:
        if p.kind == "FullFillNow":
            results[p.label] = McEstimate(mean=x * (1.0 - c), std_error=0.0, n_paths=cfg.n_paths,
                                          config=cfg, policy=p.label)
    return results


def mc_cost(model: Model, table: BoundaryTable, x: float, c: float, policy: Policy,
            cfg: McConfig) -> McEstimate:
    return mc_compare(model, table, x, c, [policy], cfg)[policy.label]


# -- hitting-time checks ----------------------------------------------------------------

@dataclass(frozen=True)
class LaplaceCheck:
    """``E[exp(-lam tau)]`` and ``E[exp(-lam tau) X_tau]``: simulated vs exact."""

    mc_discount: float
    se_discount: float
    exact_discount: float
    mc_discounted_price: float
    se_discounted_price: float
    exact_discounted_price: float
    bias_budget: float

    @property
    def agrees(self) -> bool:
        return (abs(self.mc_discount - self.exact_discount) <= 3 * self.se_discount + self.bias_budget
                and abs(self.mc_discounted_price - self.exact_discounted_price)
                <= 3 * self.se_discounted_price + self.bias_budget)


def _exit_laplace(s, x, lower, upper):
    """Exact (E[e^{-lam tau} 1_lower], E[e^{-lam tau} 1_upper])."""
    if lower is None:
        return 0.0, math.exp(s * (x - upper))
    if upper is None:
        return math.exp(-s * (x - lower)), 0.0
    w = math.sinh(s * (upper - lower))
    return math.sinh(s * (upper - x)) / w, math.sinh(s * (x - lower)) / w


def laplace_check(model: Model, x: float, lower: Optional[float], upper: Optional[float],
                  cfg: McConfig) -> LaplaceCheck:
    """Simulated first-exit transforms of ``(lower, upper)`` against closed forms."""
    if lower is None and upper is None:
        raise ModelError("at least one finite level is required")
    if (lower is not None and x < lower) or (upper is not None and x > upper):
        raise ModelError("x must lie between the levels")
    cfg.check_horizon(model.lam)
    lo = -INF if lower is None else float(lower)
    up = INF if upper is None else float(upper)
    row = np.array([[lo, up, -INF, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]])
    run = run_kernel(model.lam, x, row, cfg, need_full=False)
    disc = run.exit_disc[:, :, 0]
    price = np.where(run.side[:, :, 0] == 1, lo, up)
    dprice = np.where(run.side[:, :, 0] == 0, 0.0, disc * price)
    e_disc = _estimate(disc, cfg, 0, 0.0, "discount")
    e_price = _estimate(dprice, cfg, 0, 0.0, "discounted price")
    pl, pu = _exit_laplace(model.sqrt2lam, x, lower, upper)
    exact_price = (pl * lo if lower is not None else 0.0) + (pu * up if upper is not None else 0.0)
    reach = max(abs(lo) if lower is not None else 0.0, abs(up) if upper is not None else 0.0)
    budget = math.exp(-model.lam * cfg.horizon) * (1.0 + reach)
    return LaplaceCheck(e_disc.mean, e_disc.std_error, pl + pu, e_price.mean,
                        e_price.std_error, exact_price, budget)
