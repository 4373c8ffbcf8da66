"""Command-line front end: ``storage-ssc <subcommand> [--config FILE] [flags]``.

A JSON config supplies defaults and flat flags override it::

    {"lambda": 0.5, "a": 0.4,
     "grids": {"c_min": 0, "c_max": 1, "n_c": 256, "x_min": -3, "x_max": 3, "n_x": 101},
     "mc": {"n_paths": 100000, "dt": 0.001, "horizon": 30, "seed": 0,
            "bridge_correction": true, "substeps": 1, "workers": 1},
     "output": "out.csv"}

Exit codes: 0 success, 1 failed verification, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .boundaries import build_table
from .model import Model, ModelError, build_model
from .simulate import McConfig, Policy, mc_cost
from .value import minorant_row, value_row
from .verify import report, run_checks

__all__ = ["RunConfig", "ConfigError", "load_config", "run", "main", "fmt"]

_REGION_NAMES = ("Inaction", "ActionLower", "ActionUpper")


class ConfigError(ValueError):
    pass


@dataclass
class Grids:
    c_min: float = 0.0
    c_max: float = 1.0
    n_c: int = 256
    x_min: float = -3.0
    x_max: float = 3.0
    n_x: int = 101


@dataclass
class McFields:
    n_paths: int = 100_000
    dt: float = 1e-3
    horizon: float = 30.0
    seed: int = 0
    bridge_correction: bool = True
    substeps: int = 1
    workers: int = 1


@dataclass
class RunConfig:
    lam: float = 0.5
    a: float = 0.4
    grids: Grids = field(default_factory=Grids)
    mc: McFields = field(default_factory=McFields)
    output: Optional[str] = None
    policy: str = "optimal"
    x: float = 0.0
    c: float = 0.55
    y_min: float = 1e-6
    y_max: float = 100.0
    n_y: int = 2001

    def model(self) -> Model:
        return build_model(self.lam, self.a)

    def mc_config(self) -> McConfig:
        m = self.mc
        return McConfig(n_paths=int(m.n_paths), dt=float(m.dt), horizon=float(m.horizon),
                        seed=int(m.seed), bridge_correction=bool(m.bridge_correction),
                        substeps=int(m.substeps), workers=int(m.workers), lam=self.lam)

    def validate(self) -> None:
        self.model()
        g = self.grids
        if not 0.0 <= g.c_min <= g.c_max <= 1.0:
            raise ConfigError("need 0 <= c_min <= c_max <= 1")
        if g.n_c < 1 or g.n_x < 1 or self.n_y < 2:
            raise ConfigError("grid sizes must be positive")
        if not g.x_min <= g.x_max:
            raise ConfigError("need x_min <= x_max")
        if not 0.0 < self.y_min < self.y_max:
            raise ConfigError("need 0 < y_min < y_max")
        if not 0.0 <= self.c <= 1.0:
            raise ConfigError("c must lie in [0, 1]")


def _merge(dc, data: dict, where: str):
    known = {f.name: f for f in fields(dc)}
    for key, val in data.items():
        name = "lam" if key == "lambda" else key
        if name not in known:
            raise ConfigError(f"unknown config key {where}{key!r}")
        cur = getattr(dc, name)
        if isinstance(cur, (Grids, McFields)):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}{key} must be an object")
            _merge(cur, val, f"{where}{key}.")
        else:
            setattr(dc, name, val)


def load_config(path: Optional[str]) -> RunConfig:
    cfg = RunConfig()
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        _merge(cfg, data, "")
    return cfg


# flag -> (section, field, type)
_FLAGS = {
    "lam": (None, "lam", float), "a": (None, "a", float),
    "c_min": ("grids", "c_min", float), "c_max": ("grids", "c_max", float),
    "n": ("grids", "n_c", int), "x_min": ("grids", "x_min", float),
    "x_max": ("grids", "x_max", float), "n_x": ("grids", "n_x", int),
    "paths": ("mc", "n_paths", int), "dt": ("mc", "dt", float),
    "horizon": ("mc", "horizon", float), "seed": ("mc", "seed", int),
    "substeps": ("mc", "substeps", int), "workers": ("mc", "workers", int),
    "output": (None, "output", str), "policy": (None, "policy", str),
    "x": (None, "x", float), "c": (None, "c", float),
    "y_min": (None, "y_min", float), "y_max": (None, "y_max", float), "n_y": (None, "n_y", int),
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="storage-ssc",
                                description="Free boundaries, value function and Monte Carlo "
                                            "checks for the storage control problem.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--a", type=float)
    common.add_argument("-o", "--output", help="output file (default: stdout)")
    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--c-min", dest="c_min", type=float)
    grid.add_argument("--c-max", dest="c_max", type=float)
    grid.add_argument("--n", type=int, help="number of c levels")
    xgrid = argparse.ArgumentParser(add_help=False)
    xgrid.add_argument("--x-min", dest="x_min", type=float)
    xgrid.add_argument("--x-max", dest="x_max", type=float)
    xgrid.add_argument("--n-x", dest="n_x", type=int)

    sub.add_parser("boundaries", parents=[common, grid], help="boundary table as CSV")
    sub.add_parser("value", parents=[common, grid, xgrid], help="value function grid as CSV")
    sub.add_parser("verify", parents=[common], help="run the invariant suite, JSON report")
    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo cost of one policy")
    sim.add_argument("--policy", help="optimal, none, fill, delta:<d>, jump-chat, reflect")
    sim.add_argument("--x", type=float)
    sim.add_argument("--c", type=float)
    sim.add_argument("--paths", type=int)
    sim.add_argument("--dt", type=float)
    sim.add_argument("--horizon", type=float)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--substeps", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--no-bridge", dest="no_bridge", action="store_true")
    geo = sub.add_parser("geometry", parents=[common], help="obstacle and minorant at one c")
    geo.add_argument("--c", type=float)
    geo.add_argument("--y-min", dest="y_min", type=float)
    geo.add_argument("--y-max", dest="y_max", type=float)
    geo.add_argument("--n-y", dest="n_y", type=int)
    return p


def _apply_flags(cfg: RunConfig, ns: argparse.Namespace) -> None:
    for flag, (section, name, _) in _FLAGS.items():
        val = getattr(ns, flag, None)
        if val is None:
            continue
        target = cfg if section is None else getattr(cfg, section)
        setattr(target, name, val)
    if getattr(ns, "no_bridge", False):
        cfg.mc.bridge_correction = False


def fmt(v) -> str:
    """Shortest round-trip text for a float; ``+inf``/``-inf``; empty for ``None``."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return repr(v)


def _grid(lo, hi, n):
    if n == 1:
        return [float(lo)]
    return [lo + (hi - lo) * (k / (n - 1)) for k in range(n)]


def _write(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_boundaries(cfg: RunConfig) -> int:
    model = cfg.model()
    g = cfg.grids
    table = build_table(model, _grid(g.c_min, g.c_max, g.n_c))
    rows = []
    for i, c in enumerate(table.c_grid):
        p = table.point(c)
        rows.append((float(c), str(p.regime), p.gamma_hat, p.beta_hat, p.y1, p.y2))
    _write(_csv(("c", "regime", "gamma_hat", "beta_hat", "y1", "y2"), rows), cfg.output)
    return 0


def cmd_value(cfg: RunConfig) -> int:
    model = cfg.model()
    g = cfg.grids
    cs = _grid(g.c_min, g.c_max, g.n_c)
    xs = np.array(_grid(g.x_min, g.x_max, g.n_x))
    table = build_table(model, cs)
    rows = []
    for c in cs:
        W, Wx, Wc, _, code = value_row(model, table, xs, c)
        rows += [(x, c, W[i], Wx[i], Wc[i], _REGION_NAMES[code[i]]) for i, x in enumerate(xs)]
    _write(_csv(("x", "c", "W", "W_x", "W_c", "region"), rows), cfg.output)
    return 0


def _json_float(v):
    return float(v) if math.isfinite(v) else fmt(v)


def cmd_verify(cfg: RunConfig) -> int:
    checks = run_checks(cfg.model())
    rep = report(checks)
    for c in rep["checks"]:
        c["max_violation"] = _json_float(c["max_violation"])
        c["tolerance"] = _json_float(c["tolerance"])
    _write(json.dumps(rep, indent=2) + "\n", cfg.output)
    return 0 if rep["summary"]["all_passed"] else 1


def cmd_simulate(cfg: RunConfig) -> int:
    model = cfg.model()
    mc = cfg.mc_config()
    policy = Policy.parse(cfg.policy)
    table = build_table(model, [cfg.c] if cfg.c < model.c_hat else [])
    est = mc_cost(model, table, cfg.x, cfg.c, policy, mc)
    out = {"policy": policy.label, "x": cfg.x, "c": cfg.c, "mean": est.mean,
           "std_error": est.std_error, "n_paths": est.n_paths, "dt": mc.dt,
           "horizon": mc.horizon, "seed": mc.seed, "truncated_paths": est.truncated_paths}
    _write(json.dumps(out, indent=2) + "\n", cfg.output)
    return 0


def cmd_geometry(cfg: RunConfig) -> int:
    model = cfg.model()
    if not cfg.c < model.c_hat:
        raise ConfigError(f"geometry needs c < c_hat = {model.c_hat}")
    table = build_table(model, [cfg.c])
    ys = np.logspace(math.log10(cfg.y_min), math.log10(cfg.y_max), cfg.n_y)
    H, Q = minorant_row(model, table, ys, cfg.c)
    _write(_csv(("y", "H", "Q"), zip(ys, H, Q)), cfg.output)
    return 0


_COMMANDS = {"boundaries": cmd_boundaries, "value": cmd_value, "verify": cmd_verify,
             "simulate": cmd_simulate, "geometry": cmd_geometry}


def run(argv=None) -> int:
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        cfg = load_config(ns.config)
        _apply_flags(cfg, ns)
        cfg.validate()
        return _COMMANDS[ns.command](cfg)
    except (ConfigError, ModelError, TypeError, ValueError) as exc:
        print(f"storage-ssc: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
