"""Time the compiled path kernel against the numpy fallback.

    python3 benchmarks/bench_mc.py [--paths 2000] [--dt 1e-3] [--repeat 3]

Both backends run the same optimal and reflecting policies on identical
paths; the script checks that the outputs agree bit for bit.
"""
import argparse
import time

import numpy as np

from storage_ssc import _backend, build_model
from storage_ssc.boundaries import build_table
from storage_ssc.simulate import OPTIMAL, REFLECT_AT_BETA, McConfig, _barrier_row, run_kernel


def bench(backend, model, params, cfg, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = run_kernel(model.lam, 0.0, params, cfg, need_full=True, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    model = build_model(0.5, 0.4)
    table = build_table(model, [])
    params = np.array([_barrier_row(model, table, p, 0.55) for p in (OPTIMAL, REFLECT_AT_BETA)])
    cfg = McConfig(args.paths, dt=args.dt, horizon=30.0, seed=1)
    steps = cfg.n_paths * cfg.n_steps
    times = {}
    outs = {}
    for name in _backend.available():
        times[name], outs[name] = bench(name, model, params, cfg, args.repeat)
        print(f"{name:>9}: {times[name]:8.3f} s   {times[name] / steps * 1e9:7.2f} ns/path-step")
    if len(outs) == 2:
        same = all(np.array_equal(getattr(outs["compiled"], f), getattr(outs["python"], f))
                   for f in ("cost", "side", "k_event", "exit_disc", "truncated"))
        print(f"speedup: {times['python'] / times['compiled']:.1f}x   identical output: {same}")
    else:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
