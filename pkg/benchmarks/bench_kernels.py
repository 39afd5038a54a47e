"""Time the step kernel on both backends.

    python3 benchmarks/bench_kernels.py [--n-age 40001] [--steps 2000] [--repeat 5]

The numba run is warmed up once so compile time is excluded. The two
backends are also compared on the final profile.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from agechemostat import _accel, kernels
from agechemostat.equilibrium import solve_equilibrium
from agechemostat.model import tothkot_model
from agechemostat.simulator import initial_state, scheme_arrays


def _run(params, init, n_steps):
    arrays = scheme_arrays(params)
    f = np.array(init.f)
    out = np.empty((n_steps, kernels.N_COLS))
    Q_prev = float(arrays.wq @ f)
    kernels.advance(f, init.S, Q_prev, n_steps, arrays.decay, arrays.wk, arrays.wq, arrays.wm,
                    params.da, params.D, params.S_in, arrays.kind, arrays.p1, arrays.p2, out)
    return f, out


def bench(backend: str, params, init, n_steps: int, repeat: int):
    _accel.set_backend(backend)
    _run(params, init, 2)  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        f, out = _run(params, init, n_steps)
        times.append(time.perf_counter() - t0)
    return min(times), f, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-age", type=int, default=40001)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    params = tothkot_model(2.0, 2.0, 1.0, 0.2, 2.0, n_age=args.n_age)
    eq = solve_equilibrium(params)
    init = initial_state(params, 1.5 * eq.f_star0 * eq.r, eq.S_star)
    print(f"grid {params.n_age} ages, {args.steps} steps, best of {args.repeat}")

    results = {}
    backends = ["numpy"] + (["numba"] if _accel.NUMBA_AVAILABLE else [])
    for name in backends:
        best, f, out = bench(name, params, init, args.steps, args.repeat)
        results[name] = (best, f, out)
        rate = args.steps * params.n_age / best / 1e6
        print(f"{name:>6}: {best:8.4f} s  ({rate:7.1f} M cell-steps/s)")
    if len(results) == 2:
        speedup = results["numpy"][0] / results["numba"][0]
        f_gap = np.max(np.abs(results["numpy"][1] - results["numba"][1])) / np.max(results["numpy"][1])
        s_gap = np.max(np.abs(results["numpy"][2][:, kernels.COL_S] - results["numba"][2][:, kernels.COL_S]))
        print(f"speedup {speedup:.2f}x, profile gap {f_gap:.2e} (relative), substrate gap {s_gap:.2e}")
    _accel.set_backend("numba" if _accel.NUMBA_AVAILABLE else "numpy")


if __name__ == "__main__":
    main()
