#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the two hot paths -- the block-tridiagonal factor/solve behind the
batch estimator and the proximal gradient fit loop -- under both
implementations and prints the speedup.  Run from an installed tree:

    python benchmarks/bench_kernels.py [--repeat 5] [--fit-iters 2000]
"""

import argparse
import time

import numpy as np

from batchstate import _kernels
from batchstate._kernels import _pure
from batchstate.estimator import NormalSystem
from batchstate.model import NoiseSpec, example2_model, example2_x1, simulate
from batchstate.nonlinear import HenonParams, henon_simulate

try:
    from batchstate._kernels import _core
except ImportError:
    _core = None


def _best_of(repeat, fn, *args):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_block_solver(repeat):
    model = example2_model()
    N = 100
    normal = NormalSystem(model, rho=1.0, N=N)
    diag, low = normal.diag_blocks, normal.low_blocks
    _, ms = simulate(model, example2_x1(), NoiseSpec(0.1, 1.0, 42), N)
    rhs = ms.y[:, None] * model.C[None, :]

    def run(mod):
        Ld, Ll, _, fail = mod.bt_factor(diag, low)
        assert fail == -1
        for _ in range(100):
            mod.bt_solve(Ld, Ll, rhs)

    rows = []
    rows.append(("block factor + 100 solves", "pure", _best_of(repeat, run, _pure)))
    if _core is not None:
        rows.append(("block factor + 100 solves", "compiled", _best_of(repeat, run, _core)))
    return rows


def bench_fit(repeat, iters):
    params = HenonParams()
    _, y = henon_simulate(params, (0.1, 0.1), 0.5, 100, seed=3)
    rng = np.random.default_rng(0)
    yhat0 = y.copy()
    theta0 = 0.01 * rng.standard_normal((100, 6))

    def run(mod):
        mod.henon_fit(y, yhat0, theta0, 0.1, 0.001, 0.05, iters, 1e-9, 50,
                      1e6, True)

    rows = []
    rows.append((f"proximal fit, {iters} iters", "pure", _best_of(repeat, run, _pure)))
    if _core is not None:
        rows.append((f"proximal fit, {iters} iters", "compiled",
                     _best_of(repeat, run, _core)))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3, help="best-of repetitions")
    ap.add_argument("--fit-iters", type=int, default=2000,
                    help="fit iterations per benchmark run")
    args = ap.parse_args()

    print(f"active kernels: {'compiled' if _kernels.USING_COMPILED else 'pure'}"
          f" (compiled available: {_core is not None})")
    rows = bench_block_solver(args.repeat) + bench_fit(args.repeat, args.fit_iters)

    print(f"\n{'benchmark':<32} {'impl':<10} {'best time':>12}")
    print("-" * 58)
    by_name = {}
    for name, impl, t in rows:
        print(f"{name:<32} {impl:<10} {t * 1e3:>10.2f} ms")
        by_name.setdefault(name, {})[impl] = t
    print()
    for name, impls in by_name.items():
        if "compiled" in impls and "pure" in impls:
            print(f"{name}: compiled is {impls['pure'] / impls['compiled']:.1f}x faster")


if __name__ == "__main__":
    main()
