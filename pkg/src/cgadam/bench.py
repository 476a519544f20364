"""Backend benchmark: numba kernels vs the pure-numpy fallback.

Usage: python -m cgadam.bench [--iters N] [--dim D]
"""

import argparse
import time

import numpy as np

from . import kernels
from .optimizer import HyperParams, OptimizerState, step
from .problems import quadratic


def _run(backend_name: str, iters: int, dim: int) -> float:
    previous = kernels.set_backend(backend_name)
    try:
        kernels.warmup()
        oracle = quadratic(dim, condition=100.0)
        hp = HyperParams(alpha0=1e-2, method="fr")
        rng = np.random.default_rng(0)
        state = OptimizerState.fresh(rng.standard_normal(dim))
        start = time.perf_counter()
        for _ in range(iters):
            step(state, oracle.grad(state.x), hp)
        return time.perf_counter() - start
    finally:
        kernels.ACTIVE = previous


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iters", type=int, default=100_000)
    parser.add_argument("--dim", type=int, default=20)
    args = parser.parse_args(argv)

    results = {}
    for name in ("numpy", "numba"):
        try:
            elapsed = _run(name, args.iters, args.dim)
        except ValueError as exc:
            print(f"{name}: unavailable ({exc})")
            continue
        results[name] = elapsed
        print(f"{name:6s} {elapsed:8.3f} s "
              f"({args.iters / elapsed:,.0f} steps/s)")
    if len(results) == 2:
        print(f"speedup numba/numpy: "
              f"{results['numpy'] / results['numba']:.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
