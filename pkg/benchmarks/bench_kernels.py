"""Compare the compiled and pure-numpy kernel backends on the two hot loops.

Run as ``python3 benchmarks/bench_kernels.py``.  Both backends are imported
directly (bypassing the selection in dyngem.kernels), timed on identical
inputs, and checked to agree before any number is reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dyngem import _kernels_py

try:
    from dyngem import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_gf_epoch(backend, n, edges, d, repeats, seed=0):
    rng = np.random.default_rng(seed)
    heads = rng.integers(0, n, edges).astype(np.intp)
    tails = ((heads + 1 + rng.integers(0, n - 1, edges)) % n).astype(np.intp)
    weights = rng.uniform(0.5, 2.0, edges)
    order = rng.permutation(edges).astype(np.intp)
    y0 = np.ascontiguousarray(rng.uniform(-0.1, 0.1, (n, d)))

    def run():
        y = y0.copy()
        backend.gf_epoch(y, heads, tails, weights, order, 0.01, 0.1)
        return y

    return _time(run, repeats), run()


def bench_jacobi(backend, d, repeats, seed=0):
    m = np.random.default_rng(seed).standard_normal((d, d))

    def run():
        g = np.ascontiguousarray(m.copy())
        v = np.eye(d)
        sweeps = backend.jacobi_sweeps(g, v, 1e-12, 100)
        assert sweeps >= 0
        return g

    return _time(run, repeats), run()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, default=2000)
    parser.add_argument("--edges", type=int, default=40000)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--svd-dim", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _kernels is None:
        raise SystemExit("compiled extension not built; nothing to compare against")

    rows = []
    for label, params in (
        (f"gf_epoch n={args.nodes} m={args.edges} d={args.dim}",
         lambda b: bench_gf_epoch(b, args.nodes, args.edges, args.dim, args.repeats)),
        (f"jacobi_sweeps d={args.svd_dim}",
         lambda b: bench_jacobi(b, args.svd_dim, args.repeats)),
    ):
        t_c, out_c = params(_kernels)
        t_p, out_p = params(_kernels_py)
        worst = float(np.max(np.abs(out_c - out_p)))
        if worst > 1e-8:
            raise SystemExit(f"{label}: backends disagree by {worst:.2e}")
        rows.append((label, t_c, t_p))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'compiled':>10}  {'pure':>10}  {'speedup':>8}")
    for label, t_c, t_p in rows:
        print(f"{label:<{width}}  {t_c * 1e3:>8.2f}ms  {t_p * 1e3:>8.2f}ms  {t_p / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
