"""Numba vs numpy/scipy backends on the hot paths.

    python benchmarks/bench_kernels.py [--users 20000] [--items 8000] [--density 0.002]

Times the CSR row gather (one item-graph product), masked top-N selection
and a short power-method run under each backend, and checks that both
produce the same numbers.
"""

import argparse
import time

import numpy as np

from gfcf import _kernels
from gfcf.sparse import item_graph, normalize
from gfcf.spectral import GpmConfig, generalized_power_method
from gfcf.synthetic import random_interactions


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--users", type=int, default=20000)
    ap.add_argument("--items", type=int, default=8000)
    ap.add_argument("--density", type=float, default=0.002)
    ap.add_argument("--block", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    m = random_interactions(args.users, args.items, args.density, seed=0)
    g = normalize(m)
    op = item_graph(g)
    X = np.random.default_rng(0).standard_normal((args.items, args.block))
    S = np.random.default_rng(1).standard_normal((2048, args.items))
    users = np.arange(2048) % args.users
    seen_ptr, seen_idx = m.seen_csr(users)
    print(f"graph: {m.n_users} users x {m.n_items} items, nnz={m.nnz}; block={args.block}")

    results = {}
    for name in sorted(_kernels.BACKENDS):
        _kernels.set_backend(name)
        op.matmat(X[:, :2])  # compile outside the timed region
        _kernels.masked_topn(S[:2], seen_ptr[:3], seen_idx, 20)
        t_g, PX = best_of(lambda: op.matmat(X), args.repeat)
        t_t, top = best_of(lambda: _kernels.masked_topn(S, seen_ptr, seen_idx, 20), args.repeat)
        t_p, basis = best_of(lambda: generalized_power_method(op, GpmConfig(k=32, max_iterations=20)), 1)
        results[name] = (PX, top, basis)
        print(f"{name:>6}: gather {t_g * 1e3:8.1f} ms   top-20 {t_t * 1e3:8.1f} ms   power method (20 it) {t_p:6.2f} s")

    if len(results) == 2:
        (a, ta, ba), (b, tb, bb) = results["numba"], results["numpy"]
        print(f"max |gather diff| = {np.max(np.abs(a - b)):.2e}")
        print(f"top-20 ids identical: {np.array_equal(ta[0], tb[0])}")
        print(f"max |eigenvalue diff| = {np.max(np.abs(ba.values - bb.values)):.2e}")


if __name__ == "__main__":
    main()
