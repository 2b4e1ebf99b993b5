"""Time the numba kernels against their numpy twins and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--nodes 2000]

The numba timings exclude the first (compiling) call.
"""

import argparse
import time

import numpy as np

from profilecast import kernels
from profilecast._accel import HAVE_NUMBA


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_cases(rng, nodes):
    cases = {}

    mats = [rng.random((28, 10)) for _ in range(50)]

    def svd_case(f):
        return lambda: [f(m, kernels.JACOBI_TOL, kernels.JACOBI_MAX_SWEEPS) for m in mats]

    cases["jacobi_svd x50 (28x10)"] = (svd_case(kernels.jacobi_svd_nb), svd_case(kernels.jacobi_svd_np),
                                       lambda a, b: max(np.abs(x[1] - y[1]).max() for x, y in zip(a, b)))

    k, L = 3, 10
    vecs = rng.standard_normal((nodes, k, L))
    vecs /= np.linalg.norm(vecs, axis=2, keepdims=True)
    w = rng.random((nodes, k))
    w /= w.sum(axis=1, keepdims=True)
    tv, tw = vecs[0].copy(), w[0].copy()
    cases[f"similarity_to_target ({nodes} nodes)"] = (
        lambda: kernels.similarity_to_target_nb(vecs, w, tv, tw),
        lambda: kernels.similarity_to_target_np(vecs, w, tv, tw),
        lambda a, b: np.abs(a - b).max(),
    )

    n = 20 * nodes
    starts = np.sort(rng.integers(0, 28 * 86400, n)).astype(np.int64)
    ends = starts + rng.integers(60, 7200, n)
    who = rng.integers(0, nodes, n).astype(np.int64)
    cases[f"overlap_pairs ({n} intervals)"] = (
        lambda: kernels.overlap_pairs_nb(who, starts, ends),
        lambda: kernels.overlap_pairs_np(who, starts, ends),
        lambda a, b: float(not all(np.array_equal(x, y) for x, y in zip(a, b))),
    )

    locs = rng.integers(0, 10, n).astype(np.int64)

    def acc(f):
        def go():
            out = np.zeros((400, 10))
            f(locs, starts, ends, 86400, out)
            return out
        return go

    cases[f"accumulate_association ({n} records)"] = (acc(kernels.accumulate_association_nb),
                                                      acc(kernels.accumulate_association_np),
                                                      lambda a, b: np.abs(a - b).max())
    return cases


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--nodes", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if not HAVE_NUMBA:
        print("numba unavailable or disabled; the numba column runs as plain Python")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':42s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, (f_nb, f_np, diff) in make_cases(rng, args.nodes).items():
        a = f_nb()  # compile
        b = f_np()
        t_nb = best_of(f_nb, args.repeat)
        t_np = best_of(f_np, args.repeat)
        print(f"{name:42s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f} {diff(a, b):10.2e}")


if __name__ == "__main__":
    main()
