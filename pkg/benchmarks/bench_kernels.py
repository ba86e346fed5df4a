"""Time the hot kernels on the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--n 500] [--repeat 3]

Each kernel is warmed up once (so numba compile time is excluded), then
timed ``repeat`` times; the best time is reported with the numpy/numba
speedup and the largest disagreement between the two backends.
"""

import argparse
import time

import numpy as np

from adapsne import _accel
from adapsne.affinity import conditional_matrix, pairwise_sq_dists, symmetrize
from adapsne.embedding import EmbedConfig, embed, kl_gradient
from adapsne.fwa import FwaConfig, solve_all_bandwidths
from adapsne.grid import fit_grid, histogram


def blobs(n, d=10, seed=0):
    rng = np.random.default_rng(seed)
    centres = rng.normal(scale=5.0, size=(3, d))
    return centres[rng.integers(3, size=n)] + rng.normal(size=(n, d))


def best_of(fn, repeat):
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    x = blobs(args.n)
    d2 = pairwise_sq_dists(x)
    bw = solve_all_bandwidths(d2, 30.0, FwaConfig())
    p = symmetrize(conditional_matrix(d2, bw.sigma))
    y = np.random.default_rng(1).normal(size=(args.n, 2))
    y_emb = embed(p, EmbedConfig(iterations=100)).coords

    cases = {
        "fwa bandwidths": (lambda: solve_all_bandwidths(d2, 30.0, FwaConfig()).sigma, "rel"),
        "kl gradient": (lambda: kl_gradient(p, y), "abs"),
        "embed (100 it)": (lambda: embed(p, EmbedConfig(iterations=100)).coords, "abs"),
        "grid histogram": (lambda: histogram(y_emb, fit_grid(y_emb, 8)).counts, "abs"),
    }
    print(f"N={args.n}, best of {args.repeat}")
    print(f"{'kernel':<16} {'numba s':>9} {'numpy s':>9} {'speedup':>8} {'max diff':>10}")
    prev = _accel.backend()
    try:
        for name, (fn, kind) in cases.items():
            _accel.set_backend("numba")
            t_nb, a = best_of(fn, args.repeat)
            _accel.set_backend("numpy")
            t_np, b = best_of(fn, args.repeat)
            diff = np.abs(np.asarray(a, float) - np.asarray(b, float))
            if kind == "rel":
                diff = diff / np.abs(np.asarray(b, float))
            print(f"{name:<16} {t_nb:9.4f} {t_np:9.4f} {t_np / t_nb:7.1f}x {diff.max():10.2e}")
    finally:
        _accel.set_backend(prev)


if __name__ == "__main__":
    main()
