"""Compare the numba kernels with their pure-numpy counterparts.

    python3 benchmarks/bench_kernels.py [--sizes 16,32,64] [--repeat 5]

The first numba call per signature pays compilation; it is excluded by a
warm-up call before timing.
"""

import argparse
import time

import numpy as np

from specmatch import kernels

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def best_of(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def laplacian_like(n, rng):
    z = rng.standard_normal((n, 16))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    s = z @ z.T
    a = (s > np.quantile(s, 0.8)).astype(float)
    np.fill_diagonal(a, 0.0)
    d = a.sum(axis=1)
    d[d == 0] = 1.0
    return np.eye(n) - a / np.sqrt(np.outer(d, d)), a, z


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="16,32,64,128")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    print(f"{'kernel':<18} {'n':>5} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for n in (int(v) for v in args.sizes.split(",")):
        lap, a, z = laplacian_like(n, rng)
        cases = [
            ("jacobi_eigh", (lap,), kernels.jacobi_eigh_numpy, kernels.jacobi_eigh_numba),
            ("pairwise_sq_dists", (z,), kernels.pairwise_sq_dists_numpy, kernels.pairwise_sq_dists_numba),
            ("edge_energy", (a, z), kernels.edge_energy_numpy, kernels.edge_energy_numba),
        ]
        for name, inputs, slow, fast in cases:
            t_np = best_of(lambda: slow(*inputs), args.repeat)
            ref = slow(*inputs)
            if HAVE_NUMBA:
                t_nb = best_of(lambda: fast(*inputs), args.repeat)
                out = fast(*inputs)
                a0 = ref[0] if isinstance(ref, tuple) else ref
                b0 = out[0] if isinstance(out, tuple) else out
                diff = float(np.max(np.abs(np.asarray(a0) - np.asarray(b0))))
                print(f"{name:<18} {n:>5} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} {t_np / t_nb:>8.1f} {diff:>11.2e}")
            else:
                print(f"{name:<18} {n:>5} {t_np * 1e3:>10.3f} {'n/a':>10} {'':>8} {'':>11}")


if __name__ == "__main__":
    main()
