"""Time each hot kernel under the numba and numpy backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--n GRID]
"""
import argparse
import statistics
import time

import numpy as np

from fockconc import kernels as K
from fockconc.fock import basis_scale, multi_indices


def cases(n: int):
    rng = np.random.default_rng(0)
    b = (rng.standard_normal(17) + 1j * rng.standard_normal(17)) * basis_scale(np.arange(17)[:, None])
    xs = np.linspace(-5, 5, n)
    z = rng.uniform(-3, 3, 200_000) + 1j * rng.uniform(-3, 3, 200_000)
    order = np.argsort(-rng.random(n * n)).astype(np.int64)
    idx = multi_indices(2, 8)
    coef = rng.standard_normal(idx.shape[0]) + 0j
    z2 = rng.standard_normal((100_000, 2)) + 1j * rng.standard_normal((100_000, 2))
    return {
        "poly_eval": (b, z.real, z.imag),
        "density_grid": (b, xs, xs),
        "weighted_basis": (24, z.real[:50_000], z.imag[:50_000]),
        "boundary_edges": (order, n),
        "multi_eval": (idx, coef, z2.real, z2.imag),
    }


def bench(fn, args, repeat: int) -> float:
    fn(*args)  # warm-up (compiles numba kernels)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=1024, help="grid resolution")
    args = ap.parse_args()
    if not K.NUMBA_KERNELS:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}")
    for name, a in cases(args.n).items():
        t_np = bench(K.NUMPY_KERNELS[name], a, args.repeat)
        t_nb = bench(K.NUMBA_KERNELS[name], a, args.repeat)
        print(f"{name:<16}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
