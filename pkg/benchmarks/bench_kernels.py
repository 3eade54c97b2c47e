"""Compare the compiled sampling kernels against the pure-Python fallback.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from ddecop._kernels import BACKEND, pyref

try:
    from ddecop._kernels import _zcore
except ImportError:
    _zcore = None


def column_setup(n, n_values, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, n_values, n).astype(float)
    distinct, inv = np.unique(y, return_inverse=True)
    inv = inv.astype(np.int64)
    ptr = np.zeros(distinct.size + 1, dtype=np.int64)
    np.cumsum(np.bincount(inv, minlength=distinct.size), out=ptr[1:])
    rbg = np.argsort(inv, kind="stable").astype(np.int64)
    z = np.argsort(np.argsort(y)).astype(float)
    mu = rng.normal(size=n)
    u = rng.random(n)
    return z, mu, inv, ptr, rbg, u


def time_backend(impl, z0, mu, inv, ptr, rbg, u, repeats):
    z = z0.copy()
    start = time.perf_counter()
    for _ in range(repeats):
        impl.sweep_column(z, mu, 1.3, inv, ptr, rbg, u)
    return (time.perf_counter() - start) / repeats


def main():
    print(f"active backend: {BACKEND}")
    print(f"{'n':>8} {'ties':>6} {'python ms':>12} {'compiled ms':>12} {'speedup':>9}")
    for n, n_values in ((500, 4), (4000, 8), (4000, 4000), (20000, 12)):
        z, mu, inv, ptr, rbg, u = column_setup(n, n_values, seed=n + n_values)
        repeats = max(3, 2_000_000 // n // 20)
        t_py = time_backend(pyref, z, mu, inv, ptr, rbg, u, max(3, repeats // 10))
        if _zcore is None:
            print(f"{n:>8} {n_values:>6} {t_py * 1e3:>12.3f} {'-':>12} {'-':>9}")
            continue
        t_c = time_backend(_zcore, z, mu, inv, ptr, rbg, u, repeats)
        print(
            f"{n:>8} {n_values:>6} {t_py * 1e3:>12.3f} {t_c * 1e3:>12.3f} "
            f"{t_py / t_c:>8.1f}x"
        )
        zc, zp = z.copy(), z.copy()
        _zcore.sweep_column(zc, mu, 1.3, inv, ptr, rbg, u)
        pyref.sweep_column(zp, mu, 1.3, inv, ptr, rbg, u)
        assert np.array_equal(zc, zp), "backends diverged"
    if _zcore is not None:
        print("backends agree bit for bit on every benchmarked sweep")


if __name__ == "__main__":
    main()
