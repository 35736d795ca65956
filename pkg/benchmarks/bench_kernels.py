#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallback on realistic batch sizes.

    python3 benchmarks/bench_kernels.py [--records 10000] [--repeat 5]

Outputs are checked for agreement before timing. Numba compile time is paid
in a warm-up call and excluded.
"""
import argparse
import time

import numpy as np

from realcheck import _accel
from realcheck.kernels import numpy_impl

if not _accel.HAVE_NUMBA:
    raise SystemExit("numba is not installed; nothing to compare")

from realcheck.kernels import numba_impl  # noqa: E402


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, gen):
    d, k, c = 4, 50, 19
    a = gen.standard_normal((n, d, d))
    spd = np.einsum("nij,nkj->nik", a, a) + 0.5 * np.eye(d)
    L = np.linalg.cholesky(spd)
    r = gen.standard_normal((n, k, d))
    logits = gen.standard_normal((max(1, n // 5), k, c))
    probs = np.exp(logits) / np.exp(logits).sum(axis=2, keepdims=True)
    x = gen.uniform(0.0, 60.0, n * 10)
    keys = gen.integers(0, 2**63, n, dtype=np.int64).astype(np.uint64)
    return [
        ("chol_batch", (spd,)),
        ("mahalanobis_batch", (L, r)),
        ("jacobi_eigh_batch", (spd,)),
        ("gammainc_lower", (np.full(x.size, 2.0), 0.5 * x)),
        ("sample_moments", (r,)),
        ("splitmix_words", (keys, 200)),
        ("class_scores", (probs,)),
    ]


def agree(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(x, y, rtol=1e-12, atol=1e-13, equal_nan=True) for x, y in zip(a, b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--records", type=int, default=10000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    gen = np.random.default_rng(0)
    print(f"records={args.records}  numba threads={_accel.numba_threads()}")
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}  agree")
    for name, fargs in cases(args.records, gen):
        f_np, f_nb = getattr(numpy_impl, name), getattr(numba_impl, name)
        ok = agree(f_np(*fargs), f_nb(*fargs))
        t_np = best_of(f_np, fargs, args.repeat)
        t_nb = best_of(f_nb, fargs, args.repeat)
        print(f"{name:<20}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}x  {'yes' if ok else 'NO'}")


if __name__ == "__main__":
    main()
