"""Time the compiled kernel core against the numpy fallback.

    python benchmarks/bench_backends.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from kbilinear import _kernels_py

try:
    from kbilinear import _ckernels
except ImportError:
    _ckernels = None

# Wendland s = 1 profile in the (power, coefficient) form both cores take
POWER, COEFFS = 4, np.array([1.0, 4.0])


def cases(rng):
    for n, N, d in ((1, 2001, 19), (1, 20_000, 101), (2, 10_000, 81), (3, 5_000, 125)):
        yield f"n={n} N={N} d={d}", rng.uniform(-1, 1, (N, n)), rng.uniform(-1, 1, (d, n))


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled core not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'case':<22}{'function':<16}{'python [ms]':>12}{'cython [ms]':>13}{'speedup':>9}")
    for label, P, C in cases(rng):
        for name, call in (
            ("cross_kernel", lambda m: m.cross_kernel(P, C, 1.0, POWER, COEFFS)),
            ("min_distances", lambda m: m.min_distances(P, C)),
        ):
            t_py = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat)) * 1e3
            if _ckernels is None:
                print(f"{label:<22}{name:<16}{t_py:>12.3f}{'-':>13}{'-':>9}")
                continue
            t_c = min(timeit.repeat(lambda: call(_ckernels), number=1, repeat=args.repeat)) * 1e3
            assert np.allclose(call(_kernels_py), call(_ckernels), atol=1e-14)
            print(f"{label:<22}{name:<16}{t_py:>12.3f}{t_c:>13.3f}{t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
