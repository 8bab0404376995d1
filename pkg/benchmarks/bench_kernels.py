"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--size N] [--repeat R]

Both backends are importable in one process because every kernel takes a
``backend=`` argument; the env flag GMVAE_DISABLE_NUMBA only changes the
default.  JIT compilation is triggered once before timing.
"""

import argparse
import timeit

import numpy as np

from gmvae import kernels


def cases(n, rng):
    x = rng.uniform(1e-3, 50.0, n)
    a = rng.uniform(0.5, 30.0, n)
    gx = rng.gamma(a)
    shapes = rng.uniform(1.0, 5.0, n)
    return {
        "lgamma": lambda b: kernels.lgamma(x, backend=b),
        "digamma": lambda b: kernels.digamma(x, backend=b),
        "trigamma": lambda b: kernels.trigamma(x, backend=b),
        "gammainc_lower": lambda b: kernels.gammainc_lower(a, gx, backend=b),
        "gamma_shape_grad": lambda b: kernels.gamma_shape_grad(a, gx, backend=b),
        "standard_gamma": lambda b: kernels.standard_gamma(shapes, np.random.default_rng(0), backend=b),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--size", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    rng = np.random.default_rng(1)
    table = cases(args.size, rng)
    for fn in table.values():
        for b in backends:
            fn(b)

    print(f"n = {args.size}, best of {args.repeat}")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in table.items():
        times = [min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in backends]
        line = f"{name:<18}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            line += f"{times[0] / times[1]:11.1f}x"
            ref, fast = fn("numpy"), fn("numba")
            err = np.max(np.abs(ref - fast) / np.maximum(1.0, np.abs(ref)))
            line += f"   max diff {err:.1e}"
        print(line)


if __name__ == "__main__":
    main()
