"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N time per operation for each backend and the speedup.
"""

import argparse
import timeit

import numpy as np

from tisa import backend
from tisa.attention import KernelParams, materialize_fp
from tisa.fit import FitOptions, fit_kernels


def cases():
    gen = np.random.default_rng(0)
    a, b = gen.standard_normal((128, 64)), gen.standard_normal((64, 128))
    x, y = gen.standard_normal((16, 32, 16)), gen.standard_normal((16, 16, 32))
    square = gen.standard_normal((256, 256))
    S = 5
    amp, width, center = gen.standard_normal(S), gen.uniform(0.01, 1, S), gen.uniform(-20, 20, S)
    ks = np.arange(-128, 129, dtype=np.float64)
    target = gen.standard_normal(ks.size)
    params = KernelParams(amp, width, center)
    profile = np.exp(-0.3 * (ks + 1) ** 2) + 0.1 * gen.standard_normal(ks.size)

    def kern():
        return backend.kernels()

    return [
        ("matmul 128x64x128", lambda: kern().matmul(a, b), 20),
        ("bmm 16x(32x16x32)", lambda: kern().bmm(x, y), 20),
        ("diagonal_sums 256x256", lambda: kern().diagonal_sums(square), 20),
        ("rbf_fit_terms S=5, 257 offsets", lambda: kern().rbf_fit_terms(amp, width, center, ks, target), 200),
        ("materialize_fp n=512", lambda: materialize_fp(params, 512), 20),
        ("fit window=128 S=5 restarts=8", lambda: fit_kernels(ks, profile, FitOptions()), 1),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not backend.has_compiled():
        raise SystemExit("the compiled extension is not built; run `pip install -e .` first")
    print(f"{'operation':<34}{'compiled':>12}{'python':>12}{'speedup':>10}")
    for label, fn, number in cases():
        timings = {}
        for name in ("compiled", "python"):
            previous = backend.use(name)
            try:
                timings[name] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            finally:
                backend.use(previous)
        c, p = timings["compiled"], timings["python"]
        print(f"{label:<34}{c * 1e3:>10.3f}ms{p * 1e3:>10.3f}ms{p / c:>9.1f}x")


if __name__ == "__main__":
    main()
