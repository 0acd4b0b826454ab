"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]

Prints one row per kernel with the best-of-N wall time for each backend and
the speedup.  The maximum absolute difference between the two backends'
outputs is printed as a sanity check.
"""

import argparse
import timeit

import numpy as np

from capq.kernels import available_backends


def workloads(quick):
    rng = np.random.default_rng(0)
    n_special = 20_000 if quick else 200_000
    n_mc = 200_000 if quick else 1_000_000
    x = rng.normal(0.0, 3.0, n_special)
    p = rng.uniform(1e-12, 1.0, n_special)
    g = rng.gamma(2.0, 3.0, n_special)
    u = rng.uniform(0.0, 1.0, n_special)
    X = rng.standard_normal((n_mc, 3))
    center, half = np.zeros(3), np.array([1.0, 2.0, 3.0])
    stat = np.abs(rng.standard_normal(n_mc))
    values = rng.normal(10.0, 2.0, 100)
    idx = rng.integers(0, 100, size=(2000, 100))
    return [
        ("ndtr", lambda m: m.ndtr(x)),
        ("ndtri", lambda m: m.ndtri(p)),
        ("gammainc", lambda m: m.gammainc(4.5, g)),
        ("gammaincc", lambda m: m.gammaincc(4.5, g)),
        ("betainc", lambda m: m.betainc(3.0, 7.5, u)),
        ("scaled_max_abs", lambda m: m.scaled_max_abs(X, center, half)),
        ("fraction_le", lambda m: m.fraction_le(stat, 1.5)),
        ("resample_mean_sd", lambda m: m.resample_mean_sd(values, idx)),
    ]


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="smaller inputs")
    args = parser.parse_args()

    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the fallback is available")
    names = sorted(backends)
    header = f"{'kernel':<18}" + "".join(f"{n + ' [ms]':>16}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}{'max |diff|':>14}"
    print(header)
    for label, fn in workloads(args.quick):
        times = {}
        for name in names:
            mod = backends[name]
            times[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
        row = f"{label:<18}" + "".join(f"{times[n]:>16.2f}" for n in names)
        if len(names) == 2:
            diff = _max_diff(fn(backends["cython"]), fn(backends["python"]))
            row += f"{times['python'] / times['cython']:>9.1f}x{diff:>14.2e}"
        print(row)


if __name__ == "__main__":
    main()
