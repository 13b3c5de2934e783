"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; the table shows
the best wall time over the repeats and the speed-up.
"""

import argparse
import timeit

import numpy as np

from maxentgame import instances, kernels
from maxentgame.constraints import lp_extremize


def simplex_case(rng, m=40, n=60):
    A = rng.integers(-2, 6, size=(m, n)).astype(float)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = rng.integers(1, 10, size=m)
    T[m, :n] = rng.integers(-3, 6, size=n)
    basis = np.arange(n, n + m, dtype=np.int64)

    def run(mod):
        mod.simplex_pivot_loop(T.copy(), basis.copy(), n + m, 1e-11, 100_000)
    return run


def pivot_case(rng):
    T = rng.normal(size=(60, 120))

    def run(mod):
        U = T.copy()
        for r in range(40):
            mod.pivot(U, r, r)
    return run


def hit_and_run_case(rng, n=30, k=12, steps=20_000):
    x0 = rng.dirichlet(np.ones(n))
    basis = np.linalg.qr(rng.normal(size=(n, k)))[0]
    basis -= basis.mean(axis=0)
    dirs = rng.normal(size=(steps, k)) @ basis.T
    dirs = np.ascontiguousarray(dirs / np.linalg.norm(dirs, axis=1, keepdims=True))
    u = rng.random(steps)

    def run(mod):
        mod.hit_and_run(x0, dirs, u, 10, 1e-12)
    return run


def log_capital_case(rng, S=3, X=6, T=100, n=10_000):
    lr = np.ascontiguousarray(np.log(rng.dirichlet(np.ones(X), size=S) * X))
    outcomes = rng.integers(0, X, size=(T, n)).astype(np.int64)

    def run(mod):
        mod.log_capital_paths(lr, outcomes)
    return run


CASES = {
    "simplex_pivot_loop (40x100)": simplex_case,
    "pivot x40 (60x120)": pivot_case,
    "hit_and_run (20k steps)": hit_and_run_case,
    "log_capital_paths (100 x 10k)": log_capital_case,
}


def end_to_end(repeat):
    """LP extremisation on a random problem, through the public API."""
    rng = np.random.default_rng(0)
    problem = instances.random_problem(rng, n_range=(200, 200), k_range=(8, 8))
    c = rng.normal(size=200)
    return min(timeit.repeat(lambda: lp_extremize(problem.constraints, c, "max"),
                             number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.backends()
    names = sorted(backends)
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<32}" + "".join(f"{n:>12}" for n in names) + f"{'speed-up':>10}")
    for label, make in CASES.items():
        run = make(np.random.default_rng(1))
        times = {n: min(timeit.repeat(lambda m=backends[n]: run(m), number=1, repeat=args.repeat))
                 for n in names}
        row = f"{label:<32}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in names)
        if "compiled" in times:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)
    print(f"lp_extremize, |Omega| = 200 ({kernels.BACKEND}): {end_to_end(args.repeat) * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
