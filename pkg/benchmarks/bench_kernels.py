"""Compare the compiled and NumPy kernel backends.

Times each solver on a desk-scale zero-sum instance with both backends and
reports the speedup and the largest coefficient difference.

    python benchmarks/bench_kernels.py [--n 30 --d 20 --repeat 3]
"""
import argparse
import time

import numpy as np

from conlasso import _backend
from conlasso.data import SyntheticSpec, random_data
from conlasso.problem import Formulation, Kind, ProblemData
from conlasso.solvers import (SolverConfig, compute_lambda_max, douglas_rachford,
                              oracle_solve, pfpds, ppds)

SOLVERS = {
    "DR": lambda P, F, lam, cfg: douglas_rachford(P, F, lam, cfg),
    "PPDS": lambda P, F, lam, cfg: ppds(P, F, lam, cfg),
    "PFPDS": lambda P, F, lam, cfg: pfpds(P, F, lam, cfg),
    "Oracle": lambda P, F, lam, cfg: oracle_solve(P, F, lam, budget=20000, config=cfg),
}


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--d", type=int, default=20)
    ap.add_argument("--ratio", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _backend.compiled_kernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    X, C, y, _ = random_data(SyntheticSpec(n=args.n, d=args.d, d_nonzero=4, seed=1))
    P = ProblemData(X, y, C)
    print(f"{'kind':<5}{'solver':<8}{'python s':>10}{'compiled s':>12}{'speedup':>9}{'max |db|':>11}")
    for kind in (Kind.R1, Kind.R2):
        F = Formulation(kind)
        lam = args.ratio * compute_lambda_max(P, F)
        for name, run in SOLVERS.items():
            tp, sp = best_time(lambda: run(P, F, lam, SolverConfig(backend="python")), args.repeat)
            tc, sc = best_time(lambda: run(P, F, lam, SolverConfig(backend="compiled")), args.repeat)
            diff = float(np.max(np.abs(sp.beta - sc.beta)))
            print(f"{kind.value:<5}{name:<8}{tp:>10.4f}{tc:>12.4f}{tp / tc:>9.1f}{diff:>11.2e}")


if __name__ == "__main__":
    main()
