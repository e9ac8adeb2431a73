"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat N] [--steps 100 200 400]

Times full boundary solves and a value-function sweep with each backend and
checks that both give the same boundary.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from retirebound import ModelParams, j_hat, solve_boundary
from retirebound.kernels import available_backends


def best_time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def speedup(backends, times) -> float:
    by_name = dict(zip(backends, times))
    return by_name["python"] / by_name["compiled"]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, nargs="+", default=[100, 200, 400])
    args = ap.parse_args()

    backends = available_backends()
    p = ModelParams.baseline()
    print(f"backends available: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled extension not built; only the python timings are shown")

    header = f"{'task':<26}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for n in args.steps:
        times = [best_time(lambda b=b: solve_boundary(p, n_steps=n, backend=b), args.repeat) for b in backends]
        line = f"{'solve_boundary n=' + str(n):<26}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
        if len(times) == 2:
            line += f"{speedup(backends, times):>9.1f}x"
        print(line)

    sol = solve_boundary(p, n_steps=200)
    x = np.linspace(0.5, 2.5, 400)
    times = [best_time(lambda b=b: j_hat(10.0, x, None, sol, backend=b), args.repeat) for b in backends]
    line = f"{'j_hat 400 points':<26}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
    if len(times) == 2:
        line += f"{speedup(backends, times):>9.1f}x"
    print(line)

    if len(backends) == 2:
        a, b = (solve_boundary(p, n_steps=200, backend=k).b_star for k in backends)
        print(f"max |b*_compiled - b*_python| at n=200: {np.max(np.abs(a - b)):.1e}")


if __name__ == "__main__":
    main()
