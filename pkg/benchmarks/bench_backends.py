"""Compare the numba and numpy kernels.

    python benchmarks/bench_backends.py [--sizes 10,30,60] [--repeat 20]

Times one assignment solve and one full marginal association (100 structure
steps) per size and backend, and checks that both backends agree.
"""
import argparse
import time

import numpy as np

from margtrack.bench import available_backends, time_association
from margtrack.lap import solve_min_assignment


def time_solve(c, backend, repeat):
    solve_min_assignment(c, backend=backend)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        solve_min_assignment(c, backend=backend)
        ts.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(ts))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="10,30,60")
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--steps", type=int, default=100)
    args = ap.parse_args()
    backends = available_backends()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)

    print(f"{'size':>5} {'backend':<7} {'solve_ms':>9} {'assoc_ms':>9}")
    for n in sizes:
        c = rng.random((n, n))
        pairs = {b: solve_min_assignment(c, backend=b).pairs for b in backends}
        assert len(set(pairs.values())) == 1, "backends disagree"
        for b in backends:
            assoc_repeat = args.repeat if b == "numba" else max(2, args.repeat // 10)
            assoc = time_association(n, n, args.steps, assoc_repeat, backend=b, warmup=1).median_ms
            print(f"{n:>5} {b:<7} {time_solve(c, b, args.repeat):>9.3f} {assoc:>9.2f}")


if __name__ == "__main__":
    main()
