"""Compiled vs pure-Python backend: speed and bit-identical results.

    python benchmarks/bench_backends.py --iters 5000 --repeat 3
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from mmfctt._backend import available_backends
from mmfctt.fairness import format_compressed
from mmfctt.sa import SAConfig, run
from mmfctt.synth import SynthSpec, generate


def time_sa(instance, cfg, backend, repeat):
    times, result = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        result = run(instance, cfg, backend=backend)
        times.append(time.perf_counter() - start)
    return statistics.median(times), result


def time_lvap(backend, costs, repeat):
    times, out = [], []
    for _ in range(repeat):
        start = time.perf_counter()
        out = [backend.solve_lvap(c) for c in costs]
        times.append(time.perf_counter() - start)
    return statistics.median(times), out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iters", type=int, default=5_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--instances", type=int, default=2)
    args = parser.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`")
        return 1
    py, cy = backends["python"], backends["cython"]
    mismatches = 0

    print(f"{'case':<24}{'python s':>10}{'compiled s':>12}{'speedup':>9}  result")
    for k in range(args.instances):
        instance = generate(SynthSpec(), seed=args.seed + k, name=f"synthetic{k}")
        for variant in ("glbop", "lsap"):
            cfg = SAConfig(iterations=args.iters, variant=variant, seed=args.seed)
            t_py, r_py = time_sa(instance, cfg, py, args.repeat)
            t_cy, r_cy = time_sa(instance, cfg, cy, args.repeat)
            same = (r_py.best_timetable == r_cy.best_timetable
                    and r_py.best_allocation == r_cy.best_allocation)
            mismatches += not same
            print(f"{instance.name + ' ' + variant:<24}{t_py:>10.3f}{t_cy:>12.3f}{t_py / t_cy:>8.1f}x  "
                  f"{format_compressed(r_cy.best_allocation)}{'' if same else '  MISMATCH'}")

    rng = np.random.default_rng(args.seed)
    costs = [rng.integers(0, 4, (n, n, 8)) for n in rng.integers(5, 30, 200)]
    t_py, a = time_lvap(py, costs, args.repeat)
    t_cy, b = time_lvap(cy, costs, args.repeat)
    same = all(np.array_equal(x, y) for x, y in zip(a, b))
    mismatches += not same
    print(f"{'200 vector assignments':<24}{t_py:>10.3f}{t_cy:>12.3f}{t_py / t_cy:>8.1f}x  "
          f"{'identical' if same else 'MISMATCH'}")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
