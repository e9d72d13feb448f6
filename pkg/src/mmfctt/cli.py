"""Command line interface: ``mmfctt validate|solve|bench|report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from mmfctt import __version__
from mmfctt._backend import BACKEND


def _cmd_validate(args) -> int:
    from mmfctt.cbctt import allocation, load_instance, parse_solution, soft_costs, validate_hard
    from mmfctt.fairness import format_compressed

    instance = load_instance(args.instance)
    print(f"{instance.name}: {len(instance.courses)} courses, {instance.n_lectures} lectures, "
          f"{len(instance.rooms)} rooms, {instance.periods} periods "
          f"({instance.days}x{instance.periods_per_day}), {len(instance.curricula)} curricula, "
          f"{len(instance.unavailability)} unavailabilities")
    if args.solution is None:
        return 0
    t = parse_solution(Path(args.solution).read_text(), instance)
    violations = validate_hard(instance, t)
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return 1
    costs = soft_costs(instance, t)
    print(f"feasible; soft costs S1={costs.room_capacity} S2={costs.min_working_days} "
          f"S3={costs.isolated_lectures} S4={costs.room_stability} total={costs.total}")
    print(f"allocation {format_compressed(allocation(instance, t).sorted)}")
    return 0


def _cmd_solve(args) -> int:
    from mmfctt.cbctt import load_instance, write_solution
    from mmfctt.fairness import format_compressed, rho_min
    from mmfctt.sa import SAConfig, run

    instance = load_instance(args.instance)
    cfg = SAConfig(t_max=args.tmax, t_min=args.tmin, iterations=args.iters,
                   variant=args.variant, seed=args.seed, polish=not args.no_polish)
    result = run(instance, cfg)
    if args.out:
        Path(args.out).write_text(write_solution(result.best_timetable))
    print(format_compressed(result.best_allocation))
    logging.getLogger("mmfctt").info(
        "rank %d, %d iterations in %.2fs (%s backend)",
        rho_min(result.best_allocation), result.iterations_run, result.wall_seconds, BACKEND)
    return 0


def _cmd_bench(args) -> int:
    from dataclasses import replace

    from mmfctt.fairness import format_compressed
    from mmfctt.harness import bench, load_spec

    spec = load_spec(args.spec)
    if args.scale > 1:
        spec = spec.scaled(args.scale)
    if args.output:
        spec = replace(spec, output=args.output)

    def progress(rec):
        print(f"{rec.instance} {rec.variant} run {rec.run}: {format_compressed(rec.allocation)} "
              f"({rec.wall_ms / 1000:.1f}s)", flush=True)

    records = bench(spec, workers=args.workers, progress=progress)
    print(f"{len(records)} records in {spec.output}")
    return 0


def _cmd_report(args) -> int:
    from mmfctt.harness import report

    text, summary = report(args.results, verify=args.verify, latex=args.latex, alpha=args.alpha)
    print(text, end="")
    if args.verify and summary["verify"]["problems"]:
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmfctt", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="parse an instance, optionally check a solution")
    p.add_argument("instance")
    p.add_argument("--solution", help="solution file to check against the instance")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("solve", parents=[common], help="run simulated annealing on one instance")
    p.add_argument("instance")
    p.add_argument("--variant", choices=["glbop", "lsap"], default="glbop")
    p.add_argument("--iters", type=int, default=1_000_000)
    p.add_argument("--tmax", type=float, default=5.0)
    p.add_argument("--tmin", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the best timetable here")
    p.add_argument("--no-polish", action="store_true",
                   help="skip the final room re-solve passes")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("bench", parents=[common], help="run an experiment spec (resumable)")
    p.add_argument("spec")
    p.add_argument("--scale", type=int, default=1, help="divide runs and iterations by this")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", help="override the spec's output directory")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", parents=[common], help="summarize a results directory")
    p.add_argument("results")
    p.add_argument("--verify", action="store_true",
                   help="re-check feasibility and room optimality of every solution")
    p.add_argument("--latex", action="store_true", help="braced exponents, e.g. 5^{3}")
    p.add_argument("--alpha", type=float, default=0.01)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"mmfctt: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
