"""Batch experiments, fairness-aware statistics and result tables.

Runs are described by a small ``key = value`` spec file, executed across a
process pool and appended as JSON lines to ``results.jsonl`` (one writer,
the parent process).  Reports aggregate per instance and variant: the best
allocation under leximax, the average allocation through the rank map, and
a one-sided Wilcoxon rank-sum test on the ranks.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from mmfctt.cbctt import load_instance, parse_solution, validate_hard, write_solution
from mmfctt.fairness import (
    average_allocation,
    format_compressed,
    leximax_key,
    rho_min,
)

log = logging.getLogger(__name__)

__all__ = [
    "SCHEMA_VERSION",
    "ExperimentSpec",
    "RunRecord",
    "parse_spec",
    "load_spec",
    "derive_seed",
    "bench",
    "load_records",
    "aggregate",
    "WilcoxonResult",
    "wilcoxon_one_sided",
    "rank_sum_exact_p",
    "report",
]

SCHEMA_VERSION = 1
RESULTS_FILE = "results.jsonl"
VARIANT_ORDER = ("glbop", "lsap")


# -- experiment specs ------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    instances: tuple[str, ...]
    variants: tuple[str, ...] = VARIANT_ORDER
    runs: int = 50
    iterations: int = 1_000_000
    seed: int = 0
    t_max: float = 5.0
    t_min: float = 0.01
    output: str = "results"
    workers: int = 1

    def __post_init__(self):
        if not self.instances:
            raise ValueError("an experiment needs at least one instance")
        if not self.variants:
            raise ValueError("an experiment needs at least one variant")
        for v in self.variants:
            if v not in VARIANT_ORDER:
                raise ValueError(f"unknown variant {v!r}")
        if self.runs < 1 or self.iterations < 1:
            raise ValueError("runs and iterations must be positive")

    def scaled(self, factor: int) -> ExperimentSpec:
        """Divide runs and iterations by ``factor`` (at least 1 of each)."""
        if factor < 1:
            raise ValueError("scale factor must be at least 1")
        return replace(self, runs=max(1, self.runs // factor),
                       iterations=max(1, self.iterations // factor))


_LIST_KEYS = {"instances", "variants"}
_INT_KEYS = {"runs", "iterations", "seed", "workers"}
_FLOAT_KEYS = {"tmax": "t_max", "tmin": "t_min", "t_max": "t_max", "t_min": "t_min"}


def parse_spec(text: str, base_dir: str | Path = ".") -> ExperimentSpec:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Relative instance paths and the output directory resolve against
    ``base_dir``.  List values are comma or whitespace separated.
    """
    base = Path(base_dir)
    kwargs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = key.strip().lower(), value.strip()
        if key in _LIST_KEYS:
            items = tuple(v for v in value.replace(",", " ").split() if v)
            if key == "instances":
                items = tuple(str(base / v) for v in items)
            kwargs[key] = kwargs.get(key, ()) + items
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[_FLOAT_KEYS[key]] = float(value)
        elif key == "output":
            kwargs["output"] = str(base / value)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    if "instances" not in kwargs:
        raise ValueError("spec lists no instances")
    return ExperimentSpec(**kwargs)


def load_spec(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    return parse_spec(path.read_text(), base_dir=path.parent)


def derive_seed(base_seed: int, instance_name: str, variant: str, run: int) -> int:
    """Independent 64-bit seed per (instance, variant, run)."""
    key = (zlib.crc32(instance_name.encode()), VARIANT_ORDER.index(variant), run)
    ss = np.random.SeedSequence(base_seed, spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# -- records ---------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    instance: str
    variant: str
    run: int
    seed: int
    allocation: tuple[int, ...]
    rank: int
    iterations: int
    wall_ms: float
    instance_path: str = ""
    solution: str = ""
    schema: int = SCHEMA_VERSION
    extra: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> str:
        d = asdict(self)
        d["allocation"] = ",".join(map(str, self.allocation))
        d["rank"] = str(self.rank)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> RunRecord:
        d = json.loads(line)
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported record schema {d.get('schema')!r}")
        alloc = tuple(int(x) for x in d["allocation"].split(",")) if d["allocation"] else ()
        rec = cls(
            instance=d["instance"], variant=d["variant"], run=int(d["run"]),
            seed=int(d["seed"]), allocation=alloc, rank=int(d["rank"]),
            iterations=int(d["iterations"]), wall_ms=float(d["wall_ms"]),
            instance_path=d.get("instance_path", ""), solution=d.get("solution", ""),
            extra=d.get("extra", {}),
        )
        if rec.rank != rho_min(rec.allocation):
            raise ValueError(f"record {rec.instance}/{rec.variant}/{rec.run}: rank does not match allocation")
        return rec

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.instance, self.variant, self.run)


def load_records(results_dir: str | Path) -> list[RunRecord]:
    path = Path(results_dir) / RESULTS_FILE
    if not path.exists():
        return []
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(RunRecord.from_json(line))
        except (ValueError, KeyError) as exc:
            # a torn final line from an interrupted writer is dropped
            log.warning("%s:%d: skipping unreadable record (%s)", path, lineno, exc)
    return out


# -- bench -------------------------------------------------------------------

@dataclass(frozen=True)
class _Task:
    instance_path: str
    variant: str
    run: int
    seed: int
    iterations: int
    t_max: float
    t_min: float
    solution_dir: str


def _execute(task: _Task) -> str:
    from mmfctt.sa import SAConfig, run

    instance = _load_instance_cached(task.instance_path)
    cfg = SAConfig(t_max=task.t_max, t_min=task.t_min, iterations=task.iterations,
                   variant=task.variant, seed=task.seed)
    started = time.perf_counter()
    result = run(instance, cfg)
    wall_ms = (time.perf_counter() - started) * 1000.0
    sol_name = f"{instance.name}.{task.variant}.{task.run:03d}.sol"
    (Path(task.solution_dir) / sol_name).write_text(write_solution(result.best_timetable))
    extra = {k: v for k, v in result.stats.items() if k != "trace"}
    rec = RunRecord(
        instance=instance.name, variant=task.variant, run=task.run, seed=task.seed,
        allocation=result.best_allocation, rank=rho_min(result.best_allocation),
        iterations=result.iterations_run, wall_ms=round(wall_ms, 3),
        instance_path=str(Path(task.instance_path).resolve()),
        solution=f"solutions/{sol_name}", extra=extra,
    )
    return rec.to_json()


@lru_cache(maxsize=32)
def _load_instance_cached(path: str):
    return load_instance(path)


def bench(spec: ExperimentSpec, workers: int | None = None, progress=None) -> list[RunRecord]:
    """Run every missing (instance, variant, run) of ``spec``; resumable."""
    out_dir = Path(spec.output)
    sol_dir = out_dir / "solutions"
    sol_dir.mkdir(parents=True, exist_ok=True)
    done = {r.key for r in load_records(out_dir)}
    tasks = []
    for path in spec.instances:
        name = _load_instance_cached(str(path)).name
        for variant in spec.variants:
            for k in range(spec.runs):
                if (name, variant, k) in done:
                    continue
                tasks.append(_Task(str(path), variant, k, derive_seed(spec.seed, name, variant, k),
                                   spec.iterations, spec.t_max, spec.t_min, str(sol_dir)))
    workers = spec.workers if workers is None else workers
    log.info("%d runs to do, %d already recorded", len(tasks), len(done))
    results_path = out_dir / RESULTS_FILE
    if results_path.exists() and results_path.stat().st_size:
        with open(results_path, "rb") as fh:
            fh.seek(-1, os.SEEK_END)
            torn = fh.read(1) != b"\n"
        if torn:
            with open(results_path, "a", encoding="utf-8") as fh:
                fh.write("\n")
    with open(results_path, "a", encoding="utf-8") as sink:
        def append(line: str) -> None:
            sink.write(line + "\n")
            sink.flush()
            os.fsync(sink.fileno())
            if progress is not None:
                progress(RunRecord.from_json(line))

        if workers <= 1:
            for task in tasks:
                append(_execute(task))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_execute, t) for t in tasks]
                for fut in as_completed(futures):
                    append(fut.result())
    return load_records(out_dir)


# -- statistics --------------------------------------------------------------

def aggregate(records: Sequence[RunRecord] | Sequence[Sequence[int]]):
    """``(best, average)`` allocation of one instance and variant."""
    if not records:
        raise ValueError("cannot aggregate an empty record set")
    allocs = [tuple(r.allocation) if isinstance(r, RunRecord) else tuple(r) for r in records]
    n = len(allocs[0])
    if any(len(a) != n for a in allocs):
        raise ValueError("allocations differ in length")
    best = min((leximax_key(a) for a in allocs))
    return best, average_allocation(allocs, n)


class WilcoxonResult(NamedTuple):
    p_value: float
    significant: bool
    statistic: float
    method: str


def _midranks(values: Sequence[int]) -> tuple[list[float], list[int]]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


@lru_cache(maxsize=256)
def _rank_sum_counts(n1: int, n: int) -> tuple[int, ...]:
    # counts[s] = number of n1-subsets of {1..n} with sum s
    top = n1 * (2 * n - n1 + 1) // 2
    table = [[0] * (top + 1) for _ in range(n1 + 1)]
    table[0][0] = 1
    for x in range(1, n + 1):
        for k in range(min(n1, x), 0, -1):
            row, prev = table[k], table[k - 1]
            for s in range(top, x - 1, -1):
                if prev[s - x]:
                    row[s] += prev[s - x]
    return tuple(table[n1])


def rank_sum_exact_p(w: int, n1: int, n2: int) -> float:
    """P(W <= w) for the rank sum of ``n1`` of ``n1 + n2`` untied observations."""
    counts = _rank_sum_counts(n1, n1 + n2)
    total = math.comb(n1 + n2, n1)
    return sum(counts[: int(w) + 1]) / total


def wilcoxon_one_sided(a: Sequence[int], b: Sequence[int], alpha: float = 0.01,
                       method: str = "auto") -> WilcoxonResult:
    """Rank-sum test of H1: values in ``a`` tend to be smaller than in ``b``.

    ``method`` is ``"exact"`` (tie-free samples only), ``"normal"`` (tie and
    continuity corrected) or ``"auto"``: exact for at most 20 untied values.
    Integers of any size are ranked exactly.
    """
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    n = n1 + n2
    ranks, ties = _midranks(list(a) + list(b))
    w = sum(ranks[:n1])
    tied = any(t > 1 for t in ties)
    if method == "auto":
        method = "exact" if (n <= 20 and not tied) else "normal"
    if method == "exact":
        if tied:
            raise ValueError("exact p-values need tie-free samples")
        p = rank_sum_exact_p(int(w), n1, n2)
    elif method == "normal":
        mean = n1 * (n + 1) / 2
        tie_term = sum(t**3 - t for t in ties) / (n * (n - 1)) if n > 1 else 0.0
        var = n1 * n2 / 12 * ((n + 1) - tie_term)
        if var <= 0:
            p = 1.0
        else:
            z = (w - mean + 0.5) / math.sqrt(var)
            p = 0.5 * math.erfc(-z / math.sqrt(2))
    else:
        raise ValueError(f"unknown method {method!r}")
    return WilcoxonResult(p, p < alpha, w, method)


def brute_force_rank_sum_p(a: Sequence[int], b: Sequence[int]) -> float:
    """Exact lower-tail p by enumerating every split of the pooled midranks."""
    ranks, _ = _midranks(list(a) + list(b))
    w = sum(ranks[: len(a)])
    hits = total = 0
    for idx in combinations(range(len(ranks)), len(a)):
        total += 1
        if sum(ranks[i] for i in idx) <= w + 1e-9:
            hits += 1
    return hits / total


# -- report --------------------------------------------------------------------

def _group(records: Iterable[RunRecord]) -> dict[str, dict[str, list[RunRecord]]]:
    out: dict[str, dict[str, list[RunRecord]]] = {}
    for r in records:
        out.setdefault(r.instance, {}).setdefault(r.variant, []).append(r)
    for per in out.values():
        for recs in per.values():
            recs.sort(key=lambda r: r.run)
    return out


def _verify(results_dir: Path, records: Sequence[RunRecord]) -> list[str]:
    from mmfctt.cbctt import allocation
    from mmfctt.room import solve_rooms_glbop

    problems = []
    for r in records:
        instance = _load_instance_cached(r.instance_path)
        t = parse_solution((results_dir / r.solution).read_text(), instance)
        violations = validate_hard(instance, t)
        if violations:
            problems.append(f"{r.instance}/{r.variant}/{r.run}: infeasible ({violations[0]})")
            continue
        alloc = allocation(instance, t).sorted
        if alloc != r.allocation:
            problems.append(f"{r.instance}/{r.variant}/{r.run}: allocation mismatch")
        for p in range(instance.periods):
            if allocation(instance, solve_rooms_glbop(instance, t, p)).sorted < alloc:
                problems.append(f"{r.instance}/{r.variant}/{r.run}: period {p} rooms improvable")
                break
    return problems


def report(results_dir: str | Path, verify: bool = False, latex: bool = False,
           alpha: float = 0.01) -> tuple[str, dict]:
    """Table of best and average allocations; writes ``report.txt`` and ``summary.json``."""
    results_dir = Path(results_dir)
    records = load_records(results_dir)
    if not records:
        raise FileNotFoundError(f"no records in {results_dir / RESULTS_FILE}")
    groups = _group(records)
    summary: dict = {"schema": SCHEMA_VERSION, "alpha": alpha, "instances": {}}
    lines = []
    variants = [v for v in VARIANT_ORDER if any(v in g for g in groups.values())]
    header = ["instance"] + [f"{v} {col}" for v in variants for col in ("best", "average")]
    rows = [header]
    for name in sorted(groups):
        per = groups[name]
        entry: dict = {}
        row = [name]
        for v in variants:
            recs = per.get(v, [])
            if not recs:
                row += ["-", "-"]
                continue
            best, avg = aggregate(recs)
            entry[v] = {
                "runs": len(recs),
                "best": format_compressed(best),
                "average": format_compressed(avg),
                "best_rank": str(rho_min(best)),
                "average_rank": str(rho_min(avg)),
                "rank_sum": str(sum(r.rank for r in recs)),
            }
            row += [format_compressed(best, latex=latex), format_compressed(avg, latex=latex)]
        if "glbop" in per and "lsap" in per:
            a = [r.rank for r in per["glbop"]]
            b = [r.rank for r in per["lsap"]]
            fwd = wilcoxon_one_sided(a, b, alpha)
            rev = wilcoxon_one_sided(b, a, alpha)
            entry["wilcoxon"] = {
                "glbop_better_p": fwd.p_value, "glbop_better": fwd.significant,
                "lsap_better_p": rev.p_value, "lsap_better": rev.significant,
                "method": fwd.method,
            }
        summary["instances"][name] = entry
        rows.append(row)
    widths = [max(len(r[k]) for r in rows) for k in range(len(header))]
    for r in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    lines.insert(1, "  ".join("-" * w for w in widths))
    tests = [(n, e["wilcoxon"]) for n, e in summary["instances"].items() if "wilcoxon" in e]
    if tests:
        lines.append("")
        lines.append(f"one-sided Wilcoxon rank-sum on ranks, alpha = {alpha}:")
        for n, wres in tests:
            verdict = ("glbop better" if wres["glbop_better"]
                       else "lsap better" if wres["lsap_better"] else "no significant difference")
            lines.append(f"  {n}: p(glbop<lsap) = {wres['glbop_better_p']:.4g}, "
                         f"p(lsap<glbop) = {wres['lsap_better_p']:.4g}  {verdict}")
        summary["glbop_significant"] = sum(w["glbop_better"] for _, w in tests)
        summary["lsap_significant"] = sum(w["lsap_better"] for _, w in tests)
    if verify:
        problems = _verify(results_dir, records)
        summary["verify"] = {"checked": len(records), "problems": problems}
        lines.append("")
        lines.append(f"verified {len(records)} solutions: "
                     + ("ok" if not problems else f"{len(problems)} problem(s)"))
        lines += [f"  {p}" for p in problems]
    text = "\n".join(lines) + "\n"
    (results_dir / "report.txt").write_text(text)
    (results_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return text, summary
