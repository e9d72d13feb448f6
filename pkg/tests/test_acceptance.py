"""Acceptance criteria.  Each test prints one ``[PASS]``/``[FAIL]`` line.

Criteria 4, 6 and 8 need the ITC2007 competition instances (``compNN.ectt``)
in ``$MMFCTT_ITC2007_DIR`` (default ``data/itc2007``); without them they fail.
Run as a script (``python tests/test_acceptance.py``) for the lines alone.
"""

import os
import re
import time
from itertools import combinations_with_replacement

import numpy as np
import pytest

from conftest import itc2007_dir, itc2007_path, reference_rows
from mmfctt.assignment import GlbopInstance, brute_force_glbop, solve_glbop, solve_lbap
from mmfctt.cbctt import allocation, format_instance, load_instance, parse_solution, validate_hard
from mmfctt.fairness import (
    WeightMultiset,
    format_compressed,
    is_truncated,
    leximax_compare,
    parse_compressed,
    rank,
    rank_recursive,
    unrank,
)
from mmfctt.harness import ExperimentSpec, bench, brute_force_rank_sum_p, wilcoxon_one_sided
from mmfctt.room import solve_rooms_glbop
from mmfctt.synth import SynthSpec, generate

# criterion number -> (passed, message); printed again in the terminal summary
RESULTS: dict[int, tuple[bool, str]] = {}
# results directories produced during this session, re-checked by criterion 5
EXPERIMENT_DIRS: list[str] = []

WORKERS = max(1, min(10, os.cpu_count() or 1))
ITC = [f"comp{k:02d}" for k in range(1, 22)]


def verdict(number: int, ok: bool, message: str) -> None:
    RESULTS[number] = (ok, message)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {message}", flush=True)
    assert ok, message


def missing_instance(number: int, name: str) -> None:
    verdict(number, False, f"{name} not found in {itc2007_dir()} (set MMFCTT_ITC2007_DIR)")


def test_criterion_1_fig1():
    weights = [[[5], [7]], [[5, 4], [7, 6]]]
    g = GlbopInstance(weights)
    solve_glbop(g)  # warm caches
    timings = []
    for _ in range(50):
        start = time.perf_counter()
        m, w = solve_glbop(g)
        timings.append(time.perf_counter() - start)
    lb1, c1 = solve_lbap([[5, 7], [5, 7]])
    lb2, c2 = solve_lbap([[5, 7], [4, 6]])
    ms = 1000 * float(np.median(timings))
    ok = (w == WeightMultiset([7, 5, 4]) and m.sigma == (1, 0)
          and c1 == (7, 5) and c2 == (6, 5) and ms < 1.0)
    verdict(1, ok, f"multiset {w.sorted()}, matching e1->r{m.sigma[0] + 1} e2->r{m.sigma[1] + 1}, "
                   f"projections {c1} {c2}, median {ms:.3f} ms")


def test_criterion_2_glbop_oracle():
    rng = np.random.default_rng(20260101)
    start = time.perf_counter()
    agree = 0
    total = 600
    for _ in range(total):
        n = int(rng.integers(1, 7))
        g = GlbopInstance([[WeightMultiset(rng.integers(0, 9, int(rng.integers(0, 4))))
                            for _ in range(n)] for _ in range(n)])
        agree += solve_glbop(g)[1] == brute_force_glbop(g)[1]
    secs = time.perf_counter() - start
    verdict(2, agree == total and secs < 10,
            f"{agree}/{total} random instances equal the brute-force optimum in {secs:.2f} s")


def test_criterion_3_rank_isomorphism():
    start = time.perf_counter()
    problems = []
    checked = 0
    for n in range(1, 6):
        seqs = [tuple(sorted(c, reverse=True))
                for c in combinations_with_replacement(range(7), n)]
        seqs.sort(key=lambda s: s)  # descending tuples: plain order is leximax order
        ranks = [rank(s) for s in seqs]
        checked += len(seqs)
        if ranks != list(range(len(seqs))):
            problems.append(f"n={n}: ranks are not 0..{len(seqs) - 1} in leximax order")
        for a, b in zip(seqs, seqs[1:]):
            if leximax_compare(a, b) >= 0:
                problems.append(f"n={n}: order broken at {a} {b}")
                break
        for s, r in zip(seqs, ranks):
            if rank_recursive(s) != r or unrank(r, n) != s:
                problems.append(f"n={n}: mismatch at {s}")
                break
    secs = time.perf_counter() - start
    verdict(3, not problems and secs < 10,
            f"{checked} sequences, {secs:.2f} s" + (f"; {problems[0]}" if problems else ""))


def _run_itc(name, variants, runs, iterations, tmp_path_factory):
    path = itc2007_path(name)
    out = tmp_path_factory.mktemp(f"{name}_results")
    spec = ExperimentSpec(instances=(str(path),), variants=variants, runs=runs,
                          iterations=iterations, seed=0, output=str(out), workers=WORKERS)
    records = bench(spec)
    EXPERIMENT_DIRS.append(str(out))
    return records


@pytest.mark.slow
def test_criterion_4_comp11(tmp_path_factory):
    if itc2007_path("comp11") is None:
        missing_instance(4, "comp11")
    records = _run_itc("comp11", ("glbop",), 10, 10**6, tmp_path_factory)
    hits = sum(r.allocation == (0,) * 13 for r in records)
    worst = max((r.allocation for r in records), key=lambda a: a)
    verdict(4, hits >= 8 and len(records) == 10,
            f"{hits}/10 glbop runs reach {format_compressed((0,) * 13)} (worst {format_compressed(worst)})")


@pytest.mark.slow
def test_criterion_6_directional(tmp_path_factory):
    if itc2007_path("comp01") is None:
        missing_instance(6, "comp01")
    records = _run_itc("comp01", ("glbop", "lsap"), 20, 10**5, tmp_path_factory)
    ranks = {v: [r.rank for r in records if r.variant == v] for v in ("glbop", "lsap")}
    mean = {v: sum(x) / len(x) for v, x in ranks.items()}
    lsap_better = wilcoxon_one_sided(ranks["lsap"], ranks["glbop"], alpha=0.01)
    ok = mean["glbop"] <= mean["lsap"] and not lsap_better.significant
    verdict(6, ok, f"mean rank glbop {mean['glbop']:.4g} vs lsap {mean['lsap']:.4g}; "
                   f"p(lsap better) = {lsap_better.p_value:.3g} ({lsap_better.method})")


def test_criterion_7_wilcoxon():
    # only library calls are timed; the enumeration oracle is not
    secs = 0.0
    start = time.perf_counter()
    p = wilcoxon_one_sided([1, 2, 3], [10, 11, 12]).p_value
    secs += time.perf_counter() - start
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        pool = rng.permutation(10**6)[:16]
        a, b = list(pool[:8]), list(pool[8:])
        start = time.perf_counter()
        approx = wilcoxon_one_sided(a, b, method="normal").p_value
        exact = wilcoxon_one_sided(a, b, method="exact").p_value
        secs += time.perf_counter() - start
        oracle = brute_force_rank_sum_p(a, b)
        worst = max(worst, abs(oracle - approx))
        if abs(exact - oracle) > 1e-12:
            worst = float("inf")
    verdict(7, abs(p - 0.05) < 1e-12 and worst <= 0.01 and secs < 1,
            f"exact p = {p:.6f}; max |normal - exact| = {worst:.4f} over 100 8+8 samples; {secs:.2f} s")


def test_criterion_8_format_fidelity():
    rows = reference_rows()
    bad_strings = []
    cells = 0
    for cells_of in rows.values():
        for cell in cells_of:
            cells += 1
            truncated = is_truncated(cell)
            values = parse_compressed(cell, partial=truncated)
            printed = format_compressed(values, latex=True, truncated=truncated)
            bare = re.sub(r"^\$(\\bf\s*)?|\$$", "", cell).strip()  # drop math-mode and bold
            if printed != bare or parse_compressed(printed, partial=truncated) != values:
                bad_strings.append(cell)
    strings = f"{cells - len(bad_strings)}/{cells} table strings round-trip"
    missing = [n for n in ITC if itc2007_path(n) is None]
    if missing:
        verdict(8, False, f"{strings}; {len(missing)}/21 instances missing from {itc2007_dir()}")
    counts = {n: len(load_instance(itc2007_path(n)).curricula) for n in ITC}
    ok = not bad_strings and counts["comp01"] == 14 and counts["comp11"] == 13
    verdict(8, ok, f"{strings}; 21/21 instances parse; curricula comp01={counts['comp01']} "
                   f"comp11={counts['comp11']}")


# runs last so that the competition experiments above, when present, are included
def test_criterion_5_feasible_fixpoint(tmp_path_factory):
    base = tmp_path_factory.mktemp("synthetic")
    paths = []
    for seed in range(3):
        inst = generate(SynthSpec(), seed=seed, name=f"synthetic{seed}")
        p = base / f"synthetic{seed}.ctt"
        p.write_text(format_instance(inst))
        paths.append(str(p))
    out = base / "results"
    bench(ExperimentSpec(instances=tuple(paths), runs=4, iterations=20_000, seed=1,
                         output=str(out), workers=WORKERS))
    from mmfctt.harness import load_records
    from pathlib import Path

    problems = []
    checked = periods = 0
    for d in [str(out)] + EXPERIMENT_DIRS:
        for r in load_records(d):
            inst = load_instance(r.instance_path)
            t = parse_solution((Path(d) / r.solution).read_text(), inst)
            checked += 1
            if validate_hard(inst, t):
                problems.append(f"{r.key} infeasible")
                continue
            alloc = allocation(inst, t).sorted
            if alloc != r.allocation:
                problems.append(f"{r.key} allocation differs from record")
            for p in range(inst.periods):
                periods += 1
                if leximax_compare(allocation(inst, solve_rooms_glbop(inst, t, p)).sorted, alloc) < 0:
                    problems.append(f"{r.key} period {p} improvable")
    verdict(5, not problems and checked > 0,
            f"{checked} timetables feasible, {periods} period re-solves never improve"
            + (f"; {problems[0]}" if problems else ""))


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
