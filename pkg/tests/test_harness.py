import json

import numpy as np
import pytest
from scipy import stats

from mmfctt.cbctt import format_instance
from mmfctt.fairness import leximax_compare, parse_compressed, rank, unrank
from mmfctt.harness import (
    ExperimentSpec,
    RunRecord,
    aggregate,
    bench,
    brute_force_rank_sum_p,
    derive_seed,
    load_records,
    parse_spec,
    rank_sum_exact_p,
    report,
    wilcoxon_one_sided,
)
from mmfctt.synth import SynthSpec, generate

SMALL = SynthSpec(courses=10, rooms=3, days=2, periods_per_day=4, curricula=5, teachers=8,
                  max_lectures=3, curriculum_size=(2, 3))


class TestWilcoxon:
    def test_exact_example(self):
        res = wilcoxon_one_sided([1, 2, 3], [10, 11, 12], alpha=0.01)
        assert res.method == "exact"
        assert res.p_value == pytest.approx(0.05, abs=1e-12)
        assert not res.significant
        assert wilcoxon_one_sided([1, 2, 3], [10, 11, 12], alpha=0.1).significant

    def test_identical_samples(self):
        res = wilcoxon_one_sided([4, 5, 6], [4, 5, 6])
        assert not res.significant and res.p_value > 0.5

    def test_empty(self):
        with pytest.raises(ValueError):
            wilcoxon_one_sided([], [1])

    def test_exact_against_enumeration_and_scipy(self):
        rng = np.random.default_rng(0)
        for _ in range(60):
            n1, n2 = int(rng.integers(1, 8)), int(rng.integers(1, 8))
            pool = rng.permutation(100)[: n1 + n2]
            a, b = list(pool[:n1]), list(pool[n1:])
            res = wilcoxon_one_sided(a, b, method="exact")
            assert res.p_value == pytest.approx(brute_force_rank_sum_p(a, b), abs=1e-12)
            ref = stats.mannwhitneyu(a, b, alternative="less", method="exact").pvalue
            assert res.p_value == pytest.approx(ref, abs=1e-12)

    def test_normal_against_scipy_with_ties(self):
        rng = np.random.default_rng(1)
        for _ in range(60):
            a = list(rng.integers(0, 8, int(rng.integers(3, 30))))
            b = list(rng.integers(0, 8, int(rng.integers(3, 30))))
            if len(set(a + b)) == 1:
                continue
            res = wilcoxon_one_sided(a, b, method="normal")
            ref = stats.mannwhitneyu(a, b, alternative="less", method="asymptotic",
                                     use_continuity=True).pvalue
            assert res.p_value == pytest.approx(ref, abs=1e-9)

    def test_approximation_close_to_exact_8_8(self):
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(300):
            pool = rng.permutation(1000)[:16]
            a, b = list(pool[:8]), list(pool[8:])
            exact = wilcoxon_one_sided(a, b, method="exact").p_value
            approx = wilcoxon_one_sided(a, b, method="normal").p_value
            worst = max(worst, abs(exact - approx))
        assert worst < 0.01

    def test_auto_switches_on_ties_and_size(self):
        assert wilcoxon_one_sided([1, 2], [2, 3]).method == "normal"
        assert wilcoxon_one_sided(list(range(11)), list(range(20, 30))).method == "normal"
        assert wilcoxon_one_sided(list(range(10)), list(range(20, 30))).method == "exact"
        with pytest.raises(ValueError):
            wilcoxon_one_sided([1, 2], [2, 3], method="exact")

    def test_big_integer_ranks(self):
        base = 2**200
        a = [base + k for k in range(5)]
        b = [base + 10 + k for k in range(5)]
        assert wilcoxon_one_sided(a, b).p_value == pytest.approx(1 / 252)

    def test_distribution_sums_to_one(self):
        assert rank_sum_exact_p(10**6, 6, 7) == pytest.approx(1.0)
        assert rank_sum_exact_p(20, 6, 7) == 0.0


def record(alloc, run=0, variant="glbop", instance="x"):
    alloc = tuple(sorted(alloc, reverse=True))
    return RunRecord(instance, variant, run, 1, alloc, rank(alloc), 10, 1.0)


class TestAggregate:
    def test_single(self):
        best, avg = aggregate([record((3, 1))])
        assert best == avg == (3, 1)

    def test_ranks_2_and_4(self):
        best, avg = aggregate([record(unrank(2, 2)), record(unrank(4, 2), 1)])
        assert avg == (2, 0)
        assert best == unrank(2, 2)

    def test_best_is_bruteforce_min_and_below_average(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            allocs = [tuple(sorted(rng.integers(0, 7, 5), reverse=True))
                      for _ in range(int(rng.integers(1, 8)))]
            best, avg = aggregate([record(a, k) for k, a in enumerate(allocs)])
            for a in allocs:
                assert leximax_compare(best, a) <= 0
            assert best in allocs
            assert leximax_compare(best, avg) <= 0

    def test_errors(self):
        with pytest.raises(ValueError):
            aggregate([])
        with pytest.raises(ValueError):
            aggregate([(1, 0), (1,)])


class TestRecordsAndSpecs:
    def test_record_roundtrip(self):
        r = record((9, 4, 4, 0), 3)
        line = r.to_json()
        d = json.loads(line)
        assert d["allocation"] == "9,4,4,0" and d["rank"] == str(r.rank)
        assert RunRecord.from_json(line) == r

    def test_record_rank_checked(self):
        d = json.loads(record((2, 1)).to_json())
        d["rank"] = "5"
        with pytest.raises(ValueError):
            RunRecord.from_json(json.dumps(d))

    def test_seeds_disjoint(self):
        seeds = {derive_seed(0, inst, v, k)
                 for inst in ("comp01", "comp02") for v in ("glbop", "lsap") for k in range(50)}
        assert len(seeds) == 200
        assert derive_seed(0, "comp01", "glbop", 3) == derive_seed(0, "comp01", "glbop", 3)
        assert derive_seed(0, "comp01", "glbop", 3) != derive_seed(1, "comp01", "glbop", 3)

    def test_parse_spec(self, tmp_path):
        spec = parse_spec("""
            # desk run
            instances = a.ctt, b.ctt
            variants = glbop lsap
            runs = 10
            iterations = 5000
            seed = 3
            tmax = 4.5
            tmin = 0.02
            output = out
        """, base_dir=tmp_path)
        assert spec.instances == (str(tmp_path / "a.ctt"), str(tmp_path / "b.ctt"))
        assert spec.runs == 10 and spec.t_max == 4.5 and spec.output == str(tmp_path / "out")
        small = spec.scaled(4)
        assert small.runs == 2 and small.iterations == 1250
        with pytest.raises(ValueError):
            parse_spec("bogus = 1")
        with pytest.raises(ValueError):
            parse_spec("instances = a\nruns = 0")

    def test_defaults(self):
        spec = ExperimentSpec(instances=("a",))
        assert (spec.runs, spec.iterations, spec.t_max, spec.t_min) == (50, 10**6, 5.0, 0.01)


@pytest.fixture
def experiment(tmp_path):
    paths = []
    for seed in (1, 2):
        inst = generate(SMALL, seed=seed, name=f"small{seed}")
        p = tmp_path / f"small{seed}.ctt"
        p.write_text(format_instance(inst))
        paths.append(str(p))
    return ExperimentSpec(instances=tuple(paths), runs=3, iterations=300, seed=5,
                          output=str(tmp_path / "res"))


class TestBenchReport:
    def test_bench_resume_and_report(self, experiment):
        records = bench(experiment)
        assert len(records) == 12
        results = experiment.output + "/results.jsonl"
        lines = open(results).read().splitlines()
        # nothing to do on a second call
        assert len(bench(experiment)) == 12
        assert open(results).read().splitlines() == lines
        # drop two runs and tear the last line; resume fills exactly those
        with open(results, "w") as fh:
            fh.write("\n".join(lines[:-2]) + "\n" + lines[-2][:20])
        again = bench(experiment)
        assert sorted(r.key for r in again) == sorted(r.key for r in records)
        by_key = {r.key: r for r in records}
        for r in again:
            assert r.allocation == by_key[r.key].allocation  # seeds are reproducible

        text, summary = report(experiment.output, verify=True)
        assert summary["verify"]["problems"] == []
        text2, summary2 = report(experiment.output, verify=True)
        assert text == text2 and summary == summary2
        for name, entry in summary["instances"].items():
            for v in ("glbop", "lsap"):
                recs = [r for r in again if r.instance == name and r.variant == v]
                best, avg = aggregate(recs)
                assert parse_compressed(entry[v]["best"]) == best
                assert parse_compressed(entry[v]["average"]) == avg
            assert "wilcoxon" in entry

    def test_parallel_matches_serial(self, experiment, tmp_path):
        from dataclasses import replace
        serial = bench(experiment)
        par = bench(replace(experiment, output=str(tmp_path / "par")), workers=2)
        key = lambda r: r.key  # noqa: E731
        assert [r.allocation for r in sorted(serial, key=key)] == \
            [r.allocation for r in sorted(par, key=key)]

    def test_report_without_records(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            report(tmp_path)

    def test_load_records_missing(self, tmp_path):
        assert load_records(tmp_path) == []
