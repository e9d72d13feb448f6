import subprocess
import sys

import pytest

from mmfctt.cbctt import format_instance, load_instance, parse_solution, validate_hard
from mmfctt.cli import main
from mmfctt.fairness import parse_compressed
from mmfctt.synth import tiny_instance


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "tiny.ctt"
    path.write_text(format_instance(tiny_instance(4)))
    return path


def test_validate(instance_file, capsys):
    assert main(["validate", str(instance_file)]) == 0
    assert "courses" in capsys.readouterr().out


def test_solve_then_validate(instance_file, tmp_path, capsys):
    sol = tmp_path / "out.sol"
    assert main(["solve", str(instance_file), "--iters", "500", "--seed", "3",
                 "--out", str(sol), "-v"]) == 0
    printed = capsys.readouterr().out.strip().splitlines()[-1]
    inst = load_instance(instance_file)
    t = parse_solution(sol.read_text(), inst)
    assert not validate_hard(inst, t)
    assert main(["validate", str(instance_file), "--solution", str(sol)]) == 0
    out = capsys.readouterr().out
    assert f"allocation {printed}" in out
    assert len(parse_compressed(printed)) == len(inst.curricula)


def test_solve_deterministic(instance_file, capsys):
    args = ["solve", str(instance_file), "--iters", "400", "--seed", "9", "--variant", "lsap"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first


def test_infeasible_solution_exit_1(instance_file, tmp_path, capsys):
    sol = tmp_path / "bad.sol"
    sol.write_text("")
    assert main(["validate", str(instance_file), "--solution", str(sol)]) == 1
    assert "violation" in capsys.readouterr().err


def test_bad_inputs_exit_2(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "missing.ctt")]) == 2
    bad = tmp_path / "bad.ctt"
    bad.write_text("Name: x\nCourses: banana\n")
    assert main(["validate", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["report", str(tmp_path)]) == 2


def test_bench_and_report(instance_file, tmp_path, capsys):
    spec = tmp_path / "exp.txt"
    spec.write_text(f"instances = {instance_file.name}\nruns = 4\niterations = 400\nseed = 2\n")
    out = tmp_path / "res"
    assert main(["bench", str(spec), "--scale", "2", "--workers", "1", "--output", str(out)]) == 0
    assert "4 records" in capsys.readouterr().out  # 2 runs x 2 variants
    assert main(["report", str(out), "--verify", "--latex"]) == 0
    text = capsys.readouterr().out
    assert "synth4" in text and "verified 4 solutions: ok" in text
    assert (out / "summary.json").exists() and (out / "report.txt").exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mmfctt", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("mmfctt")
    res = subprocess.run([sys.executable, "-m", "mmfctt"], capture_output=True, text=True)
    assert res.returncode == 2
