import os
import re
from pathlib import Path

import pytest

from mmfctt.cbctt import Course, Curriculum, Instance, Room, Timetable

DATA = Path(__file__).parent / "data"
REPO = Path(__file__).resolve().parent.parent


def itc2007_dir() -> Path:
    return Path(os.environ.get("MMFCTT_ITC2007_DIR", REPO / "data" / "itc2007"))


def itc2007_path(name: str) -> Path | None:
    base = itc2007_dir()
    for ext in (".ectt", ".ctt"):
        p = base / f"{name}{ext}"
        if p.exists():
            return p
    return None


def reference_rows() -> dict[str, list[str]]:
    """Instance name -> [glbop best, glbop avg, lsap best, lsap avg] strings."""
    rows = {}
    for line in (DATA / "reference_allocations.tex").read_text().splitlines():
        line = line.replace(r"\tabularnewline", "").strip()
        if not line:
            continue
        cells = [c.strip() for c in line.split("&")]
        name = re.sub(r"\\tt\{(\w+)\.ectt\}", r"\1", cells[0])
        rows[name] = cells[1:]
    return rows


def room_example():
    """Two courses in period 0 whose (course, room) cost pattern is

    e1-r1 {5}, e1-r2 {7}, e2-r1 {5,4}, e2-r2 {7,6}.

    e1 (13 students) is alone and isolated in its curriculum; r2 seats two
    fewer students than r1.  e2's curricula are completed by e4 (a missing
    working day, 5) and e5 (4 students over capacity) in the adjacent period.
    """
    courses = (
        Course("e1", "t1", 1, 1, 13),
        Course("e2", "t2", 1, 1, 10),
        Course("e4", "t4", 1, 2, 10),
        Course("e5", "t5", 1, 1, 12),
    )
    rooms = (Room("r1", 10), Room("r2", 8))
    curricula = (
        Curriculum("u1", ("e1",)),
        Curriculum("u2", ("e2", "e4")),
        Curriculum("u3", ("e2", "e5")),
    )
    inst = Instance("roomexample", courses, rooms, 2, 2, curricula)
    t = Timetable({
        ("e1", 0): (0, "r1"),
        ("e2", 0): (0, "r2"),
        ("e4", 0): (1, "r1"),
        ("e5", 0): (1, "r2"),
    }, 2)
    return inst, t


@pytest.fixture
def room_instance():
    return room_example()


def pytest_terminal_summary(terminalreporter):
    results = getattr(__import__("sys").modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, message = results[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {message}")
