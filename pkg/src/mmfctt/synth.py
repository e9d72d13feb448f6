"""Random instances shaped like the competition benchmarks.

Used by the tests and benchmarks where the competition files are not at
hand.  Every generated instance is feasible by construction: a hidden
timetable is drawn first and unavailabilities never hit its periods.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mmfctt.cbctt import Course, Curriculum, Instance, Room

__all__ = ["SynthSpec", "generate", "tiny_instance"]


@dataclass(frozen=True)
class SynthSpec:
    courses: int = 30
    rooms: int = 6
    days: int = 5
    periods_per_day: int = 6
    curricula: int = 14
    teachers: int = 20
    max_lectures: int = 5
    curriculum_size: tuple[int, int] = (2, 5)
    unavailable_fraction: float = 0.15
    fill: float = 0.6


def generate(spec: SynthSpec = SynthSpec(), seed: int = 0, name: str | None = None) -> Instance:
    rng = np.random.default_rng(seed)
    P = spec.days * spec.periods_per_day
    capacity = sorted((int(x) for x in rng.integers(20, 200, spec.rooms)), reverse=True)
    rooms = [Room(f"R{j}", capacity[j]) for j in range(spec.rooms)]

    budget = int(spec.fill * P * spec.rooms)
    lectures = [int(x) for x in rng.integers(1, spec.max_lectures + 1, spec.courses)]
    while sum(lectures) > budget:
        k = int(rng.integers(spec.courses))
        if lectures[k] > 1:
            lectures[k] -= 1

    # hidden timetable: each course's lectures in distinct periods, room count
    # respected; curricula and teachers are then only drawn among courses that
    # never share a period in it
    load = np.zeros(P, dtype=int)
    periods: list[set[int]] = []
    for n in lectures:
        open_p = [p for p in range(P) if load[p] < spec.rooms]
        chosen = set(int(p) for p in rng.choice(open_p, size=min(n, len(open_p)), replace=False))
        for p in chosen:
            load[p] += 1
        periods.append(chosen)
    lectures = [len(s) for s in periods]

    def compatible(group, k):
        return all(not (periods[k] & periods[g]) for g in group)

    teacher_of = [-1] * spec.courses
    members: list[list[int]] = [[] for _ in range(spec.teachers)]
    for k in rng.permutation(spec.courses):
        k = int(k)
        for t in rng.permutation(spec.teachers):
            t = int(t)
            if compatible(members[t], k):
                members[t].append(k)
                teacher_of[k] = t
                break
        else:
            members.append([k])
            teacher_of[k] = len(members) - 1

    curricula = []
    lo, hi = spec.curriculum_size
    for u in range(spec.curricula):
        size = int(rng.integers(lo, hi + 1))
        group: list[int] = []
        for k in rng.permutation(spec.courses):
            k = int(k)
            if len(group) == size:
                break
            if compatible(group, k):
                group.append(k)
        curricula.append(Curriculum(f"q{u:03d}", tuple(f"c{k:04d}" for k in sorted(group))))

    courses = []
    for k in range(spec.courses):
        n = lectures[k]
        min_days = int(rng.integers(1, n + 1)) if n else 0
        min_days = min(min_days, spec.days)
        students = int(rng.integers(10, max(capacity) + 30))
        courses.append(Course(f"c{k:04d}", f"t{teacher_of[k]:03d}", n, min_days, students))

    unavailable = set()
    for k in range(spec.courses):
        for p in range(P):
            if p not in periods[k] and rng.random() < spec.unavailable_fraction:
                unavailable.add((f"c{k:04d}", p))
    return Instance(
        name=name or f"synth{seed}",
        courses=tuple(courses),
        rooms=tuple(rooms),
        days=spec.days,
        periods_per_day=spec.periods_per_day,
        curricula=tuple(curricula),
        unavailability=frozenset(unavailable),
    )


def tiny_instance(seed: int = 0) -> Instance:
    """A few courses and rooms; small enough for exhaustive checks."""
    return generate(SynthSpec(courses=6, rooms=3, days=2, periods_per_day=3, curricula=4,
                              teachers=5, max_lectures=3, curriculum_size=(1, 3)), seed=seed)
