"""Room assignment for a single period.

With the periods of all lectures fixed, assigning rooms to the courses taught
in period ``p`` only changes the costs of the curricula containing those
courses.  Each (course, room) edge carries the multiset of resulting
curriculum costs; the leximax-best matching is found exactly by
:func:`mmfctt.assignment.solve_glbop`.  The scalar baseline sums the same
items and solves a plain assignment problem.
"""

from __future__ import annotations

from dataclasses import dataclass

from mmfctt.assignment import GlbopInstance, Matching, solve_glbop, solve_lsap
from mmfctt.cbctt import DEFAULT_WEIGHTS, Instance, Timetable, Weights, allocation
from mmfctt.fairness import WeightMultiset

__all__ = [
    "PeriodSubproblem",
    "build_subproblem",
    "scalarize",
    "solve_rooms_glbop",
    "solve_rooms_lsap",
    "room_dependent_cost",
]


@dataclass(frozen=True)
class PeriodSubproblem:
    period: int
    courses: tuple[str, ...]
    rooms: tuple[str, ...]
    lectures: tuple[tuple[str, int], ...]
    edge_weights: tuple[tuple[WeightMultiset, ...], ...]
    scalar_costs: tuple[tuple[int, ...], ...]

    def glbop(self) -> GlbopInstance:
        return GlbopInstance(self.edge_weights)


def scalarize(w: WeightMultiset) -> int:
    """Scalar cost of an edge for the sum-objective baseline."""
    return sum(w.items)


def room_dependent_cost(instance: Instance, rooms_used: list[str], students: int,
                        weights: Weights = DEFAULT_WEIGHTS) -> int:
    """Weighted room-capacity plus room-stability penalty of one course."""
    s1 = sum(max(0, students - instance.room_by_id[r].capacity) for r in rooms_used)
    s4 = max(0, len(set(rooms_used)) - 1)
    return weights.room_capacity * s1 + weights.room_stability * s4


def build_subproblem(instance: Instance, t: Timetable, p: int,
                     weights: Weights = DEFAULT_WEIGHTS) -> PeriodSubproblem:
    if not 0 <= p < instance.periods:
        raise ValueError(f"period {p} out of range 0..{instance.periods - 1}")
    lectures = tuple(sorted(k for k, (per, _) in t.placement.items() if per == p))
    courses = tuple(c for c, _ in lectures)
    if len(set(courses)) != len(courses):
        raise ValueError(f"period {p} holds two lectures of one course")
    rooms = tuple(r.id for r in instance.rooms)
    if len(lectures) > len(rooms):
        raise ValueError(f"period {p} holds more lectures than there are rooms")

    # curriculum costs of the current timetable; only the room-dependent part
    # of the moved course changes when its lecture in p changes room
    base = allocation(instance, t, weights, check=False).per_curriculum
    room_lists: dict[str, list[str]] = {c: [] for c in courses}
    for (c, idx), (per, r) in sorted(t.placement.items()):
        if c in room_lists and per != p:
            room_lists[c].append(r)

    edge_weights = []
    scalar = []
    for (c, idx) in lectures:
        course = instance.course_by_id[c]
        others = room_lists[c]
        current_room = t.placement[(c, idx)][1]
        current = room_dependent_cost(instance, others + [current_room], course.students, weights)
        row_w = []
        row_s = []
        for r in rooms:
            delta = room_dependent_cost(instance, others + [r], course.students, weights) - current
            w = WeightMultiset(base[u] + delta for u in instance.curricula_of[c])
            row_w.append(w)
            row_s.append(scalarize(w))
        edge_weights.append(tuple(row_w))
        scalar.append(tuple(row_s))
    return PeriodSubproblem(p, courses, rooms, lectures, tuple(edge_weights), tuple(scalar))


def _apply(t: Timetable, sub: PeriodSubproblem, matching: Matching) -> Timetable:
    placement = dict(t.placement)
    for i, j in matching.pairs():
        key = sub.lectures[i]
        placement[key] = (sub.period, sub.rooms[j])
    return Timetable(placement, t.periods_per_day)


def solve_rooms_glbop(instance: Instance, t: Timetable, p: int,
                      weights: Weights = DEFAULT_WEIGHTS) -> Timetable:
    """Leximax-optimal rooms for period ``p``; everything else untouched."""
    sub = build_subproblem(instance, t, p, weights)
    if not sub.lectures:
        return Timetable(t.placement, t.periods_per_day)
    matching, _ = solve_glbop(sub.glbop())
    return _apply(t, sub, matching)


def solve_rooms_lsap(instance: Instance, t: Timetable, p: int,
                     weights: Weights = DEFAULT_WEIGHTS) -> Timetable:
    """Rooms for period ``p`` minimizing the summed edge costs."""
    sub = build_subproblem(instance, t, p, weights)
    if not sub.lectures:
        return Timetable(t.placement, t.periods_per_day)
    matching, _ = solve_lsap(sub.scalar_costs)
    return _apply(t, sub, matching)
