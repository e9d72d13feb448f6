"""Curriculum-based course timetabling model (ITC2007 track 3).

Instances are parsed from the competition text format (``.ctt`` and the
extended ``.ectt``).  A timetable places every lecture of every course in a
``(period, room)`` resource; periods are numbered ``day * periods_per_day +
slot``.  This module is the readable reference evaluator; the annealing
engine keeps an incremental copy of the same cost model.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, NamedTuple

from mmfctt.fairness import sort_allocation

log = logging.getLogger(__name__)

__all__ = [
    "Course",
    "Room",
    "Curriculum",
    "Instance",
    "InstanceFormatError",
    "InfeasibleTimetableError",
    "Timetable",
    "Violation",
    "Weights",
    "SoftCosts",
    "Allocation",
    "parse_instance",
    "load_instance",
    "format_instance",
    "validate_hard",
    "soft_costs",
    "allocation",
    "course_penalties",
    "curriculum_isolation",
    "write_solution",
    "parse_solution",
]


class InstanceFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InfeasibleTimetableError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:3])
        more = "" if len(self.violations) <= 3 else f" (+{len(self.violations) - 3} more)"
        super().__init__(f"timetable violates hard constraints: {head}{more}")


@dataclass(frozen=True)
class Course:
    id: str
    teacher: str
    lectures: int
    min_days: int
    students: int


@dataclass(frozen=True)
class Room:
    id: str
    capacity: int


@dataclass(frozen=True)
class Curriculum:
    id: str
    courses: tuple[str, ...]


@dataclass(frozen=True)
class Instance:
    name: str
    courses: tuple[Course, ...]
    rooms: tuple[Room, ...]
    days: int
    periods_per_day: int
    curricula: tuple[Curriculum, ...]
    unavailability: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        ids = {c.id for c in self.courses}
        if len(ids) != len(self.courses):
            raise ValueError("duplicate course id")
        if len({r.id for r in self.rooms}) != len(self.rooms):
            raise ValueError("duplicate room id")
        for u in self.curricula:
            for c in u.courses:
                if c not in ids:
                    raise ValueError(f"curriculum {u.id} references unknown course {c}")
        for c, p in self.unavailability:
            if c not in ids:
                raise ValueError(f"unavailability references unknown course {c}")
            if not 0 <= p < self.periods:
                raise ValueError(f"unavailability period {p} out of range")

    @property
    def periods(self) -> int:
        return self.days * self.periods_per_day

    @property
    def n_lectures(self) -> int:
        return sum(c.lectures for c in self.courses)

    @cached_property
    def course_by_id(self) -> dict[str, Course]:
        return {c.id: c for c in self.courses}

    @cached_property
    def room_by_id(self) -> dict[str, Room]:
        return {r.id: r for r in self.rooms}

    @cached_property
    def curricula_of(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {c.id: [] for c in self.courses}
        for u in self.curricula:
            for c in u.courses:
                if u.id not in out[c]:
                    out[c].append(u.id)
        return {k: tuple(v) for k, v in out.items()}

    def conflicts(self, a: str, b: str) -> bool:
        """Whether two courses may not share a period."""
        if a == b:
            return True
        ca, cb = self.course_by_id[a], self.course_by_id[b]
        if ca.teacher == cb.teacher:
            return True
        return bool(set(self.curricula_of[a]) & set(self.curricula_of[b]))


# -- parsing ---------------------------------------------------------------

_HEADER_KEYS = {
    "name": "Name",
    "courses": "Courses",
    "rooms": "Rooms",
    "days": "Days",
    "periods_per_day": "Periods_per_day",
    "curricula": "Curricula",
    "constraints": "Constraints",
    "unavailabilityconstraints": "UnavailabilityConstraints",
    "roomconstraints": "RoomConstraints",
    "min_max_daily_lectures": "Min_Max_Daily_Lectures",
}
_SECTIONS = ("COURSES:", "ROOMS:", "CURRICULA:", "UNAVAILABILITY_CONSTRAINTS:", "ROOM_CONSTRAINTS:")


def _int(tok: str, lineno: int, what: str) -> int:
    try:
        value = int(tok)
    except ValueError:
        raise InstanceFormatError(f"expected integer {what}, got {tok!r}", lineno) from None
    if value < 0:
        raise InstanceFormatError(f"{what} must be non-negative, got {value}", lineno)
    return value


def parse_instance(text: str | bytes) -> Instance:
    """Parse an ITC2007 track-3 instance (``.ctt`` or ``.ectt``)."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    header: dict[str, tuple[str, int]] = {}
    sections: dict[str, list[tuple[int, list[str]]]] = {}
    current = None
    ended = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if ended:
            raise InstanceFormatError("content after END.", lineno)
        if line == "END.":
            ended = True
            continue
        if line in _SECTIONS:
            current = line[:-1]
            if current in sections:
                raise InstanceFormatError(f"duplicate section {line}", lineno)
            sections[current] = []
            continue
        if current is None:
            key, sep, value = line.partition(":")
            if not sep:
                raise InstanceFormatError(f"malformed header line {line!r}", lineno)
            canon = _HEADER_KEYS.get(key.strip().lower())
            if canon is None:
                log.warning("line %d: ignoring unknown header %r", lineno, key.strip())
                continue
            header[canon] = (value.strip(), lineno)
            continue
        sections[current].append((lineno, line.split()))
    if not ended:
        raise InstanceFormatError("missing END. terminator")

    for key in ("Name", "Courses", "Rooms", "Days", "Periods_per_day", "Curricula"):
        if key not in header:
            raise InstanceFormatError(f"missing header {key}:")

    def count(key: str) -> int:
        value, lineno = header[key]
        return _int(value, lineno, key)

    n_courses, n_rooms, n_curricula = count("Courses"), count("Rooms"), count("Curricula")
    days, ppd = count("Days"), count("Periods_per_day")
    if days < 1 or ppd < 1:
        raise InstanceFormatError("Days and Periods_per_day must be positive", header["Days"][1])
    if "Constraints" in header:
        n_unav = count("Constraints")
    elif "UnavailabilityConstraints" in header:
        n_unav = count("UnavailabilityConstraints")
    else:
        raise InstanceFormatError("missing header Constraints: / UnavailabilityConstraints:")
    if "ROOM_CONSTRAINTS" in sections and sections["ROOM_CONSTRAINTS"]:
        log.warning("ignoring %d room constraints (extended format only)",
                    len(sections["ROOM_CONSTRAINTS"]))
    if "Min_Max_Daily_Lectures" in header:
        log.debug("ignoring Min_Max_Daily_Lectures (extended format only)")

    courses = []
    for lineno, toks in sections.get("COURSES", []):
        if len(toks) not in (5, 6):
            raise InstanceFormatError(f"course line needs 5 or 6 fields, got {len(toks)}", lineno)
        courses.append(Course(
            id=toks[0],
            teacher=toks[1],
            lectures=_int(toks[2], lineno, "lecture count"),
            min_days=_int(toks[3], lineno, "min working days"),
            students=_int(toks[4], lineno, "student count"),
        ))
    if len(courses) != n_courses:
        raise InstanceFormatError(
            f"header declares {n_courses} courses, found {len(courses)}", header["Courses"][1])
    course_ids = {c.id for c in courses}
    if len(course_ids) != len(courses):
        raise InstanceFormatError("duplicate course id", header["Courses"][1])

    rooms = []
    for lineno, toks in sections.get("ROOMS", []):
        if len(toks) not in (2, 3):
            raise InstanceFormatError(f"room line needs 2 or 3 fields, got {len(toks)}", lineno)
        rooms.append(Room(toks[0], _int(toks[1], lineno, "capacity")))
    if len(rooms) != n_rooms:
        raise InstanceFormatError(
            f"header declares {n_rooms} rooms, found {len(rooms)}", header["Rooms"][1])

    curricula = []
    for lineno, toks in sections.get("CURRICULA", []):
        if len(toks) < 2:
            raise InstanceFormatError("curriculum line needs an id and a member count", lineno)
        k = _int(toks[1], lineno, "member count")
        members = toks[2:]
        if len(members) != k:
            raise InstanceFormatError(
                f"curriculum {toks[0]} declares {k} courses, lists {len(members)}", lineno)
        for m in members:
            if m not in course_ids:
                raise InstanceFormatError(f"curriculum {toks[0]} references unknown course {m}", lineno)
        curricula.append(Curriculum(toks[0], tuple(members)))
    if len(curricula) != n_curricula:
        raise InstanceFormatError(
            f"header declares {n_curricula} curricula, found {len(curricula)}", header["Curricula"][1])

    unavailable = set()
    unav_lines = sections.get("UNAVAILABILITY_CONSTRAINTS", [])
    for lineno, toks in unav_lines:
        if len(toks) != 3:
            raise InstanceFormatError(f"unavailability line needs 3 fields, got {len(toks)}", lineno)
        if toks[0] not in course_ids:
            raise InstanceFormatError(f"unavailability references unknown course {toks[0]}", lineno)
        day = _int(toks[1], lineno, "day")
        slot = _int(toks[2], lineno, "period")
        if day >= days or slot >= ppd:
            raise InstanceFormatError(f"unavailability ({day}, {slot}) out of range", lineno)
        unavailable.add((toks[0], day * ppd + slot))
    if len(unav_lines) != n_unav:
        raise InstanceFormatError(
            f"header declares {n_unav} unavailability constraints, found {len(unav_lines)}")

    return Instance(
        name=header["Name"][0],
        courses=tuple(courses),
        rooms=tuple(rooms),
        days=days,
        periods_per_day=ppd,
        curricula=tuple(curricula),
        unavailability=frozenset(unavailable),
    )


def load_instance(path: str | Path) -> Instance:
    return parse_instance(Path(path).read_bytes())


def format_instance(instance: Instance) -> str:
    """Serialize in the plain ``.ctt`` format."""
    ppd = instance.periods_per_day
    out = [
        f"Name: {instance.name}",
        f"Courses: {len(instance.courses)}",
        f"Rooms: {len(instance.rooms)}",
        f"Days: {instance.days}",
        f"Periods_per_day: {ppd}",
        f"Curricula: {len(instance.curricula)}",
        f"Constraints: {len(instance.unavailability)}",
        "",
        "COURSES:",
    ]
    out += [f"{c.id} {c.teacher} {c.lectures} {c.min_days} {c.students}" for c in instance.courses]
    out += ["", "ROOMS:"]
    out += [f"{r.id} {r.capacity}" for r in instance.rooms]
    out += ["", "CURRICULA:"]
    out += [f"{u.id} {len(u.courses)} {' '.join(u.courses)}".rstrip() for u in instance.curricula]
    out += ["", "UNAVAILABILITY_CONSTRAINTS:"]
    order = {c.id: k for k, c in enumerate(instance.courses)}
    for c, p in sorted(instance.unavailability, key=lambda x: (order[x[0]], x[1])):
        out.append(f"{c} {p // ppd} {p % ppd}")
    out += ["", "END.", ""]
    return "\n".join(out)


# -- timetables -------------------------------------------------------------

class Timetable:
    """Placement of lectures ``(course id, index)`` to ``(period, room id)``.

    Lectures of one course are interchangeable, so equality compares the
    canonical form in which a course's lectures are numbered by period.
    """

    __slots__ = ("placement", "periods_per_day")

    def __init__(self, placement: Mapping[tuple[str, int], tuple[int, str]], periods_per_day: int):
        self.placement = dict(placement)
        self.periods_per_day = periods_per_day

    @classmethod
    def from_lectures(cls, lectures, periods_per_day: int) -> Timetable:
        """Build from ``(course id, period, room id)`` triples."""
        by_course = defaultdict(list)
        for course, period, room in lectures:
            by_course[course].append((period, room))
        placement = {}
        for course, slots in by_course.items():
            for k, slot in enumerate(sorted(slots)):
                placement[(course, k)] = slot
        return cls(placement, periods_per_day)

    def lectures(self) -> list[tuple[str, int, str]]:
        return [(c, p, r) for (c, _), (p, r) in self.placement.items()]

    def canonical(self) -> Timetable:
        return Timetable.from_lectures(self.lectures(), self.periods_per_day)

    def _key(self):
        return sorted(self.lectures())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Timetable):
            return NotImplemented
        return self.periods_per_day == other.periods_per_day and self._key() == other._key()

    def __hash__(self):
        return hash((self.periods_per_day, tuple(self._key())))

    def __len__(self) -> int:
        return len(self.placement)

    def period_courses(self, period: int) -> list[tuple[str, int]]:
        return sorted(k for k, (p, _) in self.placement.items() if p == period)

    def __repr__(self) -> str:
        return f"Timetable({len(self.placement)} lectures)"


@dataclass(frozen=True)
class Violation:
    constraint: str
    entities: tuple
    period: int | None = None

    def __str__(self) -> str:
        where = f" in period {self.period}" if self.period is not None else ""
        return f"{self.constraint}: {', '.join(map(str, self.entities))}{where}"


def validate_hard(instance: Instance, t: Timetable) -> list[Violation]:
    """All hard-constraint violations; empty iff the timetable is feasible."""
    out: list[Violation] = []
    placed = Counter()
    slots = defaultdict(list)  # period -> [(course, room)]
    for (course, idx), (period, room) in sorted(t.placement.items()):
        if course not in instance.course_by_id:
            out.append(Violation("Lectures", (course, "unknown course")))
            continue
        if not 0 <= idx < instance.course_by_id[course].lectures:
            out.append(Violation("Lectures", (course, f"lecture index {idx} out of range")))
        if not 0 <= period < instance.periods:
            out.append(Violation("Lectures", (course, f"period {period} out of range")))
            continue
        if room not in instance.room_by_id:
            out.append(Violation("Lectures", (course, f"unknown room {room}"), period))
            continue
        placed[course] += 1
        slots[period].append((course, room))
    for c in instance.courses:
        if placed[c.id] != c.lectures:
            out.append(Violation("Lectures", (c.id, f"{placed[c.id]} of {c.lectures} lectures placed")))
    for period in sorted(slots):
        entries = slots[period]
        rooms = Counter(r for _, r in entries)
        for r, k in sorted(rooms.items()):
            if k > 1:
                out.append(Violation("RoomOccupancy", (r, f"{k} lectures"), period))
        courses = Counter(c for c, _ in entries)
        for c, k in sorted(courses.items()):
            if k > 1:
                out.append(Violation("Conflicts", (c, "same course twice"), period))
            if (c, period) in instance.unavailability:
                out.append(Violation("Availability", (c,), period))
        distinct = sorted(courses)
        for i, a in enumerate(distinct):
            for b in distinct[i + 1:]:
                ca, cb = instance.course_by_id[a], instance.course_by_id[b]
                if ca.teacher == cb.teacher:
                    out.append(Violation("Conflicts", (a, b, f"teacher {ca.teacher}"), period))
                shared = set(instance.curricula_of[a]) & set(instance.curricula_of[b])
                for u in sorted(shared):
                    out.append(Violation("Conflicts", (a, b, f"curriculum {u}"), period))
    return out


# -- soft costs ----------------------------------------------------------

@dataclass(frozen=True)
class Weights:
    """Per-violation weights of the four soft constraints."""

    room_capacity: int = 1
    min_working_days: int = 5
    isolated_lectures: int = 2
    room_stability: int = 1

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.room_capacity, self.min_working_days,
                self.isolated_lectures, self.room_stability)


DEFAULT_WEIGHTS = Weights()


class SoftCosts(NamedTuple):
    room_capacity: int
    min_working_days: int
    isolated_lectures: int
    room_stability: int
    total: int


@dataclass(frozen=True)
class Allocation:
    """Cost borne by each curriculum."""

    per_curriculum: dict

    @property
    def sorted(self) -> tuple[int, ...]:
        return sort_allocation(self.per_curriculum.values())

    def __len__(self) -> int:
        return len(self.per_curriculum)


def _require_feasible(instance: Instance, t: Timetable) -> None:
    violations = validate_hard(instance, t)
    if violations:
        raise InfeasibleTimetableError(violations)


def course_penalties(instance: Instance, t: Timetable,
                     weights: Weights = DEFAULT_WEIGHTS) -> dict[str, tuple[int, int, int]]:
    """Weighted (room capacity, min working days, room stability) per course."""
    lectures = defaultdict(list)
    for (course, _), (period, room) in t.placement.items():
        lectures[course].append((period, room))
    out = {}
    for c in instance.courses:
        mine = lectures[c.id]
        s1 = sum(max(0, c.students - instance.room_by_id[r].capacity) for _, r in mine)
        n_days = len({p // instance.periods_per_day for p, _ in mine})
        s2 = max(0, c.min_days - n_days)
        s4 = max(0, len({r for _, r in mine}) - 1)
        out[c.id] = (weights.room_capacity * s1, weights.min_working_days * s2,
                     weights.room_stability * s4)
    return out


def curriculum_isolation(instance: Instance, t: Timetable,
                         weights: Weights = DEFAULT_WEIGHTS) -> dict[str, int]:
    """Weighted isolated-lecture penalty of each curriculum."""
    periods = defaultdict(set)
    for (course, _), (period, _) in t.placement.items():
        periods[course].add(period)
    ppd = instance.periods_per_day
    out = {}
    for u in instance.curricula:
        occupied = Counter()
        for c in u.courses:
            for p in periods[c]:
                occupied[p] += 1
        isolated = 0
        for p, k in occupied.items():
            slot = p % ppd
            before = slot > 0 and occupied[p - 1] > 0
            after = slot < ppd - 1 and occupied[p + 1] > 0
            if not before and not after:
                isolated += k
        out[u.id] = weights.isolated_lectures * isolated
    return out


def soft_costs(instance: Instance, t: Timetable, weights: Weights = DEFAULT_WEIGHTS,
               check: bool = True) -> SoftCosts:
    """Weighted soft-constraint penalties and their sum."""
    if check:
        _require_feasible(instance, t)
    per_course = course_penalties(instance, t, weights)
    s1 = sum(v[0] for v in per_course.values())
    s2 = sum(v[1] for v in per_course.values())
    s4 = sum(v[2] for v in per_course.values())
    s3 = sum(curriculum_isolation(instance, t, weights).values())
    return SoftCosts(s1, s2, s3, s4, s1 + s2 + s3 + s4)


def allocation(instance: Instance, t: Timetable, weights: Weights = DEFAULT_WEIGHTS,
               check: bool = True) -> Allocation:
    """Per-curriculum cost: member courses' penalties plus own isolation penalty."""
    if check:
        _require_feasible(instance, t)
    per_course = course_penalties(instance, t, weights)
    iso = curriculum_isolation(instance, t, weights)
    out = {}
    for u in instance.curricula:
        out[u.id] = iso[u.id] + sum(sum(per_course[c]) for c in u.courses)
    return Allocation(out)


# -- solution files -------------------------------------------------------

def write_solution(t: Timetable) -> str:
    """One ``CourseID RoomID Day Period`` line per lecture."""
    ppd = t.periods_per_day
    lines = []
    for course, period, room in sorted(t.lectures()):
        lines.append(f"{course} {room} {period // ppd} {period % ppd}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_solution(text: str, instance: Instance) -> Timetable:
    lectures = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split()
        if not toks:
            continue
        if len(toks) != 4:
            raise InstanceFormatError(f"solution line needs 4 fields, got {len(toks)}", lineno)
        day = _int(toks[2], lineno, "day")
        slot = _int(toks[3], lineno, "period")
        if slot >= instance.periods_per_day or day >= instance.days:
            raise InstanceFormatError(f"({day}, {slot}) is not a valid period", lineno)
        lectures.append((toks[0], day * instance.periods_per_day + slot, toks[1]))
    return Timetable.from_lectures(lectures, instance.periods_per_day)
