"""Simulated annealing over Kempe-chain moves with exact room re-solving.

A run builds a feasible timetable, then repeatedly swaps a Kempe chain
between two periods, re-solves the rooms of both periods and accepts or
rejects the result.  Allocations are compared by leximax.  The heavy loop
lives in the kernel backend (compiled or pure Python); both consume the
same 64-bit stream of a PCG64 generator and return identical results.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from mmfctt import _core_py
from mmfctt._backend import core
from mmfctt.cbctt import DEFAULT_WEIGHTS, Instance, Timetable, Weights, validate_hard
from mmfctt.fairness import leximax_compare

log = logging.getLogger(__name__)

__all__ = [
    "VARIANTS",
    "SAConfig",
    "SAResult",
    "ConstructionError",
    "Rejection",
    "EngineLayout",
    "engine_data",
    "make_engine",
    "construct_initial",
    "kempe_move",
    "accept",
    "acceptance_delta",
    "temperature",
    "run",
]

VARIANTS = {"glbop": core.GLBOP, "lsap": core.LSAP}

REJECTION_REASONS = {
    core.MOVE_UNAVAILABLE: "unavailable",
    core.MOVE_COURSE_CLASH: "course-clash",
    core.MOVE_ROOM_OVERFLOW: "room-overflow",
}


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class SAConfig:
    t_max: float = 5.0
    t_min: float = 0.01
    iterations: int = 1_000_000
    variant: str = "glbop"
    seed: int = 0
    polish: bool = True
    weights: Weights = DEFAULT_WEIGHTS

    def __post_init__(self):
        if not self.t_max > self.t_min > 0:
            raise ValueError(f"need t_max > t_min > 0, got {self.t_max}, {self.t_min}")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class SAResult:
    best_timetable: Timetable
    best_allocation: tuple[int, ...]
    iterations_run: int
    initial_allocation: tuple[int, ...]
    stats: dict = field(default_factory=dict)
    wall_seconds: float = 0.0


class Rejection(NamedTuple):
    reason: str


# -- engine data -----------------------------------------------------------

@dataclass(frozen=True)
class EngineLayout:
    """Index maps between an instance and the engine's integer arrays."""

    course_ids: tuple[str, ...]
    room_ids: tuple[str, ...]
    curriculum_ids: tuple[str, ...]
    course_first: tuple[int, ...]

    def lecture_index(self, course: str, k: int) -> int:
        return self.course_first[self.course_ids.index(course)] + k

    def to_state(self, instance: Instance, t: Timetable) -> tuple[np.ndarray, np.ndarray]:
        room_index = {r: j for j, r in enumerate(self.room_ids)}
        L = instance.n_lectures
        period = np.full(L, -1, dtype=np.int64)
        room = np.full(L, -1, dtype=np.int64)
        by_course: dict[str, list[tuple[int, str]]] = {}
        for (c, _), slot in t.placement.items():
            by_course.setdefault(c, []).append(slot)
        for e, c in enumerate(self.course_ids):
            slots = sorted(by_course.get(c, []))
            if len(slots) != instance.course_by_id[c].lectures:
                raise ValueError(f"course {c} has {len(slots)} placed lectures")
            for k, (p, r) in enumerate(slots):
                period[self.course_first[e] + k] = p
                room[self.course_first[e] + k] = room_index[r]
        return period, room

    def to_timetable(self, instance: Instance, period, room) -> Timetable:
        lectures = []
        for e, c in enumerate(self.course_ids):
            first = self.course_first[e]
            for l in range(first, first + instance.course_by_id[c].lectures):
                lectures.append((c, int(period[l]), self.room_ids[int(room[l])]))
        return Timetable.from_lectures(lectures, instance.periods_per_day)


def engine_data(instance: Instance) -> tuple[dict, EngineLayout]:
    """Flat integer arrays describing the instance for the kernel engine."""
    courses = instance.courses
    C, P = len(courses), instance.periods
    course_index = {c.id: e for e, c in enumerate(courses)}
    course_first = np.zeros(C, dtype=np.int64)
    course_nlect = np.array([c.lectures for c in courses], dtype=np.int64)
    if C:
        course_first[1:] = np.cumsum(course_nlect)[:-1]
    lect_course = np.repeat(np.arange(C, dtype=np.int64), course_nlect)

    curricula = instance.curricula
    uc_ptr = [0]
    uc_idx: list[int] = []
    for u in curricula:
        members = sorted({course_index[c] for c in u.courses})
        uc_idx.extend(members)
        uc_ptr.append(len(uc_idx))
    cc_ptr = [0]
    cc_idx: list[int] = []
    cur_index = {u.id: k for k, u in enumerate(curricula)}
    for c in courses:
        cc_idx.extend(cur_index[u] for u in instance.curricula_of[c.id])
        cc_ptr.append(len(cc_idx))

    conflict = np.zeros((C, C), dtype=np.uint8)
    for a in range(C):
        for b in range(C):
            conflict[a, b] = instance.conflicts(courses[a].id, courses[b].id)
    unavailable = np.zeros((C, P), dtype=np.uint8)
    for c, p in instance.unavailability:
        unavailable[course_index[c], p] = 1

    data = {
        "n_lectures": int(course_nlect.sum()),
        "n_courses": C,
        "n_rooms": len(instance.rooms),
        "n_periods": P,
        "n_curricula": len(curricula),
        "periods_per_day": instance.periods_per_day,
        "lect_course": lect_course,
        "course_first": course_first,
        "course_nlect": course_nlect,
        "students": np.array([c.students for c in courses], dtype=np.int64),
        "min_days": np.array([c.min_days for c in courses], dtype=np.int64),
        "cc_ptr": np.array(cc_ptr, dtype=np.int64),
        "cc_idx": np.array(cc_idx, dtype=np.int64),
        "uc_ptr": np.array(uc_ptr, dtype=np.int64),
        "uc_idx": np.array(uc_idx, dtype=np.int64),
        "conflict": conflict.ravel(),
        "unavailable": unavailable.ravel(),
        "capacity": np.array([r.capacity for r in instance.rooms], dtype=np.int64),
    }
    layout = EngineLayout(
        course_ids=tuple(c.id for c in courses),
        room_ids=tuple(r.id for r in instance.rooms),
        curriculum_ids=tuple(u.id for u in curricula),
        course_first=tuple(int(x) for x in course_first),
    )
    return data, layout


def make_engine(instance: Instance, bitgen, weights: Weights = DEFAULT_WEIGHTS, backend=None):
    data, layout = engine_data(instance)
    module = core if backend is None else backend
    return module.Engine(data, weights.as_tuple(), bitgen), layout


def _bitgen(seed) -> np.random.BitGenerator:
    if isinstance(seed, np.random.BitGenerator):
        return seed
    if isinstance(seed, np.random.Generator):
        return seed.bit_generator
    return np.random.PCG64(int(seed))


# -- construction ------------------------------------------------------------

def _construct_periods(instance: Instance, data: dict, rng: _core_py.Rng,
                       max_restarts: int, max_steps: int | None) -> np.ndarray:
    """Period of every lecture: DSatur-style greedy with ejections and restarts."""
    C, P, R = data["n_courses"], data["n_periods"], data["n_rooms"]
    L = data["n_lectures"]
    lect_course = data["lect_course"]
    conflict = data["conflict"].reshape(C, C).astype(bool)
    unav = data["unavailable"].reshape(C, P).astype(bool)
    neighbours = [np.flatnonzero(conflict[e] & (np.arange(C) != e)) for e in range(C)]
    degree = [len(n) for n in neighbours]
    if L > P * R:
        raise ConstructionError(f"{L} lectures cannot fit into {P} periods x {R} rooms")
    for e in range(C):
        if (~unav[e]).sum() < data["course_nlect"][e]:
            raise ConstructionError(f"course {instance.courses[e].id} has too few available periods")
    steps_cap = max_steps if max_steps is not None else 50 * L + 1000

    for attempt in range(max_restarts + 1):
        period = np.full(L, -1, dtype=np.int64)
        # blocked[e, p] counts conflicting lectures (other courses) in p
        blocked = np.zeros((C, P), dtype=np.int64)
        holds = np.zeros((C, P), dtype=bool)
        load = np.zeros(P, dtype=np.int64)
        members = [[] for _ in range(P)]
        unplaced = list(range(L))
        tie = [rng.below(1 << 30) for _ in range(C)]
        steps = 0
        while unplaced:
            steps += 1
            if steps > steps_cap:
                break
            free = {}
            best = None
            for l in unplaced:
                e = lect_course[l]
                if e not in free:
                    ok = ~unav[e] & ~holds[e] & (blocked[e] == 0) & (load < R)
                    free[e] = np.flatnonzero(ok)
                key = (len(free[e]), -degree[e], tie[e], l)
                if best is None or key < best[0]:
                    best = (key, l)
            l = best[1]
            e = lect_course[l]
            options = free[e]
            if len(options):
                # prefer a day the course does not use yet
                days_used = {p // data["periods_per_day"] for p in np.flatnonzero(holds[e])}
                fresh = [p for p in options if p // data["periods_per_day"] not in days_used]
                pool = fresh if fresh else list(options)
                p = int(pool[rng.below(len(pool))])
            else:
                cands = np.flatnonzero(~unav[e] & ~holds[e])
                p = int(cands[rng.below(len(cands))])
                ejected = [m for m in members[p] if conflict[e, lect_course[m]]]
                if load[p] - len(ejected) >= R:
                    rest = [m for m in members[p] if m not in ejected]
                    ejected.append(rest[rng.below(len(rest))])
                for m in ejected:
                    _unplace(m, period, members, blocked, holds, load, lect_course, neighbours)
                    unplaced.append(m)
            _place(l, p, period, members, blocked, holds, load, lect_course, neighbours)
            unplaced.remove(l)
        if not unplaced:
            return period
        log.debug("construction attempt %d failed with %d unplaced", attempt, len(unplaced))
    raise ConstructionError(f"no feasible timetable found after {max_restarts + 1} attempts")


def _place(l, p, period, members, blocked, holds, load, lect_course, neighbours):
    e = lect_course[l]
    period[l] = p
    members[p].append(l)
    holds[e, p] = True
    load[p] += 1
    blocked[neighbours[e], p] += 1


def _unplace(l, period, members, blocked, holds, load, lect_course, neighbours):
    e = lect_course[l]
    p = period[l]
    period[l] = -1
    members[p].remove(l)
    holds[e, p] = False
    load[p] -= 1
    blocked[neighbours[e], p] -= 1


def _greedy_rooms(data: dict, period: np.ndarray) -> np.ndarray:
    students = data["students"]
    lect_course = data["lect_course"]
    order_rooms = sorted(range(data["n_rooms"]), key=lambda r: (-data["capacity"][r], r))
    room = np.zeros(len(period), dtype=np.int64)
    for p in range(data["n_periods"]):
        lects = sorted(np.flatnonzero(period == p), key=lambda l: (-students[lect_course[l]], l))
        for l, r in zip(lects, order_rooms):
            room[l] = r
    return room


def _construct_state(instance, data, bitgen, max_restarts, max_steps):
    rng = _core_py.Rng(bitgen)
    period = _construct_periods(instance, data, rng, max_restarts, max_steps)
    return period, _greedy_rooms(data, period)


def construct_initial(instance: Instance, seed=0, variant: str = "glbop",
                      weights: Weights = DEFAULT_WEIGHTS, max_restarts: int = 20,
                      max_steps: int | None = None) -> Timetable:
    """A feasible timetable with per-period rooms solved by ``variant``."""
    bitgen = _bitgen(seed)
    data, layout = engine_data(instance)
    period, room = _construct_state(instance, data, bitgen, max_restarts, max_steps)
    engine = core.Engine(data, weights.as_tuple(), bitgen)
    engine.set_state(period, room)
    for p in range(instance.periods):
        engine.solve_period(p, VARIANTS[variant], False)
    return layout.to_timetable(instance, *engine.get_state())


# -- moves and acceptance --------------------------------------------------

def kempe_move(instance: Instance, t: Timetable, p: int, q: int, seed_lecture: tuple[str, int],
               variant: str = "glbop", weights: Weights = DEFAULT_WEIGHTS) -> Timetable | Rejection:
    """Swap the Kempe chain of ``seed_lecture`` between periods ``p`` and ``q``.

    ``seed_lecture`` is a key of ``t.placement``.  Returns the new timetable
    with rooms of both periods re-solved, or a :class:`Rejection`.
    """
    if p == q:
        raise ValueError("periods must differ")
    if seed_lecture not in t.placement:
        raise KeyError(f"{seed_lecture} is not placed")
    if t.placement[seed_lecture][0] not in (p, q):
        raise ValueError(f"{seed_lecture} is in neither period {p} nor {q}")
    engine, layout = make_engine(instance, np.random.PCG64(0), weights)
    # engine numbers a course's lectures by period order
    c = seed_lecture[0]
    seed_period = t.placement[seed_lecture][0]
    own = sorted(per for (cc, _), (per, _) in t.placement.items() if cc == c)
    seed_index = layout.lecture_index(c, own.index(seed_period))
    engine.set_state(*layout.to_state(instance, t))
    status = engine.kempe(p, q, seed_index, VARIANTS[variant])
    if status != core.MOVE_OK:
        return Rejection(REJECTION_REASONS[status])
    return layout.to_timetable(instance, *engine.get_state())


def acceptance_delta(current, candidate) -> int:
    """Component-wise deterioration of the sorted candidate over the current."""
    if len(current) != len(candidate):
        raise ValueError("allocations must have equal length")
    return sum(max(0, b - a) for a, b in zip(current, candidate))


def accept(current, candidate, temp: float, rng) -> bool:
    """Leximax-aware Metropolis rule; ``rng`` is a numpy bit generator or Generator."""
    if leximax_compare(candidate, current) <= 0:
        return True
    delta = acceptance_delta(current, candidate)
    return _core_py.Rng(_bitgen(rng)).uniform() < math.exp(-delta / temp)


def temperature(k: int, iterations: int, t_max: float, t_min: float) -> float:
    return core.temperature(k, iterations, t_max, t_min)


# -- driver ----------------------------------------------------------------

def run(instance: Instance, cfg: SAConfig, initial: Timetable | None = None,
        trace_limit: int = 0, backend=None, check: bool = True) -> SAResult:
    """One annealing run; the result depends only on the instance and ``cfg``."""
    started = time.perf_counter()
    module = core if backend is None else backend
    bitgen = np.random.PCG64(cfg.seed)
    data, layout = engine_data(instance)
    variant = VARIANTS[cfg.variant]
    engine = module.Engine(data, cfg.weights.as_tuple(), bitgen)
    if initial is None:
        period, room = _construct_state(instance, data, bitgen, 20, None)
        engine.set_state(period, room)
        for p in range(instance.periods):
            engine.solve_period(p, variant, False)
    else:
        engine.set_state(*layout.to_state(instance, initial))
    initial_alloc = tuple(int(x) for x in engine.sorted_costs())

    stats = dict(engine.run(cfg.iterations, cfg.t_max, cfg.t_min, variant, trace_limit))
    engine.set_state(*engine.get_best_state())
    if cfg.polish:
        stats["polish_passes"] = engine.polish(core.GLBOP)
    if trace_limit:
        stats["trace"] = engine.get_trace()
    best = layout.to_timetable(instance, *engine.get_state())
    best_alloc = tuple(int(x) for x in engine.sorted_costs())
    if check:
        violations = validate_hard(instance, best)
        if violations:
            raise AssertionError(f"engine produced an infeasible timetable: {violations[:3]}")
    return SAResult(
        best_timetable=best,
        best_allocation=best_alloc,
        iterations_run=int(stats["iterations"]),
        initial_allocation=initial_alloc,
        stats=stats,
        wall_seconds=time.perf_counter() - started,
    )
