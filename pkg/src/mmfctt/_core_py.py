"""Pure-Python kernels; the reference twin of the compiled ``_core`` module.

Every routine here performs the same operations in the same order as its
Cython counterpart, including every draw from the bit generator, so a run
with a given seed is bit-identical across backends.
"""

from __future__ import annotations

import math

import numpy as np

GLBOP = 0
LSAP = 1

MOVE_OK = 0
MOVE_UNAVAILABLE = 1
MOVE_COURSE_CLASH = 2
MOVE_ROOM_OVERFLOW = 3

_U64 = 1 << 64
_INV_2_53 = 1.0 / 9007199254740992.0


class InfeasibleAssignment(ValueError):
    pass


def solve_lvap(cost, allowed=None):
    """Minimum assignment over integer vectors compared lexicographically.

    ``cost`` has shape ``(n, n, d)``; ``allowed`` is an optional ``(n, n)``
    mask, forbidden edges never enter an augmenting path.  Returns ``perm``
    with ``perm[i]`` the column of row ``i``.
    """
    cost = np.asarray(cost, dtype=np.int64)
    n = cost.shape[0]
    d = cost.shape[2]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    c = [[tuple(int(x) for x in cost[i, j]) for j in range(n)] for i in range(n)]
    if allowed is None:
        ok = [[True] * n for _ in range(n)]
    else:
        a = np.asarray(allowed)
        ok = [[bool(a[i, j]) for j in range(n)] for i in range(n)]
    return np.array(_lvap(c, ok, n, d), dtype=np.int64)


def _lvap(c, ok, n, d):
    zero = (0,) * d
    u = [zero] * (n + 1)
    v = [zero] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [None] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = None
            j1 = -1
            ui0 = u[i0]
            row = c[i0 - 1]
            okrow = ok[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                if okrow[j - 1]:
                    vj = v[j]
                    cur = tuple(row[j - 1][k] - ui0[k] - vj[k] for k in range(d))
                    if minv[j] is None or cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                if minv[j] is not None and (delta is None or minv[j] < delta):
                    delta = minv[j]
                    j1 = j
            if j1 < 0:
                raise InfeasibleAssignment("no perfect matching avoids the forbidden edges")
            for j in range(n + 1):
                if used[j]:
                    pj = p[j]
                    u[pj] = tuple(u[pj][k] + delta[k] for k in range(d))
                    v[j] = tuple(v[j][k] - delta[k] for k in range(d))
                elif minv[j] is not None:
                    minv[j] = tuple(minv[j][k] - delta[k] for k in range(d))
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    perm = [0] * n
    for j in range(1, n + 1):
        perm[p[j] - 1] = j - 1
    return perm


class Rng:
    """Draws from a numpy bit generator's raw 64-bit stream."""

    def __init__(self, bitgen):
        self.bitgen = bitgen

    def next_u64(self) -> int:
        return int(self.bitgen.random_raw())

    def below(self, n: int) -> int:
        threshold = (_U64 - n) % n
        while True:
            r = int(self.bitgen.random_raw())
            if r >= threshold:
                return r % n

    def uniform(self) -> float:
        return (int(self.bitgen.random_raw()) >> 11) * _INV_2_53


def temperature(k: int, iterations: int, tmax: float, tmin: float) -> float:
    if iterations <= 1:
        return tmax
    return tmax * math.pow(tmin / tmax, k / (iterations - 1))


def _lex_less(a, b) -> bool:
    return a < b


class Engine:
    """Incremental timetable state with Kempe moves and period room solving.

    ``data`` is the dict produced by ``mmfctt.sa.engine_data``.  Lectures are
    numbered course by course; rooms and periods are indices.
    """

    def __init__(self, data, weights, bitgen):
        self.L = int(data["n_lectures"])
        self.C = int(data["n_courses"])
        self.R = int(data["n_rooms"])
        self.P = int(data["n_periods"])
        self.U = int(data["n_curricula"])
        self.ppd = int(data["periods_per_day"])
        self.lect_course = [int(x) for x in data["lect_course"]]
        self.course_first = [int(x) for x in data["course_first"]]
        self.course_nlect = [int(x) for x in data["course_nlect"]]
        self.students = [int(x) for x in data["students"]]
        self.min_days = [int(x) for x in data["min_days"]]
        cc_ptr = data["cc_ptr"]
        cc_idx = data["cc_idx"]
        self.course_curr = [
            [int(x) for x in cc_idx[cc_ptr[e]:cc_ptr[e + 1]]] for e in range(self.C)
        ]
        uc_ptr = data["uc_ptr"]
        uc_idx = data["uc_idx"]
        self.curr_courses = [
            [int(x) for x in uc_idx[uc_ptr[u]:uc_ptr[u + 1]]] for u in range(self.U)
        ]
        conf = np.asarray(data["conflict"]).reshape(self.C, self.C)
        self.conflict = [[bool(conf[a, b]) for b in range(self.C)] for a in range(self.C)]
        unav = np.asarray(data["unavailable"]).reshape(self.C, self.P)
        self.unavailable = [[bool(unav[e, p]) for p in range(self.P)] for e in range(self.C)]
        self.capacity = [int(x) for x in data["capacity"]]
        self.w1, self.w2, self.w3, self.w4 = (int(w) for w in weights)
        self.rng = Rng(bitgen)

        self.lect_period = [0] * self.L
        self.lect_room = [0] * self.L
        self.plist = [[] for _ in range(self.P)]
        self.occ = [[0] * self.P for _ in range(self.U)]
        self.course_cost = [0] * self.C
        self.s3 = [0] * self.U
        self.curr_cost = [0] * self.U
        self.best_period = [0] * self.L
        self.best_room = [0] * self.L
        self.best_sorted = None
        self.trace = []
        self._undo = None

    # -- state -----------------------------------------------------------
    def set_state(self, period, room):
        self.lect_period = [int(x) for x in period]
        self.lect_room = [int(x) for x in room]
        self.plist = [[] for _ in range(self.P)]
        for l in range(self.L):
            self.plist[self.lect_period[l]].append(l)
        self.occ = [[0] * self.P for _ in range(self.U)]
        for l in range(self.L):
            for u in self.course_curr[self.lect_course[l]]:
                self.occ[u][self.lect_period[l]] += 1
        for e in range(self.C):
            self.course_cost[e] = self._course_cost(e)
        for u in range(self.U):
            self.s3[u] = self._s3(u)
            self._refresh_curr(u)

    def get_state(self):
        return (np.array(self.lect_period, dtype=np.int64),
                np.array(self.lect_room, dtype=np.int64))

    def get_best_state(self):
        return (np.array(self.best_period, dtype=np.int64),
                np.array(self.best_room, dtype=np.int64))

    def curriculum_costs(self):
        return np.array(self.curr_cost, dtype=np.int64)

    def period_lectures(self, p):
        return np.array(self.plist[p], dtype=np.int64)

    def get_trace(self):
        return list(self.trace)

    # -- evaluation ------------------------------------------------------
    def _room_part(self, e, skip, skip_room):
        # weighted S1 + S4 of course e, lecture `skip` placed in `skip_room`
        first = self.course_first[e]
        s1 = 0
        seen = []
        for l in range(first, first + self.course_nlect[e]):
            r = skip_room if l == skip else self.lect_room[l]
            excess = self.students[e] - self.capacity[r]
            if excess > 0:
                s1 += excess
            if r not in seen:
                seen.append(r)
        return self.w1 * s1 + self.w4 * (len(seen) - 1)

    def _course_cost(self, e):
        first = self.course_first[e]
        days = []
        for l in range(first, first + self.course_nlect[e]):
            dday = self.lect_period[l] // self.ppd
            if dday not in days:
                days.append(dday)
        missing = self.min_days[e] - len(days)
        s2 = self.w2 * missing if missing > 0 else 0
        return self._room_part(e, -1, 0) + s2

    def _s3(self, u):
        occ = self.occ[u]
        ppd = self.ppd
        isolated = 0
        for p in range(self.P):
            if occ[p] == 0:
                continue
            slot = p % ppd
            if slot > 0 and occ[p - 1] > 0:
                continue
            if slot < ppd - 1 and occ[p + 1] > 0:
                continue
            isolated += occ[p]
        return self.w3 * isolated

    def _refresh_curr(self, u):
        total = self.s3[u]
        for e in self.curr_courses[u]:
            total += self.course_cost[e]
        self.curr_cost[u] = total

    def sorted_costs(self):
        return sorted(self.curr_cost, reverse=True)

    # -- room subproblem -------------------------------------------------
    def solve_period(self, p, variant, improve_only):
        """Re-solve the room assignment of period ``p``; return True if applied."""
        lects = self.plist[p]
        k = len(lects)
        if k == 0:
            return False
        R = self.R
        # edge items: base_u + delta(e, r) for u in U_e
        deltas = []
        for l in lects:
            e = self.lect_course[l]
            cur = self._room_part(e, -1, 0)
            deltas.append([self._room_part(e, l, r) - cur for r in range(R)])
        if variant == GLBOP:
            lo = None
            hi = None
            for i in range(k):
                e = self.lect_course[lects[i]]
                for u in self.course_curr[e]:
                    base = self.curr_cost[u]
                    for r in range(R):
                        val = base + deltas[i][r]
                        if lo is None or val < lo:
                            lo = val
                        if hi is None or val > hi:
                            hi = val
            if lo is None:
                t = 0
                index = {}
            else:
                present = [False] * (hi - lo + 1)
                for i in range(k):
                    e = self.lect_course[lects[i]]
                    for u in self.course_curr[e]:
                        base = self.curr_cost[u]
                        for r in range(R):
                            present[base + deltas[i][r] - lo] = True
                index = {}
                t = 0
                for val in range(hi, lo - 1, -1):
                    if present[val - lo]:
                        index[val] = t
                        t += 1
            d = t if t > 0 else 1
            cost = [[[0] * d for _ in range(R)] for _ in range(R)]
            for i in range(k):
                e = self.lect_course[lects[i]]
                for u in self.course_curr[e]:
                    base = self.curr_cost[u]
                    for r in range(R):
                        cost[i][r][index[base + deltas[i][r]]] += 1
        else:
            d = 1
            cost = [[[0] for _ in range(R)] for _ in range(R)]
            for i in range(k):
                e = self.lect_course[lects[i]]
                for u in self.course_curr[e]:
                    base = self.curr_cost[u]
                    for r in range(R):
                        cost[i][r][0] += base + deltas[i][r]
        c = [[tuple(cost[i][j]) for j in range(R)] for i in range(R)]
        ok = [[True] * R for _ in range(R)]
        perm = _lvap(c, ok, R, d)
        if improve_only:
            new = [0] * d
            old = [0] * d
            for i in range(k):
                a = c[i][perm[i]]
                b = c[i][self.lect_room[lects[i]]]
                for z in range(d):
                    new[z] += a[z]
                    old[z] += b[z]
            if not new < old:
                return False
        for i in range(k):
            self.lect_room[lects[i]] = perm[i]
        touched = []
        for l in lects:
            e = self.lect_course[l]
            self.course_cost[e] = self._course_cost(e)
            for u in self.course_curr[e]:
                if u not in touched:
                    touched.append(u)
        for u in touched:
            self._refresh_curr(u)
        return True

    def resolve_pair(self, p, q, variant):
        self.solve_period(p, variant, False)
        self.solve_period(q, variant, False)
        while True:
            a = self.solve_period(p, variant, True)
            b = self.solve_period(q, variant, True)
            if not (a or b):
                break

    def polish(self, variant):
        """Re-solve periods until none strictly improves; returns pass count."""
        passes = 0
        while True:
            passes += 1
            changed = False
            for p in range(self.P):
                if self.solve_period(p, variant, True):
                    changed = True
            if not changed:
                return passes

    # -- Kempe moves -----------------------------------------------------
    def kempe(self, p, q, seed, variant):
        """Swap the Kempe chain of ``seed`` between ``p`` and ``q`` and re-solve rooms."""
        lp = self.plist[p]
        lq = self.plist[q]
        chain = [seed]
        inchain = {seed}
        head = 0
        while head < len(chain):
            x = chain[head]
            head += 1
            cx = self.lect_course[x]
            other = lq if self.lect_period[x] == p else lp
            for y in other:
                if y not in inchain and self.conflict[cx][self.lect_course[y]]:
                    inchain.add(y)
                    chain.append(y)
        from_p = 0
        for x in chain:
            src = self.lect_period[x]
            dst = q if src == p else p
            if src == p:
                from_p += 1
            if self.unavailable[self.lect_course[x]][dst]:
                return MOVE_UNAVAILABLE
        from_q = len(chain) - from_p
        for x in chain:
            src = self.lect_period[x]
            dst = q if src == p else p
            e = self.lect_course[x]
            first = self.course_first[e]
            for l in range(first, first + self.course_nlect[e]):
                if l != x and l not in inchain and self.lect_period[l] == dst:
                    return MOVE_COURSE_CLASH
        if len(lp) - from_p + from_q > self.R or len(lq) - from_q + from_p > self.R:
            return MOVE_ROOM_OVERFLOW

        saved = [(l, self.lect_period[l], self.lect_room[l]) for l in lp + lq]
        self._undo = (p, q, list(lp), list(lq), saved)
        for x in chain:
            src = self.lect_period[x]
            dst = q if src == p else p
            _swap_remove(self.plist[src], x)
            self.plist[dst].append(x)
            self.lect_period[x] = dst
            for u in self.course_curr[self.lect_course[x]]:
                self.occ[u][src] -= 1
                self.occ[u][dst] += 1
        self._refresh_after_move(p, q)
        self.resolve_pair(p, q, variant)
        return MOVE_OK

    def _refresh_after_move(self, p, q):
        touched_c = []
        for l in self.plist[p] + self.plist[q]:
            e = self.lect_course[l]
            if e not in touched_c:
                touched_c.append(e)
        touched_u = []
        for e in touched_c:
            self.course_cost[e] = self._course_cost(e)
            for u in self.course_curr[e]:
                if u not in touched_u:
                    touched_u.append(u)
        for u in touched_u:
            self.s3[u] = self._s3(u)
            self._refresh_curr(u)

    def undo(self):
        p, q, lp, lq, saved = self._undo
        self._undo = None
        for l, per, room in saved:
            cur = self.lect_period[l]
            if cur != per:
                for u in self.course_curr[self.lect_course[l]]:
                    self.occ[u][cur] -= 1
                    self.occ[u][per] += 1
            self.lect_period[l] = per
            self.lect_room[l] = room
        self.plist[p] = lp
        self.plist[q] = lq
        self._refresh_after_move(p, q)

    # -- annealing -------------------------------------------------------
    def draw_move(self):
        while True:
            p = self.rng.below(self.P)
            q = self.rng.below(self.P - 1)
            if q >= p:
                q += 1
            total = len(self.plist[p]) + len(self.plist[q])
            if total > 0:
                break
        k = self.rng.below(total)
        np_ = len(self.plist[p])
        seed = self.plist[p][k] if k < np_ else self.plist[q][k - np_]
        return p, q, seed

    def accept(self, current, candidate, temp):
        if not candidate > current:
            return True
        delta = 0
        for a, b in zip(candidate, current):
            if a > b:
                delta += a - b
        return self.rng.uniform() < math.exp(-delta / temp)

    def run(self, iterations, tmax, tmin, variant, trace_limit=0):
        current = self.sorted_costs()
        self.best_sorted = list(current)
        self.best_period = list(self.lect_period)
        self.best_room = list(self.lect_room)
        self.trace = []
        accepted = rejected = uphill = improved = 0
        for k in range(iterations):
            temp = temperature(k, iterations, tmax, tmin)
            if self.P < 2:
                rejected += 1
                continue
            p, q, seed = self.draw_move()
            status = self.kempe(p, q, seed, variant)
            if status != MOVE_OK:
                rejected += 1
                if k < trace_limit:
                    self.trace.append((p, q, seed, status, 0))
                continue
            candidate = self.sorted_costs()
            worse = candidate > current
            if self.accept(current, candidate, temp):
                accepted += 1
                if worse:
                    uphill += 1
                current = candidate
                if candidate < self.best_sorted:
                    improved += 1
                    self.best_sorted = list(candidate)
                    self.best_period = list(self.lect_period)
                    self.best_room = list(self.lect_room)
                took = 1
            else:
                self.undo()
                took = 0
            if k < trace_limit:
                self.trace.append((p, q, seed, status, took))
        return {
            "iterations": iterations,
            "accepted": accepted,
            "rejected_moves": rejected,
            "uphill_accepted": uphill,
            "improvements": improved,
        }


def _swap_remove(lst, x):
    i = lst.index(x)
    lst[i] = lst[-1]
    lst.pop()
