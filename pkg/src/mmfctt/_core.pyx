# cython: language_level=3
"""Compiled kernels: lexicographic vector assignment and the annealing engine.

Mirrors ``_core_py`` step for step (same arithmetic, same order of random
draws) so that both backends produce bit-identical runs.
"""

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, pow
from libc.stdint cimport int64_t, uint64_t, uint8_t
from libc.stdlib cimport free, malloc, qsort, realloc
from libc.string cimport memcpy, memset
from numpy.random cimport bitgen_t

cnp.import_array()

GLBOP = 0
LSAP = 1

MOVE_OK = 0
MOVE_UNAVAILABLE = 1
MOVE_COURSE_CLASH = 2
MOVE_ROOM_OVERFLOW = 3

cdef double INV_2_53 = 1.0 / 9007199254740992.0


# shared with the pure-Python twin so callers catch one exception type
from mmfctt._core_py import InfeasibleAssignment


cdef inline int lex_cmp(const int64_t *a, const int64_t *b, int d) noexcept nogil:
    cdef int k
    for k in range(d):
        if a[k] != b[k]:
            return -1 if a[k] < b[k] else 1
    return 0


cdef struct LvapWork:
    int cap_n
    int cap_d
    int64_t *u
    int64_t *v
    int64_t *minv
    int64_t *delta
    int64_t *cur
    uint8_t *minv_set
    uint8_t *used
    int *p
    int *way


cdef int work_reserve(LvapWork *w, int n, int d) noexcept nogil:
    if n <= w.cap_n and d <= w.cap_d:
        return 0
    if n > w.cap_n:
        w.cap_n = n
    if d > w.cap_d:
        w.cap_d = d
    cdef size_t vec = <size_t>(w.cap_n + 1) * w.cap_d
    w.u = <int64_t *>realloc(w.u, vec * sizeof(int64_t))
    w.v = <int64_t *>realloc(w.v, vec * sizeof(int64_t))
    w.minv = <int64_t *>realloc(w.minv, vec * sizeof(int64_t))
    w.delta = <int64_t *>realloc(w.delta, w.cap_d * sizeof(int64_t))
    w.cur = <int64_t *>realloc(w.cur, w.cap_d * sizeof(int64_t))
    w.minv_set = <uint8_t *>realloc(w.minv_set, (w.cap_n + 1) * sizeof(uint8_t))
    w.used = <uint8_t *>realloc(w.used, (w.cap_n + 1) * sizeof(uint8_t))
    w.p = <int *>realloc(w.p, (w.cap_n + 1) * sizeof(int))
    w.way = <int *>realloc(w.way, (w.cap_n + 1) * sizeof(int))
    if (w.u == NULL or w.v == NULL or w.minv == NULL or w.delta == NULL
            or w.cur == NULL or w.minv_set == NULL or w.used == NULL
            or w.p == NULL or w.way == NULL):
        return -1
    return 0


cdef void work_free(LvapWork *w) noexcept nogil:
    free(w.u); free(w.v); free(w.minv); free(w.delta); free(w.cur)
    free(w.minv_set); free(w.used); free(w.p); free(w.way)
    memset(w, 0, sizeof(LvapWork))


cdef int lvap(const int64_t *cost, const uint8_t *allowed, int n, int d,
              int *perm, LvapWork *w) noexcept nogil:
    """Hungarian method over Z^d with lexicographic order.  Returns -1 if
    no perfect matching exists on the allowed edges."""
    cdef int i, j, k, i0, j0, j1, pj
    cdef int64_t *ui0
    cdef int64_t *vj
    cdef const int64_t *cij
    if work_reserve(w, n, d) != 0:
        return -2
    memset(w.u, 0, (n + 1) * d * sizeof(int64_t))
    memset(w.v, 0, (n + 1) * d * sizeof(int64_t))
    memset(w.p, 0, (n + 1) * sizeof(int))
    memset(w.way, 0, (n + 1) * sizeof(int))
    for i in range(1, n + 1):
        w.p[0] = i
        j0 = 0
        memset(w.minv_set, 0, (n + 1) * sizeof(uint8_t))
        memset(w.used, 0, (n + 1) * sizeof(uint8_t))
        while True:
            w.used[j0] = 1
            i0 = w.p[j0]
            j1 = -1
            ui0 = w.u + i0 * d
            for j in range(1, n + 1):
                if w.used[j]:
                    continue
                if allowed == NULL or allowed[(i0 - 1) * n + (j - 1)]:
                    cij = cost + ((<size_t>(i0 - 1) * n + (j - 1)) * d)
                    vj = w.v + j * d
                    for k in range(d):
                        w.cur[k] = cij[k] - ui0[k] - vj[k]
                    if not w.minv_set[j] or lex_cmp(w.cur, w.minv + j * d, d) < 0:
                        memcpy(w.minv + j * d, w.cur, d * sizeof(int64_t))
                        w.minv_set[j] = 1
                        w.way[j] = j0
                if w.minv_set[j] and (j1 < 0 or lex_cmp(w.minv + j * d, w.delta, d) < 0):
                    memcpy(w.delta, w.minv + j * d, d * sizeof(int64_t))
                    j1 = j
            if j1 < 0:
                return -1
            for j in range(n + 1):
                if w.used[j]:
                    pj = w.p[j]
                    for k in range(d):
                        w.u[pj * d + k] += w.delta[k]
                        w.v[j * d + k] -= w.delta[k]
                elif w.minv_set[j]:
                    for k in range(d):
                        w.minv[j * d + k] -= w.delta[k]
            j0 = j1
            if w.p[j0] == 0:
                break
        while j0:
            j1 = w.way[j0]
            w.p[j0] = w.p[j1]
            j0 = j1
    for j in range(1, n + 1):
        perm[w.p[j] - 1] = j - 1
    return 0


def solve_lvap(cost, allowed=None):
    """Minimum assignment over integer vectors compared lexicographically.

    ``cost`` has shape ``(n, n, d)``; ``allowed`` is an optional ``(n, n)``
    mask.  Returns ``perm`` with ``perm[i]`` the column of row ``i``.
    """
    cdef cnp.ndarray[cnp.int64_t, ndim=3, mode="c"] c = np.ascontiguousarray(cost, dtype=np.int64)
    cdef int n = c.shape[0]
    cdef int d = c.shape[2]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2, mode="c"] a
    cdef const uint8_t *ap = NULL
    cdef cnp.ndarray[cnp.int32_t, ndim=1] perm = np.zeros(n, dtype=np.int32)
    cdef LvapWork w
    cdef int status
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if allowed is not None:
        a = np.ascontiguousarray(allowed, dtype=np.uint8)
        ap = <const uint8_t *>a.data
    memset(&w, 0, sizeof(LvapWork))
    status = lvap(<const int64_t *>c.data, ap, n, d, <int *>perm.data, &w)
    work_free(&w)
    if status == -1:
        raise InfeasibleAssignment("no perfect matching avoids the forbidden edges")
    if status != 0:
        raise MemoryError()
    return perm.astype(np.int64)


cpdef double temperature(long k, long iterations, double tmax, double tmin):
    if iterations <= 1:
        return tmax
    return tmax * pow(tmin / tmax, <double>k / <double>(iterations - 1))


cdef int cmp_desc(const void *a, const void *b) noexcept nogil:
    cdef int64_t x = (<const int64_t *>a)[0]
    cdef int64_t y = (<const int64_t *>b)[0]
    if x > y:
        return -1
    if x < y:
        return 1
    return 0


cdef int *int_array(obj, Py_ssize_t *length=NULL) except NULL:
    arr = np.ascontiguousarray(obj, dtype=np.int64)
    cdef Py_ssize_t n = arr.shape[0]
    cdef int *out = <int *>malloc((n if n > 0 else 1) * sizeof(int))
    cdef Py_ssize_t i
    if out == NULL:
        raise MemoryError()
    for i in range(n):
        out[i] = <int>arr[i]
    if length != NULL:
        length[0] = n
    return out


cdef uint8_t *byte_array(obj) except NULL:
    arr = np.ascontiguousarray(obj, dtype=np.uint8).ravel()
    cdef Py_ssize_t n = arr.shape[0]
    cdef uint8_t *out = <uint8_t *>malloc((n if n > 0 else 1) * sizeof(uint8_t))
    cdef Py_ssize_t i
    if out == NULL:
        raise MemoryError()
    for i in range(n):
        out[i] = <uint8_t>arr[i]
    return out


cdef class Engine:
    """Incremental timetable state with Kempe moves and period room solving."""

    cdef int L, C, R, P, U, ppd
    cdef int w1, w2, w3, w4
    cdef int *lect_course
    cdef int *course_first
    cdef int *course_nlect
    cdef int *students
    cdef int *min_days
    cdef int *cc_ptr
    cdef int *cc_idx
    cdef int *uc_ptr
    cdef int *uc_idx
    cdef uint8_t *conflict
    cdef uint8_t *unavailable
    cdef int *capacity
    # state
    cdef int *lect_period
    cdef int *lect_room
    cdef int *plist
    cdef int *plen
    cdef int *occ
    cdef int64_t *course_cost
    cdef int64_t *s3
    cdef int64_t *curr_cost
    cdef int *best_period
    cdef int *best_room
    cdef int64_t *best_sorted
    cdef int64_t *cur_sorted
    cdef int64_t *cand_sorted
    # scratch
    cdef int *chain
    cdef int *mark
    cdef int stamp
    cdef int *touched
    cdef int *umark
    cdef int ustamp
    cdef int *seen
    cdef int64_t *deltas
    cdef int64_t *cost
    cdef size_t cost_cap
    cdef int *vindex
    cdef size_t vindex_cap
    cdef int *perm
    cdef int64_t *newsum
    cdef int64_t *oldsum
    cdef size_t sum_cap
    cdef LvapWork work
    # undo
    cdef int undo_p, undo_q, undo_lp_len, undo_lq_len, undo_n
    cdef int *undo_lp
    cdef int *undo_lq
    cdef int *undo_lect
    cdef int *undo_period
    cdef int *undo_room
    cdef bint has_undo
    # rng
    cdef object _bitgen
    cdef bitgen_t *rng
    cdef list trace

    def __cinit__(self):
        memset(&self.work, 0, sizeof(LvapWork))

    def __init__(self, data, weights, bitgen):
        self.L = int(data["n_lectures"])
        self.C = int(data["n_courses"])
        self.R = int(data["n_rooms"])
        self.P = int(data["n_periods"])
        self.U = int(data["n_curricula"])
        self.ppd = int(data["periods_per_day"])
        self.w1, self.w2, self.w3, self.w4 = (int(x) for x in weights)
        self.lect_course = int_array(data["lect_course"])
        self.course_first = int_array(data["course_first"])
        self.course_nlect = int_array(data["course_nlect"])
        self.students = int_array(data["students"])
        self.min_days = int_array(data["min_days"])
        self.cc_ptr = int_array(data["cc_ptr"])
        self.cc_idx = int_array(data["cc_idx"])
        self.uc_ptr = int_array(data["uc_ptr"])
        self.uc_idx = int_array(data["uc_idx"])
        self.conflict = byte_array(data["conflict"])
        self.unavailable = byte_array(data["unavailable"])
        self.capacity = int_array(data["capacity"])

        cdef int L1 = self.L if self.L > 0 else 1
        cdef int U1 = self.U if self.U > 0 else 1
        cdef int R1 = self.R if self.R > 0 else 1
        self.lect_period = <int *>malloc(L1 * sizeof(int))
        self.lect_room = <int *>malloc(L1 * sizeof(int))
        self.plist = <int *>malloc(<size_t>self.P * L1 * sizeof(int))
        self.plen = <int *>malloc((self.P if self.P > 0 else 1) * sizeof(int))
        self.occ = <int *>malloc(<size_t>U1 * (self.P if self.P > 0 else 1) * sizeof(int))
        self.course_cost = <int64_t *>malloc((self.C if self.C > 0 else 1) * sizeof(int64_t))
        self.s3 = <int64_t *>malloc(U1 * sizeof(int64_t))
        self.curr_cost = <int64_t *>malloc(U1 * sizeof(int64_t))
        self.best_period = <int *>malloc(L1 * sizeof(int))
        self.best_room = <int *>malloc(L1 * sizeof(int))
        self.best_sorted = <int64_t *>malloc(U1 * sizeof(int64_t))
        self.cur_sorted = <int64_t *>malloc(U1 * sizeof(int64_t))
        self.cand_sorted = <int64_t *>malloc(U1 * sizeof(int64_t))
        self.chain = <int *>malloc(L1 * sizeof(int))
        self.mark = <int *>malloc(L1 * sizeof(int))
        self.touched = <int *>malloc((self.C + U1 + 1) * sizeof(int))
        self.umark = <int *>malloc((self.C + U1 + 1) * sizeof(int))
        self.seen = <int *>malloc(R1 * sizeof(int))
        self.deltas = <int64_t *>malloc(<size_t>R1 * R1 * sizeof(int64_t))
        self.perm = <int *>malloc(R1 * sizeof(int))
        self.undo_lp = <int *>malloc(L1 * sizeof(int))
        self.undo_lq = <int *>malloc(L1 * sizeof(int))
        self.undo_lect = <int *>malloc(L1 * sizeof(int))
        self.undo_period = <int *>malloc(L1 * sizeof(int))
        self.undo_room = <int *>malloc(L1 * sizeof(int))
        if (self.lect_period == NULL or self.lect_room == NULL or self.plist == NULL
                or self.plen == NULL or self.occ == NULL or self.course_cost == NULL
                or self.s3 == NULL or self.curr_cost == NULL or self.best_period == NULL
                or self.best_room == NULL or self.best_sorted == NULL
                or self.cur_sorted == NULL or self.cand_sorted == NULL
                or self.chain == NULL or self.mark == NULL or self.touched == NULL
                or self.umark == NULL or self.seen == NULL or self.deltas == NULL
                or self.perm == NULL or self.undo_lp == NULL or self.undo_lq == NULL
                or self.undo_lect == NULL or self.undo_period == NULL
                or self.undo_room == NULL):
            raise MemoryError()
        memset(self.mark, 0, L1 * sizeof(int))
        memset(self.umark, 0, (self.C + U1 + 1) * sizeof(int))
        memset(self.lect_period, 0, L1 * sizeof(int))
        memset(self.lect_room, 0, L1 * sizeof(int))
        memset(self.best_period, 0, L1 * sizeof(int))
        memset(self.best_room, 0, L1 * sizeof(int))
        memset(self.plen, 0, (self.P if self.P > 0 else 1) * sizeof(int))
        self.stamp = 0
        self.ustamp = 0
        self.cost = NULL
        self.cost_cap = 0
        self.vindex = NULL
        self.vindex_cap = 0
        self.newsum = NULL
        self.oldsum = NULL
        self.sum_cap = 0
        self.has_undo = False
        self._bitgen = bitgen
        self.rng = <bitgen_t *>PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")
        self.trace = []

    def __dealloc__(self):
        free(self.lect_course); free(self.course_first); free(self.course_nlect)
        free(self.students); free(self.min_days); free(self.cc_ptr); free(self.cc_idx)
        free(self.uc_ptr); free(self.uc_idx); free(self.conflict); free(self.unavailable)
        free(self.capacity); free(self.lect_period); free(self.lect_room); free(self.plist)
        free(self.plen); free(self.occ); free(self.course_cost); free(self.s3)
        free(self.curr_cost); free(self.best_period); free(self.best_room)
        free(self.best_sorted); free(self.cur_sorted); free(self.cand_sorted)
        free(self.chain); free(self.mark); free(self.touched); free(self.umark)
        free(self.seen); free(self.deltas); free(self.cost); free(self.vindex)
        free(self.perm); free(self.newsum); free(self.oldsum)
        free(self.undo_lp); free(self.undo_lq); free(self.undo_lect)
        free(self.undo_period); free(self.undo_room)
        work_free(&self.work)

    # -- rng -------------------------------------------------------------
    cdef inline uint64_t next_u64(self) noexcept:
        return self.rng.next_uint64(self.rng.state)

    cdef uint64_t below(self, uint64_t n) noexcept:
        cdef uint64_t threshold = (<uint64_t>0 - n) % n
        cdef uint64_t r
        while True:
            r = self.rng.next_uint64(self.rng.state)
            if r >= threshold:
                return r % n

    cdef double uniform(self) noexcept:
        return (self.rng.next_uint64(self.rng.state) >> 11) * INV_2_53

    # -- state -----------------------------------------------------------
    def set_state(self, period, room):
        cdef int l, e, u, k
        per = np.ascontiguousarray(period, dtype=np.int64)
        rm = np.ascontiguousarray(room, dtype=np.int64)
        if per.shape[0] != self.L or rm.shape[0] != self.L:
            raise ValueError("state arrays must have one entry per lecture")
        for l in range(self.L):
            if not (0 <= per[l] < self.P) or not (0 <= rm[l] < self.R):
                raise ValueError(f"lecture {l} has an out-of-range period or room")
            self.lect_period[l] = <int>per[l]
            self.lect_room[l] = <int>rm[l]
        memset(self.plen, 0, self.P * sizeof(int))
        for l in range(self.L):
            k = self.lect_period[l]
            self.plist[<size_t>k * self.L + self.plen[k]] = l
            self.plen[k] += 1
        memset(self.occ, 0, <size_t>self.U * self.P * sizeof(int))
        for l in range(self.L):
            e = self.lect_course[l]
            for k in range(self.cc_ptr[e], self.cc_ptr[e + 1]):
                self.occ[<size_t>self.cc_idx[k] * self.P + self.lect_period[l]] += 1
        for e in range(self.C):
            self.course_cost[e] = self._course_cost(e)
        for u in range(self.U):
            self.s3[u] = self._s3(u)
            self._refresh_curr(u)
        self.has_undo = False

    def get_state(self):
        per = np.empty(self.L, dtype=np.int64)
        rm = np.empty(self.L, dtype=np.int64)
        cdef int l
        for l in range(self.L):
            per[l] = self.lect_period[l]
            rm[l] = self.lect_room[l]
        return per, rm

    def get_best_state(self):
        per = np.empty(self.L, dtype=np.int64)
        rm = np.empty(self.L, dtype=np.int64)
        cdef int l
        for l in range(self.L):
            per[l] = self.best_period[l]
            rm[l] = self.best_room[l]
        return per, rm

    def curriculum_costs(self):
        out = np.empty(self.U, dtype=np.int64)
        cdef int u
        for u in range(self.U):
            out[u] = self.curr_cost[u]
        return out

    def period_lectures(self, int p):
        out = np.empty(self.plen[p], dtype=np.int64)
        cdef int i
        for i in range(self.plen[p]):
            out[i] = self.plist[<size_t>p * self.L + i]
        return out

    def get_trace(self):
        return list(self.trace)

    def sorted_costs(self):
        self._sorted_into(self.cand_sorted)
        return [self.cand_sorted[i] for i in range(self.U)]

    # -- evaluation ------------------------------------------------------
    cdef int64_t _room_part(self, int e, int skip, int skip_room) noexcept:
        cdef int first = self.course_first[e]
        cdef int l, r, i, nseen = 0
        cdef int64_t s1 = 0, excess
        cdef bint found
        for l in range(first, first + self.course_nlect[e]):
            r = skip_room if l == skip else self.lect_room[l]
            excess = self.students[e] - self.capacity[r]
            if excess > 0:
                s1 += excess
            found = False
            for i in range(nseen):
                if self.seen[i] == r:
                    found = True
                    break
            if not found:
                self.seen[nseen] = r
                nseen += 1
        return self.w1 * s1 + self.w4 * (nseen - 1)

    cdef int64_t _course_cost(self, int e) noexcept:
        cdef int first = self.course_first[e]
        cdef int l, dday, i, ndays = 0
        cdef bint found
        cdef int64_t s2 = 0
        cdef int missing
        cdef int days[64]
        cdef int *dd = days
        cdef int *heap = NULL
        if self.course_nlect[e] > 64:
            heap = <int *>malloc(self.course_nlect[e] * sizeof(int))
            dd = heap
        for l in range(first, first + self.course_nlect[e]):
            dday = self.lect_period[l] // self.ppd
            found = False
            for i in range(ndays):
                if dd[i] == dday:
                    found = True
                    break
            if not found:
                dd[ndays] = dday
                ndays += 1
        if heap != NULL:
            free(heap)
        missing = self.min_days[e] - ndays
        if missing > 0:
            s2 = self.w2 * missing
        return self._room_part(e, -1, 0) + s2

    cdef int64_t _s3(self, int u) noexcept:
        cdef int *occ = self.occ + <size_t>u * self.P
        cdef int p, slot
        cdef int64_t isolated = 0
        for p in range(self.P):
            if occ[p] == 0:
                continue
            slot = p % self.ppd
            if slot > 0 and occ[p - 1] > 0:
                continue
            if slot < self.ppd - 1 and occ[p + 1] > 0:
                continue
            isolated += occ[p]
        return self.w3 * isolated

    cdef void _refresh_curr(self, int u) noexcept:
        cdef int64_t total = self.s3[u]
        cdef int k
        for k in range(self.uc_ptr[u], self.uc_ptr[u + 1]):
            total += self.course_cost[self.uc_idx[k]]
        self.curr_cost[u] = total

    cdef void _sorted_into(self, int64_t *out) noexcept:
        if self.U == 0:
            return
        memcpy(out, self.curr_cost, self.U * sizeof(int64_t))
        qsort(out, self.U, sizeof(int64_t), cmp_desc)

    # -- room subproblem -------------------------------------------------
    cdef int _ensure_cost(self, size_t need) except -1:
        if need > self.cost_cap:
            self.cost = <int64_t *>realloc(self.cost, need * sizeof(int64_t))
            if self.cost == NULL:
                raise MemoryError()
            self.cost_cap = need
        return 0

    cdef int _ensure_sums(self, size_t need) except -1:
        if need > self.sum_cap:
            self.newsum = <int64_t *>realloc(self.newsum, need * sizeof(int64_t))
            self.oldsum = <int64_t *>realloc(self.oldsum, need * sizeof(int64_t))
            if self.newsum == NULL or self.oldsum == NULL:
                raise MemoryError()
            self.sum_cap = need
        return 0

    cdef bint _solve_period(self, int p, int variant, bint improve_only) except -1:
        cdef int k = self.plen[p]
        cdef int R = self.R
        cdef int *lects = self.plist + <size_t>p * self.L
        cdef int i, r, e, l, u, z, t, d, status, c
        cdef int64_t cur, base, val, lo = 0, hi = 0
        cdef bint have = False
        cdef size_t span
        if k == 0:
            return False
        for i in range(k):
            l = lects[i]
            e = self.lect_course[l]
            cur = self._room_part(e, -1, 0)
            for r in range(R):
                self.deltas[i * R + r] = self._room_part(e, l, r) - cur
        if variant == 0:
            for i in range(k):
                e = self.lect_course[lects[i]]
                for c in range(self.cc_ptr[e], self.cc_ptr[e + 1]):
                    base = self.curr_cost[self.cc_idx[c]]
                    for r in range(R):
                        val = base + self.deltas[i * R + r]
                        if not have or val < lo:
                            lo = val
                        if not have or val > hi:
                            hi = val
                        have = True
            t = 0
            if have:
                span = <size_t>(hi - lo + 1)
                if span > self.vindex_cap:
                    self.vindex = <int *>realloc(self.vindex, span * sizeof(int))
                    if self.vindex == NULL:
                        raise MemoryError()
                    self.vindex_cap = span
                for z in range(<int>span):
                    self.vindex[z] = -1
                for i in range(k):
                    e = self.lect_course[lects[i]]
                    for c in range(self.cc_ptr[e], self.cc_ptr[e + 1]):
                        base = self.curr_cost[self.cc_idx[c]]
                        for r in range(R):
                            self.vindex[base + self.deltas[i * R + r] - lo] = 0
                val = hi
                while val >= lo:
                    if self.vindex[val - lo] == 0:
                        self.vindex[val - lo] = t
                        t += 1
                    val -= 1
            d = t if t > 0 else 1
            self._ensure_cost(<size_t>R * R * d)
            memset(self.cost, 0, <size_t>R * R * d * sizeof(int64_t))
            for i in range(k):
                e = self.lect_course[lects[i]]
                for c in range(self.cc_ptr[e], self.cc_ptr[e + 1]):
                    base = self.curr_cost[self.cc_idx[c]]
                    for r in range(R):
                        z = self.vindex[base + self.deltas[i * R + r] - lo]
                        self.cost[(<size_t>i * R + r) * d + z] += 1
        else:
            d = 1
            self._ensure_cost(<size_t>R * R)
            memset(self.cost, 0, <size_t>R * R * sizeof(int64_t))
            for i in range(k):
                e = self.lect_course[lects[i]]
                for c in range(self.cc_ptr[e], self.cc_ptr[e + 1]):
                    base = self.curr_cost[self.cc_idx[c]]
                    for r in range(R):
                        self.cost[<size_t>i * R + r] += base + self.deltas[i * R + r]
        status = lvap(self.cost, NULL, R, d, self.perm, &self.work)
        if status == -2:
            raise MemoryError()
        if improve_only:
            self._ensure_sums(d)
            memset(self.newsum, 0, d * sizeof(int64_t))
            memset(self.oldsum, 0, d * sizeof(int64_t))
            for i in range(k):
                for z in range(d):
                    self.newsum[z] += self.cost[(<size_t>i * R + self.perm[i]) * d + z]
                    self.oldsum[z] += self.cost[(<size_t>i * R + self.lect_room[lects[i]]) * d + z]
            if lex_cmp(self.newsum, self.oldsum, d) >= 0:
                return False
        for i in range(k):
            self.lect_room[lects[i]] = self.perm[i]
        self.ustamp += 1
        for i in range(k):
            e = self.lect_course[lects[i]]
            self.course_cost[e] = self._course_cost(e)
            for c in range(self.cc_ptr[e], self.cc_ptr[e + 1]):
                u = self.cc_idx[c]
                if self.umark[u] != self.ustamp:
                    self.umark[u] = self.ustamp
                    self._refresh_curr(u)
        return True

    def solve_period(self, int p, int variant, bint improve_only):
        """Re-solve the room assignment of period ``p``; return True if applied."""
        return self._solve_period(p, variant, improve_only)

    cdef int _resolve_pair(self, int p, int q, int variant) except -1:
        cdef bint a, b
        self._solve_period(p, variant, False)
        self._solve_period(q, variant, False)
        while True:
            a = self._solve_period(p, variant, True)
            b = self._solve_period(q, variant, True)
            if not (a or b):
                break
        return 0

    def resolve_pair(self, int p, int q, int variant):
        self._resolve_pair(p, q, variant)

    def polish(self, int variant):
        """Re-solve periods until none strictly improves; returns pass count."""
        cdef int passes = 0, p
        cdef bint changed
        while True:
            passes += 1
            changed = False
            for p in range(self.P):
                if self._solve_period(p, variant, True):
                    changed = True
            if not changed:
                return passes

    # -- Kempe moves -----------------------------------------------------
    cdef int _kempe(self, int p, int q, int seed, int variant) except -1:
        cdef int *lp = self.plist + <size_t>p * self.L
        cdef int *lq = self.plist + <size_t>q * self.L
        cdef int np_ = self.plen[p], nq = self.plen[q]
        cdef int head = 0, n = 1, x, y, cx, i, src, dst, e, l, first, from_p = 0, from_q
        cdef int *other
        cdef int nother
        cdef int st
        self.stamp += 1
        st = self.stamp
        self.chain[0] = seed
        self.mark[seed] = st
        while head < n:
            x = self.chain[head]
            head += 1
            cx = self.lect_course[x]
            if self.lect_period[x] == p:
                other = lq
                nother = nq
            else:
                other = lp
                nother = np_
            for i in range(nother):
                y = other[i]
                if self.mark[y] != st and self.conflict[<size_t>cx * self.C + self.lect_course[y]]:
                    self.mark[y] = st
                    self.chain[n] = y
                    n += 1
        for i in range(n):
            x = self.chain[i]
            src = self.lect_period[x]
            dst = q if src == p else p
            if src == p:
                from_p += 1
            if self.unavailable[<size_t>self.lect_course[x] * self.P + dst]:
                return MOVE_UNAVAILABLE
        from_q = n - from_p
        for i in range(n):
            x = self.chain[i]
            src = self.lect_period[x]
            dst = q if src == p else p
            e = self.lect_course[x]
            first = self.course_first[e]
            for l in range(first, first + self.course_nlect[e]):
                if l != x and self.mark[l] != st and self.lect_period[l] == dst:
                    return MOVE_COURSE_CLASH
        if np_ - from_p + from_q > self.R or nq - from_q + from_p > self.R:
            return MOVE_ROOM_OVERFLOW

        # snapshot for undo
        self.undo_p = p
        self.undo_q = q
        self.undo_lp_len = np_
        self.undo_lq_len = nq
        memcpy(self.undo_lp, lp, np_ * sizeof(int))
        memcpy(self.undo_lq, lq, nq * sizeof(int))
        self.undo_n = 0
        for i in range(np_):
            l = lp[i]
            self.undo_lect[self.undo_n] = l
            self.undo_period[self.undo_n] = self.lect_period[l]
            self.undo_room[self.undo_n] = self.lect_room[l]
            self.undo_n += 1
        for i in range(nq):
            l = lq[i]
            self.undo_lect[self.undo_n] = l
            self.undo_period[self.undo_n] = self.lect_period[l]
            self.undo_room[self.undo_n] = self.lect_room[l]
            self.undo_n += 1
        self.has_undo = True

        for i in range(n):
            x = self.chain[i]
            src = self.lect_period[x]
            dst = q if src == p else p
            self._list_remove(src, x)
            self.plist[<size_t>dst * self.L + self.plen[dst]] = x
            self.plen[dst] += 1
            self.lect_period[x] = dst
            e = self.lect_course[x]
            for l in range(self.cc_ptr[e], self.cc_ptr[e + 1]):
                self.occ[<size_t>self.cc_idx[l] * self.P + src] -= 1
                self.occ[<size_t>self.cc_idx[l] * self.P + dst] += 1
        self._refresh_after_move(p, q)
        self._resolve_pair(p, q, variant)
        return MOVE_OK

    cdef void _list_remove(self, int per, int x) noexcept:
        cdef int *lst = self.plist + <size_t>per * self.L
        cdef int i
        for i in range(self.plen[per]):
            if lst[i] == x:
                lst[i] = lst[self.plen[per] - 1]
                self.plen[per] -= 1
                return

    cdef void _refresh_after_move(self, int p, int q) noexcept:
        cdef int per, i, l, e, c, u, n_touched = 0
        self.ustamp += 1
        for per in (p, q):
            for i in range(self.plen[per]):
                l = self.plist[<size_t>per * self.L + i]
                e = self.lect_course[l]
                if self.umark[self.U + e] != self.ustamp:
                    self.umark[self.U + e] = self.ustamp
                    self.touched[n_touched] = e
                    n_touched += 1
        for i in range(n_touched):
            e = self.touched[i]
            self.course_cost[e] = self._course_cost(e)
        for i in range(n_touched):
            e = self.touched[i]
            for c in range(self.cc_ptr[e], self.cc_ptr[e + 1]):
                u = self.cc_idx[c]
                if self.umark[u] != self.ustamp:
                    self.umark[u] = self.ustamp
                    self.s3[u] = self._s3(u)
                    self._refresh_curr(u)

    def kempe(self, int p, int q, int seed, int variant):
        """Swap the Kempe chain of ``seed`` between ``p`` and ``q`` and re-solve rooms."""
        return self._kempe(p, q, seed, variant)

    cdef void _undo(self) noexcept:
        cdef int i, l, per, cur, e, c
        cdef int p = self.undo_p, q = self.undo_q
        self.has_undo = False
        for i in range(self.undo_n):
            l = self.undo_lect[i]
            per = self.undo_period[i]
            cur = self.lect_period[l]
            if cur != per:
                e = self.lect_course[l]
                for c in range(self.cc_ptr[e], self.cc_ptr[e + 1]):
                    self.occ[<size_t>self.cc_idx[c] * self.P + cur] -= 1
                    self.occ[<size_t>self.cc_idx[c] * self.P + per] += 1
            self.lect_period[l] = per
            self.lect_room[l] = self.undo_room[i]
        memcpy(self.plist + <size_t>p * self.L, self.undo_lp, self.undo_lp_len * sizeof(int))
        self.plen[p] = self.undo_lp_len
        memcpy(self.plist + <size_t>q * self.L, self.undo_lq, self.undo_lq_len * sizeof(int))
        self.plen[q] = self.undo_lq_len
        self._refresh_after_move(p, q)

    def undo(self):
        if not self.has_undo:
            raise RuntimeError("nothing to undo")
        self._undo()

    # -- annealing -------------------------------------------------------
    cdef void _draw_move(self, int *p, int *q, int *seed) noexcept:
        cdef int a, b, total, k
        while True:
            a = <int>self.below(self.P)
            b = <int>self.below(self.P - 1)
            if b >= a:
                b += 1
            total = self.plen[a] + self.plen[b]
            if total > 0:
                break
        k = <int>self.below(total)
        p[0] = a
        q[0] = b
        if k < self.plen[a]:
            seed[0] = self.plist[<size_t>a * self.L + k]
        else:
            seed[0] = self.plist[<size_t>b * self.L + k - self.plen[a]]

    def draw_move(self):
        cdef int p, q, seed
        self._draw_move(&p, &q, &seed)
        return p, q, seed

    cdef bint _accept(self, int64_t *current, int64_t *candidate, double temp) noexcept:
        cdef int c = lex_cmp(candidate, current, self.U)
        cdef int64_t delta = 0
        cdef int i
        if c <= 0:
            return True
        for i in range(self.U):
            if candidate[i] > current[i]:
                delta += candidate[i] - current[i]
        return self.uniform() < exp(-(<double>delta) / temp)

    def accept(self, current, candidate, double temp):
        cdef int i
        if len(current) != self.U or len(candidate) != self.U:
            raise ValueError("allocations must have one entry per curriculum")
        for i in range(self.U):
            self.cur_sorted[i] = current[i]
            self.cand_sorted[i] = candidate[i]
        return self._accept(self.cur_sorted, self.cand_sorted, temp)

    def run(self, long iterations, double tmax, double tmin, int variant, long trace_limit=0):
        cdef long k
        cdef int p, q, seed, status, cmpc
        cdef long accepted = 0, rejected = 0, uphill = 0, improved = 0
        cdef double temp
        cdef bint worse, took
        cdef int64_t *swap
        self._sorted_into(self.cur_sorted)
        if self.U > 0:
            memcpy(self.best_sorted, self.cur_sorted, self.U * sizeof(int64_t))
        memcpy(self.best_period, self.lect_period, self.L * sizeof(int))
        memcpy(self.best_room, self.lect_room, self.L * sizeof(int))
        self.trace = []
        for k in range(iterations):
            temp = temperature(k, iterations, tmax, tmin)
            if self.P < 2:
                rejected += 1
                continue
            self._draw_move(&p, &q, &seed)
            status = self._kempe(p, q, seed, variant)
            if status != MOVE_OK:
                rejected += 1
                if k < trace_limit:
                    self.trace.append((p, q, seed, status, 0))
                continue
            self._sorted_into(self.cand_sorted)
            worse = lex_cmp(self.cand_sorted, self.cur_sorted, self.U) > 0
            if self._accept(self.cur_sorted, self.cand_sorted, temp):
                accepted += 1
                if worse:
                    uphill += 1
                swap = self.cur_sorted
                self.cur_sorted = self.cand_sorted
                self.cand_sorted = swap
                if lex_cmp(self.cur_sorted, self.best_sorted, self.U) < 0:
                    improved += 1
                    memcpy(self.best_sorted, self.cur_sorted, self.U * sizeof(int64_t))
                    memcpy(self.best_period, self.lect_period, self.L * sizeof(int))
                    memcpy(self.best_room, self.lect_room, self.L * sizeof(int))
                took = True
            else:
                self._undo()
                took = False
            if k < trace_limit:
                self.trace.append((p, q, seed, status, int(took)))
        return {
            "iterations": iterations,
            "accepted": accepted,
            "rejected_moves": rejected,
            "uphill_accepted": uphill,
            "improvements": improved,
        }
