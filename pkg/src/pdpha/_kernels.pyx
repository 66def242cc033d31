# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; mirrors ``_kernels_py`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY

cnp.import_array()


cdef double _tour_cost(const double[:, ::1] T, long[::1] perm, int L) nogil:
    cdef double cost = T[0, perm[0]]
    cdef int k
    for k in range(L - 1):
        cost += T[perm[k], perm[k + 1]]
    return cost + T[perm[L - 1], 0]


def tour_cost(T, perm):
    cdef long[::1] p = np.ascontiguousarray(perm, dtype=np.int64)
    return _tour_cost(np.ascontiguousarray(T, dtype=np.float64), p, p.shape[0])


def dp_solve(T_in, int n):
    cdef const double[:, ::1] T = np.ascontiguousarray(T_in, dtype=np.float64)
    cdef int L = 2 * n
    cdef long[::1] pw = np.array([3 ** i for i in range(n + 1)], dtype=np.int64)
    cdef long size = pw[n]
    cdef double[::1] cost = np.full(size * L, np.inf)
    cdef int[::1] parent = np.full(size * L, -1, dtype=np.int32)
    cdef int[::1] digits = np.zeros(n, dtype=np.int32)
    cdef long idx, r, base, slot, full
    cdef int i, s, last, nl, best_last
    cdef double cur, cand, best, c
    for i in range(n):
        cost[pw[i] * L + i] = T[0, i + 1]
    with nogil:
        for idx in range(1, size):
            r = idx
            for i in range(n):
                digits[i] = r % 3
                r = r / 3
            base = idx * L
            for last in range(L):
                cur = cost[base + last]
                if cur == INFINITY:
                    continue
                for i in range(n):
                    s = digits[i]
                    if s == 2:
                        continue
                    nl = i if s == 0 else n + i
                    slot = (idx + pw[i]) * L + nl
                    cand = cur + T[last + 1, nl + 1]
                    if cand < cost[slot]:
                        cost[slot] = cand
                        parent[slot] = last
    full = size - 1
    best = INFINITY
    best_last = -1
    for last in range(L):
        c = cost[full * L + last] + T[last + 1, 0]
        if c < best:
            best = c
            best_last = last
    perm = []
    idx = full
    last = best_last
    while last >= 0:
        perm.append(last + 1)
        nl = parent[idx * L + last]
        idx -= pw[last % n]
        last = nl
    perm.reverse()
    return perm, best


def sa_run(T_in, int n, init, draws_in, double t0, double cooling, long moves_per_temp, bint record=False):
    cdef const double[:, ::1] T = np.ascontiguousarray(T_in, dtype=np.float64)
    cdef const double[:, ::1] draws = np.ascontiguousarray(draws_in, dtype=np.float64)
    cdef int L = 2 * n
    cdef long[::1] cur = np.array(init, dtype=np.int64)
    cdef long[::1] cand = np.empty(L, dtype=np.int64)
    cdef long[::1] best = cur.copy()
    cdef long[::1] pos = np.zeros(L + 1, dtype=np.int64)
    cdef long iters = draws.shape[0]
    cdef long[:, ::1] trace_buf = np.empty((iters if record else 0, L), dtype=np.int64)
    cdef double cur_cost = _tour_cost(T, cur, L)
    cdef double best_cost = cur_cost
    cdef double temp = t0, c, delta
    cdef double u_move, u_a, u_b, u_acc
    cdef long it, accepted = 0
    cdef int a, b, k, i, p, lo, hi, node, partner, tmp
    cdef bint ok, same
    with nogil:
        for it in range(iters):
            u_move = draws[it, 0]
            u_a = draws[it, 1]
            u_b = draws[it, 2]
            u_acc = draws[it, 3]
            a = <int>(u_a * L)
            node = cur[a]
            partner = node + n if node <= n else node - n
            if u_move < 0.5:
                p = 0
                while cur[p] != partner:
                    p += 1
                if p > a:
                    p -= 1
                if node <= n:
                    lo = 0
                    hi = p
                else:
                    lo = p + 1
                    hi = L - 1
                b = lo + <int>(u_b * (hi - lo + 1))
                # cand = cur without position a, then node inserted at b
                k = 0
                for i in range(L):
                    if i == a:
                        continue
                    if k == b:
                        k += 1
                    cand[k] = cur[i]
                    k += 1
                cand[b] = node
            else:
                b = <int>(u_b * L)
                for i in range(L):
                    cand[i] = cur[i]
                tmp = cand[a]
                cand[a] = cand[b]
                cand[b] = tmp
            same = True
            for i in range(L):
                if cand[i] != cur[i]:
                    same = False
                    break
            if not same:
                for k in range(L):
                    pos[cand[k]] = k
                ok = True
                for i in range(1, n + 1):
                    if pos[i] > pos[i + n]:
                        ok = False
                        break
                if ok:
                    c = _tour_cost(T, cand, L)
                    delta = c - cur_cost
                    if delta <= 0.0 or u_acc < exp(-delta / temp):
                        for i in range(L):
                            cur[i] = cand[i]
                        cur_cost = c
                        if record:
                            for i in range(L):
                                trace_buf[accepted, i] = cur[i]
                        accepted += 1
                        if cur_cost < best_cost:
                            best_cost = cur_cost
                            for i in range(L):
                                best[i] = cur[i]
            if (it + 1) % moves_per_temp == 0:
                temp *= cooling
    trace = [list(row) for row in np.asarray(trace_buf[:accepted])] if record else None
    return [int(x) for x in best], best_cost, accepted, trace
