"""Pure-Python reference kernels; same loop order and arithmetic as ``_kernels.pyx``."""

from __future__ import annotations

import math

import numpy as np

INF = float("inf")


def tour_cost(T, perm) -> float:
    cost = T[0][perm[0]]
    for k in range(len(perm) - 1):
        cost += T[perm[k]][perm[k + 1]]
    return cost + T[perm[-1]][0]


def dp_solve(T: np.ndarray, n: int) -> tuple[list[int], float]:
    """Exact shortest precedence-feasible tour.

    States are indexed in base 3, one digit per pair (0 untouched, 1 picked
    up, 2 delivered), so only feasible visited-sets are stored. Slot ``l``
    stands for node ``l + 1``.
    """
    L = 2 * n
    T = T.tolist()
    pw = [3**i for i in range(n + 1)]
    size = pw[n]
    cost = [INF] * (size * L)
    parent = [-1] * (size * L)
    for i in range(n):
        cost[pw[i] * L + i] = T[0][i + 1]
    digits = [0] * n
    for idx in range(1, size):
        r = idx
        for i in range(n):
            digits[i] = r % 3
            r //= 3
        base = idx * L
        for last in range(L):
            cur = cost[base + last]
            if cur == INF:
                continue
            row = T[last + 1]
            for i in range(n):
                s = digits[i]
                if s == 2:
                    continue
                nl = i if s == 0 else n + i
                slot = (idx + pw[i]) * L + nl
                cand = cur + row[nl + 1]
                if cand < cost[slot]:
                    cost[slot] = cand
                    parent[slot] = last
    full = size - 1
    best = INF
    best_last = -1
    for last in range(L):
        c = cost[full * L + last] + T[last + 1][0]
        if c < best:
            best = c
            best_last = last
    perm = []
    idx, last = full, best_last
    while last >= 0:
        perm.append(last + 1)
        prev = parent[idx * L + last]
        idx -= pw[last % n]
        last = prev
    perm.reverse()
    return perm, best


def sa_run(
    T: np.ndarray,
    n: int,
    init: np.ndarray,
    draws: np.ndarray,
    t0: float,
    cooling: float,
    moves_per_temp: int,
    record: bool = False,
):
    """Simulated annealing over precedence-feasible permutations.

    Each row of ``draws`` holds four uniforms: move type, first position,
    second position/target, acceptance. Returns (best perm, best cost,
    accepted count, trace of accepted perms or None).
    """
    L = 2 * n
    T = T.tolist()
    cur = [int(x) for x in init]
    cur_cost = tour_cost(T, cur)
    best = cur[:]
    best_cost = cur_cost
    pos = [0] * (L + 1)
    temp = t0
    accepted = 0
    trace = [] if record else None
    for it in range(len(draws)):
        u_move, u_a, u_b, u_acc = draws[it]
        a = int(u_a * L)
        node = cur[a]
        partner = node + n if node <= n else node - n
        if u_move < 0.5:
            # relocate to a uniformly chosen position that keeps precedence
            p = cur.index(partner)
            if p > a:
                p -= 1
            if node <= n:
                lo, hi = 0, p
            else:
                lo, hi = p + 1, L - 1
            b = lo + int(u_b * (hi - lo + 1))
            cand = cur[:a] + cur[a + 1:]
            cand.insert(b, node)
        else:
            b = int(u_b * L)
            cand = cur[:]
            cand[a], cand[b] = cand[b], cand[a]
        if cand != cur:
            for k in range(L):
                pos[cand[k]] = k
            ok = True
            for i in range(1, n + 1):
                if pos[i] > pos[i + n]:
                    ok = False
                    break
            if ok:
                c = tour_cost(T, cand)
                delta = c - cur_cost
                if delta <= 0.0 or u_acc < math.exp(-delta / temp):
                    cur = cand
                    cur_cost = c
                    accepted += 1
                    if record:
                        trace.append(cur[:])
                    if cur_cost < best_cost:
                        best_cost = cur_cost
                        best = cur[:]
        if (it + 1) % moves_per_temp == 0:
            temp *= cooling
    return best, best_cost, accepted, trace
