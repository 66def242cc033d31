"""Non-learned reference solvers: enumeration, exact DP, nearest neighbour, simulated annealing."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from pdpha import kernels
from pdpha.env import enumerate_feasible, route_objective
from pdpha.instances import Instance

BRUTE_FORCE_MAX_N = 4
DP_MAX_NODES = 20


class SizeLimitError(ValueError):
    pass


def time_matrix(inst: Instance) -> np.ndarray:
    return inst.distance_matrix() / inst.speed


def brute_force(inst: Instance, return_count: bool = False):
    """Enumerate every feasible tour; ties go to the lexicographically smallest."""
    if inst.n > BRUTE_FORCE_MAX_N:
        raise SizeLimitError(f"brute force is limited to n <= {BRUTE_FORCE_MAX_N}, got {inst.n}")
    best, best_cost, count = None, np.inf, 0
    for perm in enumerate_feasible(inst.n):  # lexicographic order
        count += 1
        c = route_objective(inst, perm)
        if c < best_cost:
            best, best_cost = perm, c
    if return_count:
        return best, best_cost, count
    return best, best_cost


def exact_dp(inst: Instance) -> tuple[tuple[int, ...], float]:
    if 2 * inst.n > DP_MAX_NODES:
        raise SizeLimitError(f"exact DP is limited to 2n <= {DP_MAX_NODES}, got 2n = {2 * inst.n}")
    perm, cost = kernels.dp_solve(time_matrix(inst), inst.n)
    return tuple(perm), float(cost)


def nearest_neighbor(inst: Instance) -> tuple[tuple[int, ...], float]:
    """Greedy construction: always move to the closest currently allowed node."""
    n = inst.n
    D = inst.distance_matrix()
    visited = np.zeros(2 * n + 1, dtype=bool)
    visited[0] = True
    cur = 0
    perm = []
    for _ in range(2 * n):
        allowed = ~visited
        allowed[n + 1:] &= visited[1:n + 1]
        cand = np.flatnonzero(allowed)
        nxt = int(cand[np.argmin(D[cur, cand])])
        perm.append(nxt)
        visited[nxt] = True
        cur = nxt
    return tuple(perm), route_objective(inst, perm)


@dataclass(frozen=True)
class SAConfig:
    initial_temperature: float | None = None  # None: mean edge travel time of the instance
    cooling: float = 0.999  # applied once per iteration
    iterations: int = 20_000  # temperature levels
    moves_per_temperature: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if self.initial_temperature is not None and not self.initial_temperature > 0:
            raise ValueError("initial temperature must be positive")
        if self.iterations < 0 or self.moves_per_temperature < 1:
            raise ValueError("iterations must be >= 0 and moves_per_temperature >= 1")

    @classmethod
    def from_json(cls, path: str | Path) -> "SAConfig":
        with open(path) as fh:
            return cls(**json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


def simulated_annealing(inst: Instance, cfg: SAConfig = SAConfig(), record: bool = False):
    """Anneal from the nearest-neighbour tour using relocate and swap moves.

    Runs ``iterations`` temperature levels of ``moves_per_temperature`` moves each.

    Returns (perm, objective), plus the list of accepted tours when ``record``.
    """
    T = time_matrix(inst)
    L = 2 * inst.n
    t0 = cfg.initial_temperature
    if t0 is None:
        t0 = float(T[~np.eye(L + 1, dtype=bool)].mean())
    start, _ = nearest_neighbor(inst)
    draws = np.random.default_rng(cfg.seed).random((cfg.iterations * cfg.moves_per_temperature, 4))
    best, cost, _, trace = kernels.sa_run(T, inst.n, np.array(start), draws, t0, cfg.cooling, cfg.moves_per_temperature, record)
    result = (tuple(best), float(cost))
    if record:
        return result + ([tuple(p) for p in trace],)
    return result


def gap_percent(objective: float, reference: float) -> float:
    return (objective - reference) / reference * 100.0
