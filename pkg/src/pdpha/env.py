"""Route-construction MDP, route objective and constraint checking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from pdpha.instances import Instance


class InfeasibleActionError(ValueError):
    pass


class RouteCompleteError(RuntimeError):
    pass


class RouteValidationError(ValueError):
    pass


@dataclass(frozen=True)
class State:
    instance: Instance
    route: tuple[int, ...] = ()
    visited: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        if not self.visited:
            v = [False] * self.instance.num_nodes
            for node in self.route:
                v[node] = True
            object.__setattr__(self, "visited", tuple(v))

    @property
    def step(self) -> int:
        return len(self.route)

    @property
    def last(self) -> int:
        return self.route[-1] if self.route else 0

    @property
    def done(self) -> bool:
        return len(self.route) == 2 * self.instance.n


@dataclass
class RouteEvaluation:
    arrival_times: list[float]
    total_time: float
    feasible: bool
    violation: str | None = None


def initial_state(inst: Instance) -> State:
    return State(inst)


def mask(state: State) -> np.ndarray:
    """Boolean vector over nodes 0..2n; True where the node may be visited next."""
    if state.done:
        raise RouteCompleteError("route is complete; no action is available")
    n = state.instance.n
    visited = np.asarray(state.visited, dtype=bool)
    allowed = ~visited
    allowed[0] = False
    allowed[n + 1:] &= visited[1:n + 1]
    return allowed


def step(state: State, action: int) -> tuple[State, float]:
    allowed = mask(state)
    if not 0 <= action < len(allowed) or not allowed[action]:
        raise InfeasibleActionError(f"node {action} is masked at step {state.step}")
    inst = state.instance
    D = inst.distance_matrix()
    reward = -D[state.last, action] / inst.speed
    visited = list(state.visited)
    visited[action] = True
    new = State(inst, state.route + (action,), tuple(visited))
    if new.done:
        reward -= D[action, 0] / inst.speed
    return new, float(reward)


def _check_permutation(n: int, perm: Sequence[int]) -> str | None:
    if len(perm) != 2 * n:
        return f"route has {len(perm)} nodes, expected {2 * n}"
    seen = set()
    for node in perm:
        if not 1 <= node <= 2 * n:
            return f"node {node} is not a customer node"
        if node in seen:
            return f"node {node} visited more than once"
        seen.add(node)
    return None


def route_objective(inst: Instance, perm: Sequence[int]) -> float:
    perm = [int(p) for p in perm]
    problem = _check_permutation(inst.n, perm)
    if problem:
        raise RouteValidationError(problem)
    c = inst.coords[[0, *perm, 0]]
    return float(np.sqrt((np.diff(c, axis=0) ** 2).sum(1)).sum() / inst.speed)


def validate_route(inst: Instance, perm: Sequence[int]) -> RouteEvaluation:
    """Score any node sequence; infeasibility is reported, never raised."""
    n = inst.n
    perm = [int(p) for p in perm]
    in_range = [p for p in perm if 0 <= p <= 2 * n]
    c = inst.coords
    times = []
    t = 0.0
    prev = 0
    for node in in_range:
        t += float(np.hypot(*(c[prev] - c[node]))) / inst.speed
        times.append(t)
        prev = node
    total = t + float(np.hypot(*(c[prev] - c[0]))) / inst.speed

    violation = _check_permutation(n, perm)
    if violation is None:
        pos = {node: k for k, node in enumerate(perm)}
        for i in range(1, n + 1):
            if pos[i] > pos[i + n]:
                violation = f"precedence violated for pair ({i},{i + n}): delivery before pickup"
                break
    return RouteEvaluation(times, total, violation is None, violation)


def enumerate_feasible(n: int):
    """Yield every precedence-feasible visiting order for ``n`` pairs."""
    route: list[int] = []
    visited = [False] * (2 * n + 1)

    def rec():
        if len(route) == 2 * n:
            yield tuple(route)
            return
        for j in range(1, 2 * n + 1):
            if visited[j] or (j > n and not visited[j - n]):
                continue
            visited[j] = True
            route.append(j)
            yield from rec()
            route.pop()
            visited[j] = False

    yield from rec()


def batch_mask(visited: np.ndarray, n: int) -> np.ndarray:
    """Vectorised mask over a (B, 2n+1) visited array."""
    allowed = ~visited
    allowed[:, 0] = False
    allowed[:, n + 1:] &= visited[:, 1:n + 1]
    return allowed


def batch_route_costs(coords: np.ndarray, perms: np.ndarray, speed: float | np.ndarray = 1.0) -> np.ndarray:
    """Tour lengths for (B, 2n+1, 2) coordinates and (B, 2n) permutations."""
    B = len(perms)
    full = np.concatenate([np.zeros((B, 1), dtype=np.int64), perms, np.zeros((B, 1), dtype=np.int64)], axis=1)
    pts = np.take_along_axis(coords, full[:, :, None], axis=1)
    return np.sqrt((np.diff(pts, axis=1) ** 2).sum(-1)).sum(1) / speed
