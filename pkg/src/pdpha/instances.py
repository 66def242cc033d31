"""Problem instances: data model, random generators, distances and JSON-lines I/O.

Node indexing: 0 is the depot, 1..n are pickups and n+1..2n are deliveries.
Pickup ``i`` is paired with delivery ``i + n``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

INSTANCE_SUFFIX = ".pdp.jsonl"


class InvalidConfigError(ValueError):
    pass


class InstanceValidationError(ValueError):
    pass


class InstanceFormatError(ValueError):
    """Raised for malformed instance files; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InstanceFileValidationError(InstanceFormatError, InstanceValidationError):
    pass


@dataclass(frozen=True, eq=False)
class Instance:
    depot: np.ndarray  # (2,)
    pickups: np.ndarray  # (n, 2)
    deliveries: np.ndarray  # (n, 2)
    speed: float = 1.0

    def __post_init__(self):
        depot = np.asarray(self.depot, dtype=np.float64).reshape(2)
        pickups = np.asarray(self.pickups, dtype=np.float64).reshape(-1, 2)
        deliveries = np.asarray(self.deliveries, dtype=np.float64).reshape(-1, 2)
        if len(pickups) != len(deliveries):
            raise InstanceValidationError(
                f"pair-count mismatch: {len(pickups)} pickups vs {len(deliveries)} deliveries"
            )
        if len(pickups) < 1:
            raise ValueError("instance needs at least one pickup/delivery pair")
        if not self.speed > 0:
            raise ValueError(f"speed must be positive, got {self.speed}")
        for arr in (depot, pickups, deliveries):
            if not np.isfinite(arr).all():
                raise ValueError("coordinates must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "depot", depot)
        object.__setattr__(self, "pickups", pickups)
        object.__setattr__(self, "deliveries", deliveries)
        object.__setattr__(self, "speed", float(self.speed))

    @property
    def n(self) -> int:
        return len(self.pickups)

    @property
    def num_nodes(self) -> int:
        return 2 * self.n + 1

    @property
    def coords(self) -> np.ndarray:
        """All node coordinates as a (2n+1, 2) array in node-index order."""
        return np.vstack([self.depot[None, :], self.pickups, self.deliveries])

    def distance_matrix(self) -> np.ndarray:
        c = self.coords
        diff = c[:, None, :] - c[None, :, :]
        return np.sqrt((diff**2).sum(-1))

    def pair_of(self, node: int) -> int:
        if node == 0:
            raise ValueError("the depot has no pair")
        self._check_index(node)
        return node + self.n if node <= self.n else node - self.n

    def is_pickup(self, node: int) -> bool:
        return 1 <= node <= self.n

    def is_delivery(self, node: int) -> bool:
        return self.n < node <= 2 * self.n

    def _check_index(self, i: int) -> None:
        if not 0 <= i <= 2 * self.n:
            raise IndexError(f"node index {i} out of range 0..{2 * self.n}")

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.speed == other.speed
            and np.array_equal(self.depot, other.depot)
            and np.array_equal(self.pickups, other.pickups)
            and np.array_equal(self.deliveries, other.deliveries)
        )

    def __hash__(self):
        return hash((self.speed, self.depot.tobytes(), self.pickups.tobytes(), self.deliveries.tobytes()))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "speed": self.speed,
            "depot": self.depot.tolist(),
            "pickups": self.pickups.tolist(),
            "deliveries": self.deliveries.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        inst = cls(
            depot=d["depot"],
            pickups=d["pickups"],
            deliveries=d["deliveries"],
            speed=d.get("speed", 1.0),
        )
        if "n" in d and int(d["n"]) != inst.n:
            raise ValueError(f"declared n={d['n']} but found {inst.n} pairs")
        return inst


def distance(inst: Instance, i: int, j: int) -> float:
    inst._check_index(i)
    inst._check_index(j)
    c = inst.coords
    return float(np.hypot(*(c[i] - c[j])))


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    distribution: str = "uniform"
    sdv: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidConfigError(f"n must be >= 1, got {self.n}")
        if self.distribution not in ("uniform", "gaussian"):
            raise InvalidConfigError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "gaussian" and not self.sdv > 0:
            raise InvalidConfigError(f"sdv must be positive, got {self.sdv}")


def sample_points(rng: np.random.Generator, count: int, distribution: str = "uniform", sdv: float = 1.0) -> np.ndarray:
    """Draw ``count`` points in the unit square.

    Gaussian points are centred at (0.5, 0.5) and points falling outside the
    square are redrawn.
    """
    if distribution == "uniform":
        return rng.random((count, 2))
    if distribution != "gaussian":
        raise InvalidConfigError(f"unknown distribution {distribution!r}")
    out = np.empty((count, 2))
    filled = 0
    while filled < count:
        cand = rng.normal(0.5, sdv, size=(count - filled, 2))
        ok = cand[((cand >= 0.0) & (cand <= 1.0)).all(axis=1)]
        out[filled:filled + len(ok)] = ok
        filled += len(ok)
    return out


def _draw_instance(rng: np.random.Generator, n: int, distribution: str, sdv: float) -> Instance:
    pts = sample_points(rng, 2 * n + 1, distribution, sdv)
    return Instance(depot=pts[0], pickups=pts[1:n + 1], deliveries=pts[n + 1:])


def generate(config: GeneratorConfig) -> Instance:
    rng = np.random.default_rng(config.seed)
    return _draw_instance(rng, config.n, config.distribution, config.sdv)


def generate_many(config: GeneratorConfig, count: int) -> list[Instance]:
    """``count`` instances from one seeded stream."""
    rng = np.random.default_rng(config.seed)
    return [_draw_instance(rng, config.n, config.distribution, config.sdv) for _ in range(count)]


def random_instances(rng: np.random.Generator, n: int, count: int, distribution: str = "uniform", sdv: float = 1.0) -> list[Instance]:
    return [_draw_instance(rng, n, distribution, sdv) for _ in range(count)]


def save_instances(instances: Iterable[Instance], path: str | Path) -> None:
    with open(path, "w") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict()) + "\n")


def load_instances(path: str | Path) -> list[Instance]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise InstanceFormatError(f"invalid JSON ({e.msg})", lineno) from e
            if not isinstance(d, dict):
                raise InstanceFormatError("expected a JSON object", lineno)
            try:
                out.append(Instance.from_dict(d))
            except InstanceValidationError as e:
                raise InstanceFileValidationError(str(e), lineno) from e
            except (KeyError, TypeError, ValueError) as e:
                raise InstanceFormatError(str(e), lineno) from e
    return out


def stack_coords(instances: Sequence[Instance]) -> np.ndarray:
    """(B, 2n+1, 2) coordinates; all instances must share n."""
    ns = {inst.n for inst in instances}
    if len(ns) != 1:
        raise ValueError(f"instances must share n, got sizes {sorted(ns)}")
    return np.stack([inst.coords for inst in instances])
