"""Named parameter collections."""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator

import numpy as np

from pdpha.nn.tensor import Tensor


class Parameter(Tensor):
    __slots__ = ()

    def __init__(self, data, name: str = ""):
        super().__init__(np.array(data, dtype=np.float64, copy=True), requires_grad=True, name=name)


class ParameterSet:
    """An ordered name -> Parameter mapping with the helpers training needs."""

    def __init__(self):
        self._params: OrderedDict[str, Parameter] = OrderedDict()

    def add(self, name: str, data) -> Parameter:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        p = Parameter(data, name=name)
        self._params[name] = p
        return p

    def uniform(self, rng: np.random.Generator, name: str, shape, bound: float) -> Parameter:
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def count(self) -> int:
        """Total number of scalar entries."""
        return int(sum(p.data.size for p in self._params.values()))

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def state_dict(self) -> OrderedDict[str, np.ndarray]:
        return OrderedDict((k, p.data.copy()) for k, p in self._params.items())

    def load_state_dict(self, state) -> None:
        missing = [k for k in self._params if k not in state]
        if missing:
            raise KeyError(f"missing parameter tensor {missing[0]!r}")
        extra = [k for k in state if k not in self._params]
        if extra:
            raise KeyError(f"unexpected parameter tensor {extra[0]!r}")
        for k, p in self._params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"shape mismatch for tensor {k!r}: checkpoint {arr.shape} vs model {p.data.shape}"
                )
        for k, p in self._params.items():
            p.data = np.array(state[k], dtype=np.float64, copy=True)
            p.grad = None

    def copy_from(self, other: "ParameterSet") -> None:
        self.load_state_dict(other.state_dict())
