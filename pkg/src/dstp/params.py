"""Named learnable arrays with gradient and optimizer-moment slots."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import DTYPE, Node, Tape
from .errors import DimensionError


@dataclass
class ParameterStore:
    values: dict[str, np.ndarray] = field(default_factory=dict)
    grads: dict[str, np.ndarray] = field(default_factory=dict)
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.values:
            raise KeyError(f"duplicate parameter {name!r}")
        value = np.asarray(value, dtype=DTYPE).copy()
        self.values[name] = value
        self.grads[name] = np.zeros_like(value)
        self.first_moment[name] = np.zeros_like(value)
        self.second_moment[name] = np.zeros_like(value)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __iter__(self):
        return iter(self.values)

    def names(self) -> list[str]:
        return list(self.values)

    def shapes(self) -> dict[str, tuple]:
        return {k: v.shape for k, v in self.values.items()}

    def count(self) -> int:
        return int(sum(v.size for v in self.values.values()))

    def set(self, name: str, value: np.ndarray) -> None:
        value = np.asarray(value, dtype=DTYPE)
        if value.shape != self.values[name].shape:
            raise DimensionError(f"{name}: expected shape {self.values[name].shape}, got {value.shape}")
        self.values[name] = value.copy()

    def copy(self) -> "ParameterStore":
        out = ParameterStore()
        for name, v in self.values.items():
            out.add(name, v)
            out.first_moment[name] = self.first_moment[name].copy()
            out.second_moment[name] = self.second_moment[name].copy()
        return out

    def zeros_like(self) -> "ParameterStore":
        out = ParameterStore()
        for name, v in self.values.items():
            out.add(name, np.zeros_like(v))
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.values.values()])

    def bind(self, tape: Tape, requires_grad: bool = True) -> "BoundParams":
        return BoundParams(self, tape, requires_grad)


class BoundParams:
    """Tape leaves for the parameters of one forward pass, created on first use."""

    def __init__(self, store: ParameterStore, tape: Tape, requires_grad: bool = True):
        self.store = store
        self.tape = tape
        self.requires_grad = requires_grad
        self.leaves: dict[str, Node] = {}

    def __getitem__(self, name: str) -> Node:
        node = self.leaves.get(name)
        if node is None:
            node = self.tape.leaf(self.store.values[name], requires_grad=self.requires_grad)
            self.leaves[name] = node
        return node

    def collect_grads(self) -> None:
        """Copy leaf gradients into the store; untouched parameters get zeros."""
        for name, value in self.store.values.items():
            node = self.leaves.get(name)
            self.store.grads[name] = node.grad if node is not None else np.zeros_like(value)
