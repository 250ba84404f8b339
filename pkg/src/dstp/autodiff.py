"""Define-by-run reverse-mode differentiation over dense float64 arrays.

Every operation appends one :class:`Node` to the :class:`Tape` of its inputs.
``Tape.backward`` walks the tape in reverse and accumulates gradients.  The
operation set is deliberately small; broadcasting is not performed anywhere
except where an operation says so in its name (``add_bias``, ``repeat``).
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError

DTYPE = np.float64


class Node:
    __slots__ = ("tape", "id", "value", "parents", "requires_grad", "_backward", "_grad")

    def __init__(self, tape: "Tape", value: np.ndarray, parents: tuple = (),
                 backward: Callable | None = None, requires_grad: bool = False):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.requires_grad = requires_grad
        self._backward = backward
        self._grad = None
        self.id = tape._append(self)

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            return np.zeros_like(self.value)
        return self._grad

    def __repr__(self) -> str:
        return f"Node(id={self.id}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Node):
            return hadamard(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered record of executed operations.

    Nodes are appended in execution order, so the list is already a
    topological order of the computation graph.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def _append(self, node: Node) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, value, requires_grad: bool = True) -> Node:
        arr = np.array(value, dtype=DTYPE)  # always a private copy
        return Node(self, arr, requires_grad=requires_grad)

    def constant(self, value) -> Node:
        return self.leaf(value, requires_grad=False)

    def zero_grad(self) -> None:
        for node in self.nodes:
            node._grad = None

    def backward(self, loss: Node) -> None:
        """Populate ``grad`` of every node with d(loss)/d(node).

        Gradients from a previous call are discarded first, so replaying the
        same tape gives identical results.
        """
        if loss.tape is not self:
            raise ContractError("loss node belongs to a different tape")
        if loss.value.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        self.zero_grad()
        loss._grad = np.ones_like(loss.value)
        for node in reversed(self.nodes[: loss.id + 1]):
            if node._grad is None or node._backward is None:
                continue
            node._backward(node._grad)


def _accumulate(node: Node, g: np.ndarray) -> None:
    if not node.requires_grad:
        return
    if node._grad is None:
        node._grad = np.array(g, dtype=DTYPE)
    else:
        node._grad = node._grad + g


def _result(parents: Sequence[Node], value: np.ndarray, backward: Callable) -> Node:
    tape = parents[0].tape
    for p in parents[1:]:
        if p.tape is not tape:
            raise ContractError("operands live on different tapes")
    needs = any(p.requires_grad for p in parents)
    return Node(tape, value, tuple(parents), backward if needs else None, needs)


def _same_shape(a: Node, b: Node, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Node, b: Node) -> Node:
    """Matrix product of 2-D nodes, or batched product of 3-D nodes with equal batch size."""
    if a.value.ndim != b.value.ndim or a.value.ndim not in (2, 3):
        raise DimensionError(f"matmul: unsupported shapes {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not align")
    av, bv = a.value, b.value

    def backward(g):
        _accumulate(a, g @ np.swapaxes(bv, -1, -2))
        _accumulate(b, np.swapaxes(av, -1, -2) @ g)

    return _result((a, b), av @ bv, backward)


def transpose(a: Node) -> Node:
    """Swap the last two axes."""
    if a.value.ndim < 2:
        raise DimensionError(f"transpose: need at least 2 axes, got {a.shape}")

    def backward(g):
        _accumulate(a, np.swapaxes(g, -1, -2))

    return _result((a,), np.ascontiguousarray(np.swapaxes(a.value, -1, -2)), backward)


# ---------------------------------------------------------------------------
# elementwise


def add(a: Node, b: Node) -> Node:
    _same_shape(a, b, "add")

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result((a, b), a.value + b.value, backward)


def sub(a: Node, b: Node) -> Node:
    _same_shape(a, b, "sub")

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _result((a, b), a.value - b.value, backward)


def hadamard(a: Node, b: Node) -> Node:
    _same_shape(a, b, "hadamard")
    av, bv = a.value, b.value

    def backward(g):
        _accumulate(a, g * bv)
        _accumulate(b, g * av)

    return _result((a, b), av * bv, backward)


def scale(a: Node, c: float) -> Node:
    c = float(c)

    def backward(g):
        _accumulate(a, g * c)

    return _result((a,), a.value * c, backward)


def add_bias(a: Node, b: Node) -> Node:
    """Add vector ``b`` to every trailing-axis slice of ``a``."""
    if b.value.ndim != 1 or a.shape[-1:] != b.shape:
        raise DimensionError(f"add_bias: bias {b.shape} does not match {a.shape}")
    lead = tuple(range(a.value.ndim - 1))

    def backward(g):
        _accumulate(a, g)
        _accumulate(b, g.sum(axis=lead))

    return _result((a, b), a.value + b.value, backward)


def tanh(a: Node) -> Node:
    out = np.tanh(a.value)

    def backward(g):
        _accumulate(a, g * (1.0 - out * out))

    return _result((a,), out, backward)


def sigmoid(a: Node) -> Node:
    out = 0.5 * (1.0 + np.tanh(0.5 * a.value))

    def backward(g):
        _accumulate(a, g * out * (1.0 - out))

    return _result((a,), out, backward)


def softmax(a: Node) -> Node:
    """Softmax along the last axis, max-shifted for overflow safety."""
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        _accumulate(a, out * (g - (g * out).sum(axis=-1, keepdims=True)))

    return _result((a,), out, backward)


# ---------------------------------------------------------------------------
# structural


def concat(nodes: Sequence[Node] | Node, b: Node | None = None, axis: int = 0) -> Node:
    """Join nodes along ``axis``; accepts ``concat(a, b, axis)`` or ``concat([a, b, ...], axis=...)``."""
    if isinstance(nodes, Node):
        nodes = [nodes] if b is None else [nodes, b]
    elif b is not None:
        raise ContractError("pass either a list of nodes or two nodes")
    nodes = list(nodes)
    ref = nodes[0].value
    ax = axis % ref.ndim
    for n in nodes[1:]:
        v = n.value
        if v.ndim != ref.ndim or v.shape[:ax] + v.shape[ax + 1:] != ref.shape[:ax] + ref.shape[ax + 1:]:
            raise DimensionError(f"concat: shapes {[n.shape for n in nodes]} incompatible on axis {ax}")
    sizes = [n.shape[ax] for n in nodes]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for n, lo, hi in zip(nodes, bounds[:-1], bounds[1:]):
            if n.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[ax] = slice(lo, hi)
                _accumulate(n, g[tuple(idx)])

    return _result(nodes, np.concatenate([n.value for n in nodes], axis=ax), backward)


def stack(nodes: Sequence[Node], axis: int = 0) -> Node:
    nodes = list(nodes)
    for n in nodes[1:]:
        _same_shape(nodes[0], n, "stack")
    ax = axis % (nodes[0].value.ndim + 1)

    def backward(g):
        for i, n in enumerate(nodes):
            _accumulate(n, np.take(g, i, axis=ax))

    return _result(nodes, np.stack([n.value for n in nodes], axis=ax), backward)


def slice_axis(a: Node, axis: int, start: int, stop: int) -> Node:
    ax = axis % a.value.ndim
    if not 0 <= start < stop <= a.shape[ax]:
        raise DimensionError(f"slice [{start}:{stop}] out of range for axis {ax} of {a.shape}")
    idx = [slice(None)] * a.value.ndim
    idx[ax] = slice(start, stop)
    idx = tuple(idx)
    shape = a.shape

    def backward(g):
        full = np.zeros(shape, dtype=DTYPE)
        full[idx] = g
        _accumulate(a, full)

    return _result((a,), a.value[idx].copy(), backward)


def reshape(a: Node, shape: Sequence[int]) -> Node:
    shape = tuple(shape)
    if int(np.prod(shape)) != a.value.size:
        raise DimensionError(f"reshape: cannot view {a.shape} as {shape}")
    src = a.shape

    def backward(g):
        _accumulate(a, g.reshape(src))

    return _result((a,), a.value.reshape(shape), backward)


def repeat(a: Node, k: int, axis: int = 0) -> Node:
    """Repeat each slice along ``axis`` ``k`` times consecutively (``np.repeat`` semantics)."""
    ax = axis % a.value.ndim
    src = a.shape

    def backward(g):
        split = src[:ax] + (src[ax], k) + src[ax + 1:]
        _accumulate(a, g.reshape(split).sum(axis=ax + 1))

    return _result((a,), np.repeat(a.value, k, axis=ax), backward)


def sum_all(a: Node) -> Node:
    shape = a.shape

    def backward(g):
        _accumulate(a, np.full(shape, float(g), dtype=DTYPE))

    return _result((a,), np.array(a.value.sum(), dtype=DTYPE), backward)
