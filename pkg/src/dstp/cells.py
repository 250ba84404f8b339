"""LSTM and GRU step functions on the tape.

Gate weights are stored stacked along the first axis: LSTM in the order
(input, forget, output, candidate), GRU in the order (update, reset,
candidate).  All step functions take batch-major inputs ``[batch, features]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .errors import DimensionError

LSTM_GATES = ("input", "forget", "output", "candidate")
GRU_GATES = ("update", "reset", "candidate")


class ParamSpec(NamedTuple):
    name: str
    shape: tuple
    init: str  # "uniform" | "zeros" | "lstm_bias"


def lstm_specs(prefix: str, n_in: int, hidden: int) -> list[ParamSpec]:
    return [
        ParamSpec(f"{prefix}.W_x", (4 * hidden, n_in), "uniform"),
        ParamSpec(f"{prefix}.W_h", (4 * hidden, hidden), "uniform"),
        ParamSpec(f"{prefix}.b", (4 * hidden,), "lstm_bias"),
    ]


def gru_specs(prefix: str, n_in: int, hidden: int) -> list[ParamSpec]:
    return [
        ParamSpec(f"{prefix}.W_x", (3 * hidden, n_in), "uniform"),
        ParamSpec(f"{prefix}.W_h", (3 * hidden, hidden), "uniform"),
        ParamSpec(f"{prefix}.b", (3 * hidden,), "zeros"),
    ]


@dataclass
class CellState:
    h: Node
    s: Node | None = None


def zero_state(tape: ad.Tape, batch: int, hidden: int, with_cell: bool = True) -> CellState:
    h = tape.constant(np.zeros((batch, hidden)))
    return CellState(h, tape.constant(np.zeros((batch, hidden))) if with_cell else None)


class LstmParams:
    def __init__(self, W_x: Node, W_h: Node, b: Node):
        rows = W_x.shape[0]
        if rows % 4 or W_h.shape != (rows, rows // 4) or b.shape != (rows,):
            raise DimensionError(
                f"inconsistent LSTM shapes W_x={W_x.shape} W_h={W_h.shape} b={b.shape}")
        self.W_x, self.W_h, self.b = W_x, W_h, b
        self.hidden = rows // 4
        self.n_in = W_x.shape[1]
        self._W_xT = ad.transpose(W_x)
        self._W_hT = ad.transpose(W_h)

    @classmethod
    def bind(cls, params, prefix: str) -> "LstmParams":
        return cls(params[f"{prefix}.W_x"], params[f"{prefix}.W_h"], params[f"{prefix}.b"])


def lstm_step(x: Node, state: CellState, params: LstmParams) -> CellState:
    """One LSTM step without peepholes."""
    if x.value.ndim != 2 or x.shape[1] != params.n_in:
        raise DimensionError(f"lstm_step: input {x.shape} does not match n_in={params.n_in}")
    if state.h.shape != (x.shape[0], params.hidden):
        raise DimensionError(f"lstm_step: state {state.h.shape} does not match hidden={params.hidden}")
    H = params.hidden
    z = ad.add_bias(x @ params._W_xT + state.h @ params._W_hT, params.b)
    i = ad.sigmoid(ad.slice_axis(z, 1, 0, H))
    f = ad.sigmoid(ad.slice_axis(z, 1, H, 2 * H))
    o = ad.sigmoid(ad.slice_axis(z, 1, 2 * H, 3 * H))
    g = ad.tanh(ad.slice_axis(z, 1, 3 * H, 4 * H))
    s = f * state.s + i * g
    return CellState(o * ad.tanh(s), s)


class GruParams:
    def __init__(self, W_x: Node, W_h: Node, b: Node):
        rows = W_x.shape[0]
        if rows % 3 or W_h.shape != (rows, rows // 3) or b.shape != (rows,):
            raise DimensionError(
                f"inconsistent GRU shapes W_x={W_x.shape} W_h={W_h.shape} b={b.shape}")
        self.W_x, self.W_h, self.b = W_x, W_h, b
        self.hidden = H = rows // 3
        self.n_in = W_x.shape[1]
        self._W_xT = ad.transpose(W_x)
        self._W_gatesT = ad.transpose(ad.slice_axis(W_h, 0, 0, 2 * H))
        self._W_candT = ad.transpose(ad.slice_axis(W_h, 0, 2 * H, 3 * H))
        self._b_gates = ad.slice_axis(b, 0, 0, 2 * H)
        self._b_cand = ad.slice_axis(b, 0, 2 * H, 3 * H)

    @classmethod
    def bind(cls, params, prefix: str) -> "GruParams":
        return cls(params[f"{prefix}.W_x"], params[f"{prefix}.W_h"], params[f"{prefix}.b"])


def gru_step(x: Node, h: Node, params: GruParams) -> Node:
    """One GRU step: ``h' = u*h + (1-u)*tanh(W x + U (r*h) + b)``."""
    if x.value.ndim != 2 or x.shape[1] != params.n_in:
        raise DimensionError(f"gru_step: input {x.shape} does not match n_in={params.n_in}")
    if h.shape != (x.shape[0], params.hidden):
        raise DimensionError(f"gru_step: state {h.shape} does not match hidden={params.hidden}")
    H = params.hidden
    zx = x @ params._W_xT
    gates = ad.sigmoid(ad.add_bias(ad.slice_axis(zx, 1, 0, 2 * H) + h @ params._W_gatesT,
                                   params._b_gates))
    u = ad.slice_axis(gates, 1, 0, H)
    r = ad.slice_axis(gates, 1, H, 2 * H)
    cand = ad.tanh(ad.add_bias(ad.slice_axis(zx, 1, 2 * H, 3 * H) + (r * h) @ params._W_candT,
                               params._b_cand))
    return u * h + cand - u * cand
