"""Spatial (phase 1, phase 1-II, phase 2) and temporal attention stages.

All stages score a set of candidates with the additive form
``v . tanh(W [h; s] + U cand + b)`` and normalise the scores with a softmax.
Spatial stages score the rows of an attribute matrix ``[batch, rows, T]``
and weight the current column; the temporal stage scores encoder hidden
states ``[batch, T, hidden]`` and returns their convex combination.

Time indices are zero-based: ``0 <= t < T``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .cells import CellState, LstmParams, ParamSpec, lstm_specs, lstm_step, zero_state
from .errors import ContractError, DimensionError

# Assert simplex constraints on every weight vector produced; the test suite turns this on.
CHECK_WEIGHTS = os.environ.get("DSTP_CHECK_ATTENTION", "") not in ("", "0")
SIMPLEX_TOL = 1e-9


def check_simplex(w: np.ndarray, label: str = "") -> None:
    if np.any(w < 0) or np.any(np.abs(w.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise ContractError(f"attention weights {label} are not a probability vector")


def _checked(w: Node, label: str) -> Node:
    if CHECK_WEIGHTS:
        check_simplex(w.value, label)
    return w


@dataclass
class AttentionTrace:
    """Weights of one attention stage: ``weights[b, t, k]`` for sample b, step t, item k."""
    phase: str
    weights: np.ndarray


# ---------------------------------------------------------------------------
# parameters


def spatial_specs(prefix: str, window: int, driver_len: int, n_rows: int, hidden: int) -> list[ParamSpec]:
    return [
        ParamSpec(f"{prefix}.v", (window,), "uniform"),
        ParamSpec(f"{prefix}.W", (window, 2 * hidden), "uniform"),
        ParamSpec(f"{prefix}.U", (window, driver_len), "uniform"),
        ParamSpec(f"{prefix}.b", (window,), "zeros"),
        *lstm_specs(f"{prefix}.lstm", n_rows, hidden),
    ]


def temporal_specs(prefix: str, enc_hidden: int, dec_hidden: int) -> list[ParamSpec]:
    return [
        ParamSpec(f"{prefix}.v", (dec_hidden,), "uniform"),
        ParamSpec(f"{prefix}.W", (dec_hidden, 2 * dec_hidden), "uniform"),
        ParamSpec(f"{prefix}.U", (dec_hidden, enc_hidden), "uniform"),
        ParamSpec(f"{prefix}.b", (dec_hidden,), "zeros"),
    ]


class SpatialAttnParams:
    """Score parameters of one spatial stage plus its driving LSTM."""

    def __init__(self, v: Node, W: Node, U: Node, b: Node, lstm: LstmParams):
        window = v.shape[0]
        if W.shape != (window, 2 * lstm.hidden) or U.shape[0] != window or b.shape != (window,):
            raise DimensionError(
                f"inconsistent spatial shapes v={v.shape} W={W.shape} U={U.shape} b={b.shape}")
        self.v, self.W, self.U, self.b, self.lstm = v, W, U, b, lstm
        self.window = window
        self.driver_len = U.shape[1]
        self._WT = ad.transpose(W)
        self._UT = ad.transpose(U)
        self._vcol = ad.reshape(v, (window, 1))

    @classmethod
    def bind(cls, params, prefix: str) -> "SpatialAttnParams":
        return cls(params[f"{prefix}.v"], params[f"{prefix}.W"], params[f"{prefix}.U"],
                   params[f"{prefix}.b"], LstmParams.bind(params, f"{prefix}.lstm"))


class TemporalAttnParams:
    def __init__(self, v: Node, W: Node, U: Node, b: Node):
        dec = v.shape[0]
        if W.shape != (dec, 2 * dec) or U.shape[0] != dec or b.shape != (dec,):
            raise DimensionError(
                f"inconsistent temporal shapes v={v.shape} W={W.shape} U={U.shape} b={b.shape}")
        self.v, self.W, self.U, self.b = v, W, U, b
        self.dec_hidden = dec
        self.enc_hidden = U.shape[1]
        self._WT = ad.transpose(W)
        self._UT = ad.transpose(U)
        self._vcol = ad.reshape(v, (dec, 1))

    @classmethod
    def bind(cls, params, prefix: str) -> "TemporalAttnParams":
        return cls(params[f"{prefix}.v"], params[f"{prefix}.W"], params[f"{prefix}.U"],
                   params[f"{prefix}.b"])


# ---------------------------------------------------------------------------
# shared scoring


def project_candidates(cand: Node, U_T: Node) -> Node:
    """``U c`` for every candidate row of ``cand [batch, rows, L]`` -> ``[batch*rows, out]``."""
    B, rows, L = cand.shape
    return ad.reshape(cand, (B * rows, L)) @ U_T


def additive_weights(proj: Node, query: Node, vcol: Node, rows: int) -> Node:
    """Softmax over ``v . tanh(proj_k + query)`` for the ``rows`` candidates of each sample."""
    B = query.shape[0]
    e = ad.tanh(proj + ad.repeat(query, rows, axis=0)) @ vcol
    return ad.softmax(ad.reshape(e, (B, rows)))


def _state_query(state: CellState, WT: Node, b: Node) -> Node:
    return ad.add_bias(ad.concat([state.h, state.s], axis=1) @ WT, b)


def _column(values: Node, t: int) -> Node:
    B, rows, T = values.shape
    if not 0 <= t < T:
        raise ContractError(f"time index {t} outside window of length {T}")
    return ad.reshape(ad.slice_axis(values, 2, t, t + 1), (B, rows))


def spatial_step(values: Node, t: int, state: CellState, params: SpatialAttnParams,
                 proj: Node, label: str = "spatial"):
    """Weight column ``t`` of ``values`` by attention over its rows and advance the LSTM."""
    rows = values.shape[1]
    w = _checked(additive_weights(proj, _state_query(state, params._WT, params.b),
                                  params._vcol, rows), label)
    weighted = w * _column(values, t)
    return weighted, w, lstm_step(weighted, state, params.lstm)


def _check_window(X: Node, params: SpatialAttnParams) -> None:
    if X.value.ndim != 3 or X.shape[2] != params.window:
        raise DimensionError(f"expected [batch, rows, {params.window}] input, got {X.shape}")


def target_drivers(X: Node, Y: Node) -> Node:
    """Per-attribute concatenation ``[x^k; Y]`` -> ``[batch, n, 2T]``."""
    B, n, T = X.shape
    if Y.shape != (B, T):
        raise DimensionError(f"target history {Y.shape} does not match exogenous {X.shape}")
    Yrep = ad.repeat(ad.reshape(Y, (B, 1, T)), n, axis=1)
    return ad.concat([X, Yrep], axis=2)


# ---------------------------------------------------------------------------
# public single-step operations


def phase1_step(X: Node, t: int, state: CellState, params: SpatialAttnParams, proj: Node | None = None):
    """First-phase attention over the exogenous rows of ``X [batch, n, T]``.

    Returns ``(x_weighted [batch, n], alpha [batch, n], next_state)``.
    """
    _check_window(X, params)
    if params.driver_len != X.shape[2]:
        raise DimensionError(f"U expects drivers of length {params.driver_len}, got {X.shape[2]}")
    if proj is None:
        proj = project_candidates(X, params._UT)
    return spatial_step(X, t, state, params, proj, "phase 1")


def phase1_step_II(X: Node, Y: Node, t: int, state: CellState, params: SpatialAttnParams,
                   proj: Node | None = None):
    """First-phase attention driven by ``[x^k; Y]``; the weights still apply to ``x_t^k`` only."""
    _check_window(X, params)
    if params.driver_len != 2 * X.shape[2]:
        raise DimensionError(f"U expects drivers of length {params.driver_len}, got {2 * X.shape[2]}")
    if proj is None:
        proj = project_candidates(target_drivers(X, Y), params._UT)
    return spatial_step(X, t, state, params, proj, "phase 1-II")


def phase2_step(Z: Node, t: int, state: CellState, params: SpatialAttnParams,
                expected_rows: int | None = None, proj: Node | None = None):
    """Second-phase attention over the rows of ``Z`` (weighted exogenous rows plus target row)."""
    _check_window(Z, params)
    if expected_rows is not None and Z.shape[1] != expected_rows:
        raise ContractError(f"phase 2 expects {expected_rows} rows, got {Z.shape[1]}")
    if params.lstm.n_in != Z.shape[1]:
        raise ContractError(f"phase 2 LSTM takes {params.lstm.n_in} rows, got {Z.shape[1]}")
    if proj is None:
        proj = project_candidates(Z, params._UT)
    return spatial_step(Z, t, state, params, proj, "phase 2")


def temporal_step(H: Node, state: CellState, params: TemporalAttnParams, proj: Node | None = None):
    """Attention over encoder hidden states ``H [batch, T, hidden]``.

    Returns ``(context [batch, hidden], gamma [batch, T])``.
    """
    B, T, q = H.shape
    if q != params.enc_hidden:
        raise DimensionError(f"encoder states have size {q}, U expects {params.enc_hidden}")
    if state.h.shape != (B, params.dec_hidden):
        raise DimensionError(f"decoder state {state.h.shape} does not match {params.dec_hidden}")
    if proj is None:
        proj = project_candidates(H, params._UT)
    gamma = _checked(additive_weights(proj, _state_query(state, params._WT, params.b),
                                      params._vcol, T), "temporal")
    context = ad.matmul(ad.reshape(gamma, (B, 1, T)), H)
    return ad.reshape(context, (B, q)), gamma


def weighted_hidden_states(gamma: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Per-step weighted encoder states ``gamma_j * h_j`` (inspection only)."""
    return gamma[..., :, None] * H


# ---------------------------------------------------------------------------
# whole-window encoders


@dataclass
class EncoderOutput:
    weighted: Node  # [batch, rows, T] weighted inputs, column t holds step t
    hidden: Node    # [batch, T, hidden]
    weights: list[np.ndarray]


def run_spatial_encoder(values: Node, params: SpatialAttnParams, drivers: Node | None = None,
                        label: str = "spatial") -> EncoderOutput:
    """Unroll a spatial stage over the full window from a zero state."""
    _check_window(values, params)
    drivers = values if drivers is None else drivers
    if drivers.shape[2] != params.driver_len:
        raise DimensionError(f"U expects drivers of length {params.driver_len}, got {drivers.shape[2]}")
    if params.lstm.n_in != values.shape[1]:
        raise DimensionError(f"{label}: LSTM takes {params.lstm.n_in} rows, got {values.shape[1]}")
    B, rows, T = values.shape
    proj = project_candidates(drivers, params._UT)
    state = zero_state(values.tape, B, params.lstm.hidden)
    weighted, hidden, weights = [], [], []
    for t in range(T):
        x_t, w, state = spatial_step(values, t, state, params, proj, label)
        weighted.append(x_t)
        hidden.append(state.h)
        weights.append(w.value)
    return EncoderOutput(ad.stack(weighted, axis=2), ad.stack(hidden, axis=1), weights)
