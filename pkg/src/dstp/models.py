"""Forecaster assembly: DSTP-RNN, DSTP-RNN-II, DeepAttn and the neural baselines."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .attention import (AttentionTrace, SpatialAttnParams, TemporalAttnParams, project_candidates,
                        run_spatial_encoder, spatial_specs, target_drivers, temporal_specs,
                        temporal_step)
from .autodiff import Node, Tape
from .cells import (GruParams, LstmParams, ParamSpec, gru_specs, gru_step, lstm_specs, lstm_step,
                    zero_state)
from .errors import ConfigurationError, DimensionError
from .params import BoundParams, ParameterStore

ARCHITECTURES = ("lstm", "gru", "enc-dec", "input-attn", "temp-attn", "darnn", "dstp", "dstp2", "deepattn")
ATTENTION_ARCHS = ("input-attn", "temp-attn", "darnn", "dstp", "dstp2", "deepattn")
TWO_PHASE_ARCHS = ("dstp", "dstp2", "deepattn")


@dataclass(frozen=True)
class ModelConfig:
    arch: str
    n_exog: int
    window: int
    horizon: int
    hidden_phase1: int = 128
    hidden_phase2: int = 128
    hidden_decoder: int = 128
    seed: int = 2019
    # Ablation switch: append the target row to the input of the last spatial phase.
    target_in_last_phase: bool = True

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ConfigurationError(f"unknown architecture {self.arch!r}; choose from {ARCHITECTURES}")
        for name in ("n_exog", "window", "horizon", "hidden_phase1", "hidden_phase2", "hidden_decoder"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
        if not self.target_in_last_phase and self.arch not in TWO_PHASE_ARCHS:
            raise ConfigurationError(f"{self.arch!r} has no last spatial phase to drop the target row from")

    @classmethod
    def uniform(cls, arch: str, n_exog: int, window: int, horizon: int, hidden: int = 128, **kw):
        return cls(arch, n_exog, window, horizon, hidden, hidden, hidden, **kw)

    def replace(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    @property
    def has_attention(self) -> bool:
        return self.arch in ATTENTION_ARCHS

    @property
    def phase2_rows(self) -> int:
        rows = 2 * self.n_exog if self.arch == "dstp2" else self.n_exog
        return rows + 1 if self.target_in_last_phase else rows

    @property
    def context_size(self) -> int:
        """Size of the encoder states seen by the decoder."""
        return self.hidden_phase2 if self.arch in TWO_PHASE_ARCHS else self.hidden_phase1


# ---------------------------------------------------------------------------
# parameter layout


def _decoder_specs(ctx: int, dec: int, horizon: int) -> list[ParamSpec]:
    return [
        ParamSpec("decoder.w", (ctx + 1,), "uniform"),
        ParamSpec("decoder.b", (1,), "zeros"),
        *lstm_specs("decoder.lstm", 1, dec),
        ParamSpec("head.W_y", (dec, dec + ctx), "uniform"),
        ParamSpec("head.b_y", (dec,), "zeros"),
        ParamSpec("head.v_y", (horizon, dec), "uniform"),
        ParamSpec("head.b_out", (horizon,), "zeros"),
    ]


def param_specs(config: ModelConfig) -> list[ParamSpec]:
    a, n, T, tau = config.arch, config.n_exog, config.window, config.horizon
    m, q, p = config.hidden_phase1, config.hidden_phase2, config.hidden_decoder
    specs: list[ParamSpec] = []
    if a in ("lstm", "gru"):
        cell = lstm_specs if a == "lstm" else gru_specs
        specs += cell("encoder", n + 1, m)
        specs += [ParamSpec("head.v_y", (tau, m), "uniform"), ParamSpec("head.b_out", (tau,), "zeros")]
        return specs
    if a in ("enc-dec", "temp-attn"):
        specs += lstm_specs("encoder", n, m)
    if a in ("input-attn", "darnn", "dstp", "dstp2", "deepattn"):
        specs += spatial_specs("phase1", T, T, n, m)
    if a == "dstp2":
        specs += spatial_specs("phase1_2", T, 2 * T, n, m)
    if a in TWO_PHASE_ARCHS:
        specs += spatial_specs("phase2", T, T, config.phase2_rows, q)
    if a == "deepattn":
        specs += spatial_specs("phase3", T, T, config.phase2_rows, q)
    ctx = config.context_size
    if a in ("temp-attn", "darnn", "dstp", "dstp2", "deepattn"):
        specs += temporal_specs("temporal", ctx, p)
    specs += _decoder_specs(ctx, p, tau)
    return specs


def parameter_count(config: ModelConfig) -> int:
    return int(sum(np.prod(s.shape) for s in param_specs(config)))


def init_params(config: ModelConfig, seed: int | None = None) -> ParameterStore:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, LSTM forget-gate bias 1."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    store = ParameterStore()
    for spec in param_specs(config):
        if spec.init == "uniform":
            bound = 1.0 / np.sqrt(spec.shape[-1])
            value = rng.uniform(-bound, bound, size=spec.shape)
        else:
            value = np.zeros(spec.shape)
            if spec.init == "lstm_bias":
                hidden = spec.shape[0] // 4
                value[hidden:2 * hidden] = 1.0
        store.add(spec.name, value)
    return store


def zero_params(config: ModelConfig) -> ParameterStore:
    store = ParameterStore()
    for spec in param_specs(config):
        store.add(spec.name, np.zeros(spec.shape))
    return store


# ---------------------------------------------------------------------------
# forward pass


@dataclass
class ForwardOutput:
    prediction: np.ndarray
    traces: list[AttentionTrace] = field(default_factory=list)


def _trace(label: str, weights: list[np.ndarray]) -> AttentionTrace:
    return AttentionTrace(label, np.stack(weights, axis=1))


def _decode(config: ModelConfig, P: BoundParams, Y: Node, states: Node | None, fixed: Node | None,
            traces: list | None) -> Node:
    """Shared decoder: target history + context -> decoder LSTM -> affine readout of all horizons."""
    B, T = Y.shape
    dec = LstmParams.bind(P, "decoder.lstm")
    w = ad.reshape(P["decoder.w"], (config.context_size + 1, 1))
    state = zero_state(Y.tape, B, dec.hidden)
    if states is not None:
        tp = TemporalAttnParams.bind(P, "temporal")
        proj = project_candidates(states, tp._UT)
    gammas = []
    context = fixed
    for t in range(T):
        if states is not None:
            context, gamma = temporal_step(states, state, tp, proj)
            gammas.append(gamma.value)
        y_t = ad.slice_axis(Y, 1, t, t + 1)
        y_tilde = ad.add_bias(ad.concat([y_t, context], axis=1) @ w, P["decoder.b"])
        state = lstm_step(y_tilde, state, dec)
    if traces is not None and gammas:
        traces.append(_trace("temporal", gammas))
    hidden = ad.add_bias(ad.concat([state.h, context], axis=1) @ ad.transpose(P["head.W_y"]), P["head.b_y"])
    return ad.add_bias(hidden @ ad.transpose(P["head.v_y"]), P["head.b_out"])


def _plain_encoder(config: ModelConfig, P: BoundParams, inputs: Node) -> Node:
    """Unroll the plain encoder cell over ``inputs [batch, features, T]``; returns states ``[batch, T, hidden]``."""
    B, F, T = inputs.shape
    gru = config.arch == "gru"
    cell = GruParams.bind(P, "encoder") if gru else LstmParams.bind(P, "encoder")
    state = zero_state(inputs.tape, B, cell.hidden, with_cell=not gru)
    hidden = []
    for t in range(T):
        x_t = ad.reshape(ad.slice_axis(inputs, 2, t, t + 1), (B, F))
        if gru:
            state.h = gru_step(x_t, state.h, cell)
        else:
            state = lstm_step(x_t, state, cell)
        hidden.append(state.h)
    return ad.stack(hidden, axis=1)


def _last_state(states: Node) -> Node:
    B, T, H = states.shape
    return ad.reshape(ad.slice_axis(states, 1, T - 1, T), (B, H))


def _with_target(config: ModelConfig, rows: Node, Y: Node) -> Node:
    if not config.target_in_last_phase:
        return rows
    B, T = Y.shape
    return ad.concat([rows, ad.reshape(Y, (B, 1, T))], axis=1)


def forward_nodes(config: ModelConfig, P: BoundParams, X: Node, Y: Node,
                  traces: list | None = None) -> Node:
    """Batched forward pass on the tape. ``X [batch, n, T]``, ``Y [batch, T]`` -> ``[batch, horizon]``."""
    B = X.shape[0]
    if X.shape[1:] != (config.n_exog, config.window) or Y.shape != (B, config.window):
        raise DimensionError(
            f"inputs X{X.shape}, Y{Y.shape} do not match n={config.n_exog}, T={config.window}")
    a = config.arch

    if a in ("lstm", "gru"):
        inputs = ad.concat([X, ad.reshape(Y, (B, 1, config.window))], axis=1)
        h = _last_state(_plain_encoder(config, P, inputs))
        return ad.add_bias(h @ ad.transpose(P["head.v_y"]), P["head.b_out"])

    if a in ("enc-dec", "temp-attn"):
        states = _plain_encoder(config, P, X)
        if a == "enc-dec":
            return _decode(config, P, Y, None, _last_state(states), traces)
        return _decode(config, P, Y, states, None, traces)

    phase1 = run_spatial_encoder(X, SpatialAttnParams.bind(P, "phase1"), label="phase 1")
    if traces is not None:
        traces.append(_trace("1", phase1.weights))
    if a == "input-attn":
        return _decode(config, P, Y, None, _last_state(phase1.hidden), traces)
    if a == "darnn":
        return _decode(config, P, Y, phase1.hidden, None, traces)

    rows = phase1.weighted
    if a == "dstp2":
        p1b = SpatialAttnParams.bind(P, "phase1_2")
        phase1b = run_spatial_encoder(X, p1b, drivers=target_drivers(X, Y), label="phase 1-II")
        if traces is not None:
            traces.append(_trace("1-II", phase1b.weights))
        rows = ad.concat([rows, phase1b.weighted], axis=1)
    Z = _with_target(config, rows, Y)
    last = run_spatial_encoder(Z, SpatialAttnParams.bind(P, "phase2"), label="phase 2")
    if traces is not None:
        traces.append(_trace("2", last.weights))
    if a == "deepattn":
        last = run_spatial_encoder(last.weighted, SpatialAttnParams.bind(P, "phase3"), label="phase 3")
        if traces is not None:
            traces.append(_trace("3", last.weights))
    return _decode(config, P, Y, last.hidden, None, traces)


def forward(config: ModelConfig, params: ParameterStore, X, Y, trace: bool = False) -> ForwardOutput:
    """Predict the next ``horizon`` target values.

    Accepts a single window (``X [n, T]``, ``Y [T]``) or a batch
    (``X [batch, n, T]``, ``Y [batch, T]``); the prediction has the matching
    leading shape.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X, Y = X[None], Y[None]
    if X.ndim != 3 or Y.ndim != 2:
        raise DimensionError(f"unsupported input ranks X{X.shape}, Y{Y.shape}")
    tape = Tape()
    P = params.bind(tape, requires_grad=False)
    traces: list | None = [] if trace else None
    pred = forward_nodes(config, P, tape.constant(X), tape.constant(Y), traces).value
    if single:
        pred = pred[0]
        traces = [AttentionTrace(t.phase, t.weights[0]) for t in traces] if trace else None
    return ForwardOutput(pred, traces or [])


def predict_batches(config: ModelConfig, params: ParameterStore, X: np.ndarray, Y: np.ndarray,
                    batch_size: int = 512) -> np.ndarray:
    out = [forward(config, params, X[i:i + batch_size], Y[i:i + batch_size]).prediction
           for i in range(0, len(X), batch_size)]
    return np.concatenate(out, axis=0) if out else np.zeros((0, config.horizon))
