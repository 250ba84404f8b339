"""MSE objective, Adam with global-norm clipping, the training loop and checkpoints."""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Tape
from .data import StandardizationStats, WindowSet
from .errors import ConfigurationError, ContractError, DataError, DimensionError, DivergenceError
from .models import ModelConfig, forward_nodes, init_params, predict_batches
from .params import ParameterStore

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 128
    learning_rate: float = 1e-3
    max_epochs: int = 100
    patience: int = 10
    val_fraction: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 2019
    clip_norm: float = 5.0
    max_steps: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if not 0 <= self.val_fraction < 0.5:
            raise ConfigurationError("val_fraction must lie in [0, 0.5)")
        if self.max_epochs < 1 or self.patience < 0:
            raise ConfigurationError("max_epochs must be >= 1 and patience >= 0")


def mse_loss(pred: Node, truth: Node) -> Node:
    """Batch mean of squared L2 residual norms; accepts ``[horizon]`` or ``[batch, horizon]``."""
    if pred.shape != truth.shape:
        raise DimensionError(f"mse_loss: prediction {pred.shape} vs truth {truth.shape}")
    batch = pred.shape[0] if pred.value.ndim == 2 else 1
    d = pred - truth
    return ad.scale(ad.sum_all(d * d), 1.0 / batch)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimizerState:
    step: int = 0


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray], threshold: float) -> float:
    """Rescale ``grads`` in place so their global L2 norm is at most ``threshold``; returns the pre-clip norm."""
    norm = global_norm(grads)
    if threshold and norm > threshold:
        factor = threshold / norm
        for k in grads:
            grads[k] = grads[k] * factor
    return norm


def adam_step(params: ParameterStore, state: OptimizerState, config: TrainConfig) -> None:
    """Clip ``params.grads`` and apply one bias-corrected Adam update in place."""
    clip_gradients(params.grads, config.clip_norm)
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, g in params.grads.items():
        m = b1 * params.first_moment[name] + (1.0 - b1) * g
        v = b2 * params.second_moment[name] + (1.0 - b2) * g * g
        params.first_moment[name] = m
        params.second_moment[name] = v
        params.values[name] = params.values[name] - config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)


# ---------------------------------------------------------------------------
# training loop


def loss_and_grads(model: ModelConfig, params: ParameterStore, X, Y, F) -> float:
    """Forward + backward on one batch; leaves gradients in ``params.grads``."""
    tape = Tape()
    bound = params.bind(tape)
    pred = forward_nodes(model, bound, tape.constant(X), tape.constant(Y))
    loss = mse_loss(pred, tape.constant(F))
    tape.backward(loss)
    bound.collect_grads()
    return float(loss.value)


def evaluate_mse(model: ModelConfig, params: ParameterStore, windows: WindowSet, batch_size: int = 512) -> float:
    pred = predict_batches(model, params, windows.X, windows.Y, batch_size)
    return float(np.sum((pred - windows.future) ** 2) / len(windows))


@dataclass
class Checkpoint:
    model: ModelConfig
    params: ParameterStore
    stats: StandardizationStats | None = None
    metadata: dict = field(default_factory=dict)


@dataclass
class EpochRecord:
    epoch: int
    train_mse: float
    val_mse: float


def split_validation(windows: WindowSet, fraction: float) -> tuple[WindowSet, WindowSet | None]:
    n_val = int(np.floor(len(windows) * fraction))
    if n_val == 0:
        return windows, None
    return windows[: len(windows) - n_val], windows[len(windows) - n_val:]


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def train(model: ModelConfig, windows: WindowSet, config: TrainConfig,
          stats: StandardizationStats | None = None, params: ParameterStore | None = None,
          ) -> tuple[Checkpoint, list[EpochRecord]]:
    """Minibatch Adam on the batch-mean MSE with early stopping on a chronological validation tail.

    Model selection uses validation MSE, or training MSE when the validation
    fraction yields no windows.  Returns the best checkpoint and the per-epoch history.
    """
    if (windows.n_exog, windows.window, windows.horizon) != (model.n_exog, model.window, model.horizon):
        raise ConfigurationError("window shapes do not match the model configuration")
    train_set, val_set = split_validation(windows, config.val_fraction)
    if len(train_set) == 0:
        raise DataError("no training windows")
    params = init_params(model) if params is None else params
    opt = OptimizerState()
    history: list[EpochRecord] = []
    best_loss, best_params, best_epoch, since_best = np.inf, params.copy(), 0, 0
    n = len(train_set)
    for epoch in range(1, config.max_epochs + 1):
        order = epoch_order(config.seed, epoch, n)
        sse = 0.0
        for b, lo in enumerate(range(0, n, config.batch_size)):
            idx = np.sort(order[lo:lo + config.batch_size])
            loss = loss_and_grads(model, params, train_set.X[idx], train_set.Y[idx], train_set.future[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch, b, loss)
            adam_step(params, opt, config)
            sse += loss * len(idx)
            if config.max_steps is not None and opt.step >= config.max_steps:
                break
        train_mse = sse / n
        val_mse = evaluate_mse(model, params, val_set) if val_set is not None else float("nan")
        history.append(EpochRecord(epoch, train_mse, val_mse))
        log.info("epoch %d train_mse %.6g val_mse %.6g", epoch, train_mse, val_mse)
        score = val_mse if val_set is not None else train_mse
        if not np.isfinite(score):
            raise DivergenceError(epoch, -1, score)
        if score < best_loss:
            best_loss, best_params, best_epoch, since_best = score, params.copy(), epoch, 0
        else:
            since_best += 1
        if since_best >= config.patience:
            break
        if config.max_steps is not None and opt.step >= config.max_steps:
            break
    meta = {"epoch": best_epoch, "best_loss": float(best_loss), "seed": config.seed,
            "steps": opt.step, "train": asdict(config)}
    return Checkpoint(model, best_params, stats, meta), history


def write_history(history: list[EpochRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,train_mse,val_mse\n")
        for r in history:
            fh.write(f"{r.epoch},{r.train_mse:.17g},{r.val_mse:.17g}\n")


def read_history(path: str | Path) -> list[EpochRecord]:
    with open(path) as fh:
        lines = fh.read().splitlines()[1:]
    out = []
    for line in lines:
        e, tr, va = line.split(",")
        out.append(EpochRecord(int(e), float(tr), float(va)))
    return out


# ---------------------------------------------------------------------------
# checkpoint container: magic, u64 header length, JSON header, float64 LE payloads

MAGIC = b"DSTPCKPT"


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    header = {
        "format": 1,
        "model": ckpt.model.to_dict(),
        "params": [{"name": k, "shape": list(v.shape)} for k, v in ckpt.params.values.items()],
        "stats": ckpt.stats.to_dict() if ckpt.stats is not None else None,
        "metadata": ckpt.metadata,
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for v in ckpt.params.values.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ContractError(f"{path} is not a checkpoint file")
    (size,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + size].decode("utf-8"))
    offset = 16 + size
    store = ParameterStore()
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        store.add(entry["name"], arr.astype(np.float64))
        offset += 8 * count
    if offset != len(data):
        raise ContractError(f"{path}: payload size does not match header")
    stats = StandardizationStats.from_dict(header["stats"]) if header["stats"] else None
    return Checkpoint(ModelConfig.from_dict(header["model"]), store, stats, header["metadata"])
