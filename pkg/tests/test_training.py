import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import dstp.training as training
from dstp.autodiff import Tape
from dstp.data import make_windows, split_and_standardize, synthesize
from dstp.errors import ConfigurationError, ContractError, DimensionError, DivergenceError
from dstp.models import ModelConfig, forward, init_params
from dstp.params import ParameterStore
from dstp.training import (
    OptimizerState, TrainConfig, adam_step, clip_gradients, epoch_order, global_norm, load_checkpoint,
    mse_loss, read_history, save_checkpoint, split_validation, train, write_history,
)
from oracles import central_difference


def small_task(rows=80, n=3, window=4, horizon=2, seed=5):
    table, _, _ = synthesize(n, rows, 2, seed=seed)
    tr, te, stats = split_and_standardize(table, rows - 20, 20)
    return make_windows(tr, window, horizon), make_windows(te, window, horizon), stats


# --- loss -----------------------------------------------------------------------------------


def test_mse_examples():
    t = Tape()
    assert mse_loss(t.leaf([1.0, 2.0]), t.constant([1.0, 2.0])).value == 0.0
    assert mse_loss(t.leaf([2.0, 3.0]), t.constant([1.0, 2.0])).value == 2.0
    assert mse_loss(t.leaf([[2.0, 3.0], [1.0, 2.0]]), t.constant([[1.0, 2.0], [1.0, 2.0]])).value == 1.0


def test_mse_length_mismatch():
    t = Tape()
    with pytest.raises(DimensionError):
        mse_loss(t.leaf([1.0, 2.0]), t.constant([1.0]))


def test_mse_gradient(rng):
    P, F = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    t = Tape()
    p = t.leaf(P)
    t.backward(mse_loss(p, t.constant(F)))
    np.testing.assert_allclose(p.grad, 2 * (P - F) / 3, rtol=0, atol=1e-15)
    numeric = central_difference(lambda: float(((P - F) ** 2).sum() / 3), P)
    assert np.abs(p.grad - numeric).max() < 1e-8


# --- optimizer ------------------------------------------------------------------------------


def store_with(value, grad):
    store = ParameterStore()
    store.add("w", np.asarray(value, dtype=float))
    store.grads["w"] = np.asarray(grad, dtype=float)
    return store


def test_zero_gradient_is_fixed_point():
    store, state = store_with([1.0, -2.0], [0.0, 0.0]), OptimizerState()
    adam_step(store, state, TrainConfig())
    np.testing.assert_array_equal(store["w"], [1.0, -2.0])
    assert state.step == 1


def test_first_step_is_signed_learning_rate():
    store = store_with([0.0, 0.0, 0.0], [0.3, -2.0, 1e-3])
    adam_step(store, OptimizerState(), TrainConfig(learning_rate=0.01))
    np.testing.assert_allclose(store["w"], [-0.01, 0.01, -0.01], rtol=0, atol=1e-6)


def test_ten_steps_on_square_decrease():
    store, state, cfg = store_with([1.0], [0.0]), OptimizerState(), TrainConfig(learning_rate=0.05)
    values = [1.0]
    for _ in range(10):
        store.grads["w"] = 2 * store["w"]
        adam_step(store, state, cfg)
        values.append(float(store["w"][0] ** 2))
    assert all(b < a for a, b in zip(values, values[1:]))


@settings(max_examples=50)
@given(st.integers(0, 2**31), st.floats(0.01, 10.0))
def test_clipping_bounds_global_norm(seed, threshold):
    rng = np.random.default_rng(seed)
    grads = {"a": rng.normal(size=(3, 4)) * 10, "b": rng.normal(size=5)}
    before = {k: v.copy() for k, v in grads.items()}
    norm = clip_gradients(grads, threshold)
    assert global_norm(grads) <= threshold * (1 + 1e-12)
    if norm <= threshold:
        for k in grads:
            np.testing.assert_array_equal(grads[k], before[k])
    else:  # direction preserved
        np.testing.assert_allclose(grads["a"] * norm / threshold, before["a"], rtol=1e-12)


def test_train_config_validation():
    for bad in (dict(batch_size=0), dict(learning_rate=0.0), dict(val_fraction=0.5), dict(patience=-1)):
        with pytest.raises(ConfigurationError):
            TrainConfig(**bad)


# --- training loop --------------------------------------------------------------------------


def test_validation_tail_is_chronological_and_disjoint():
    windows, _, _ = small_task()
    fit, val = split_validation(windows, 0.1)
    assert len(val) == int(len(windows) * 0.1)
    assert fit.origin.max() < val.origin.min()
    assert len(fit) + len(val) == len(windows)
    assert split_validation(windows[:5], 0.1)[1] is None


def test_epoch_order_is_seeded_permutation():
    a = epoch_order(2019, 3, 50)
    assert sorted(a) == list(range(50))
    assert np.array_equal(a, epoch_order(2019, 3, 50))
    assert not np.array_equal(a, epoch_order(2019, 4, 50))


def test_validation_windows_never_trained_on(monkeypatch):
    windows, _, _ = small_task()
    _, val = split_validation(windows, 0.2)
    seen = []
    real = training.loss_and_grads

    def spy(model, params, X, Y, F):
        seen.append(X.copy())
        return real(model, params, X, Y, F)

    monkeypatch.setattr(training, "loss_and_grads", spy)
    config = ModelConfig.uniform("lstm", 3, 4, 2, hidden=4)
    train(config, windows, TrainConfig(batch_size=16, max_epochs=2, val_fraction=0.2))
    trained = np.concatenate(seen)
    for x in val.X:
        assert not np.any(np.all(trained == x, axis=(1, 2)))


def test_patience_zero_runs_one_epoch():
    windows, _, _ = small_task()
    config = ModelConfig.uniform("darnn", 3, 4, 2, hidden=4)
    _, history = train(config, windows, TrainConfig(batch_size=16, max_epochs=20, patience=0))
    assert len(history) == 1


def test_same_seed_identical_history():
    windows, _, _ = small_task()
    config = ModelConfig.uniform("dstp", 3, 4, 2, hidden=4)
    cfg = TrainConfig(batch_size=16, max_epochs=3)
    a_ckpt, a = train(config, windows, cfg)
    b_ckpt, b = train(config, windows, cfg)
    assert a == b
    assert np.array_equal(a_ckpt.params.flat(), b_ckpt.params.flat())
    _, c = train(config, windows, TrainConfig(batch_size=16, max_epochs=3, seed=1))
    assert a != c


def test_best_checkpoint_reports_best_epoch():
    windows, _, _ = small_task()
    config = ModelConfig.uniform("enc-dec", 3, 4, 2, hidden=4)
    ckpt, history = train(config, windows, TrainConfig(batch_size=16, max_epochs=6, patience=6))
    best = min(history, key=lambda r: r.val_mse)
    assert ckpt.metadata["epoch"] == best.epoch
    assert ckpt.metadata["best_loss"] == best.val_mse
    _, val = split_validation(windows, 0.1)
    assert training.evaluate_mse(config, ckpt.params, val) == best.val_mse


def test_training_reduces_loss():
    windows, _, _ = small_task(rows=200)
    config = ModelConfig.uniform("dstp", 3, 4, 2, hidden=8)
    _, history = train(config, windows, TrainConfig(batch_size=32, max_epochs=15, patience=15, learning_rate=0.005))
    assert history[-1].train_mse < 0.5 * history[0].train_mse


def test_max_steps_stops_early():
    windows, _, _ = small_task()
    config = ModelConfig.uniform("gru", 3, 4, 2, hidden=4)
    ckpt, history = train(config, windows, TrainConfig(batch_size=8, max_epochs=50, max_steps=3))
    assert ckpt.metadata["steps"] == 3 and len(history) == 1


def test_divergence_names_epoch_and_batch():
    windows, _, _ = small_task()
    windows.future[:] = np.nan
    config = ModelConfig.uniform("lstm", 3, 4, 2, hidden=4)
    with pytest.raises(DivergenceError, match="epoch 1.*batch 0"):
        train(config, windows, TrainConfig(batch_size=16))


def test_shape_mismatch_with_model():
    windows, _, _ = small_task()
    with pytest.raises(ConfigurationError):
        train(ModelConfig.uniform("lstm", 3, 5, 2, hidden=4), windows, TrainConfig())


# --- persistence ----------------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, rng):
    windows, test, stats = small_task()
    config = ModelConfig.uniform("deepattn", 3, 4, 2, hidden=4)
    ckpt, _ = train(config, windows, TrainConfig(batch_size=16, max_epochs=1), stats=stats)
    save_checkpoint(ckpt, tmp_path / "m.ckpt")
    back = load_checkpoint(tmp_path / "m.ckpt")
    assert back.model == config
    assert back.params.names() == ckpt.params.names()
    for name in ckpt.params.names():
        assert np.array_equal(back.params[name], ckpt.params[name])
    assert back.metadata == ckpt.metadata
    np.testing.assert_array_equal(back.stats.mean, stats.mean)
    before = forward(config, ckpt.params, test.X, test.Y).prediction
    after = forward(back.model, back.params, test.X, test.Y).prediction
    assert np.array_equal(before, after)


def test_checkpoint_special_values(tmp_path):
    config = ModelConfig.uniform("lstm", 1, 2, 1, hidden=1)
    params = init_params(config)
    params.values["head.b_out"] = np.array([5e-324])
    params.values["head.v_y"] = np.array([[-0.0]])
    save_checkpoint(training.Checkpoint(config, params), tmp_path / "c")
    back = load_checkpoint(tmp_path / "c")
    assert back.params["head.b_out"][0] == 5e-324
    assert np.signbit(back.params["head.v_y"][0, 0])


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "bad").write_bytes(b"not a checkpoint")
    with pytest.raises(ContractError):
        load_checkpoint(tmp_path / "bad")


def test_history_round_trip(tmp_path):
    history = [training.EpochRecord(1, 0.1 + 0.2, float("nan")), training.EpochRecord(2, 1 / 3, 2 / 7)]
    write_history(history, tmp_path / "h.csv")
    back = read_history(tmp_path / "h.csv")
    assert back[0].train_mse == 0.1 + 0.2 and np.isnan(back[0].val_mse)
    assert back[1] == history[1]
