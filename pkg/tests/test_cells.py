import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import dstp.autodiff as ad
from dstp.autodiff import Tape
from dstp.cells import CellState, GruParams, LstmParams, gru_step, lstm_step, zero_state
from dstp.errors import DimensionError
from oracles import central_difference, gru, lstm, relative_errors


def lstm_arrays(rng, n_in, hidden, scale=0.5):
    return [rng.uniform(-scale, scale, size=s) for s in ((4 * hidden, n_in), (4 * hidden, hidden), (4 * hidden,))]


def gru_arrays(rng, n_in, hidden, scale=0.5):
    return [rng.uniform(-scale, scale, size=s) for s in ((3 * hidden, n_in), (3 * hidden, hidden), (3 * hidden,))]


def run_lstm(arrays, x, h, s):
    t = Tape()
    leaves = [t.leaf(a) for a in arrays]
    out = lstm_step(t.leaf(x), CellState(t.leaf(h), t.leaf(s)), LstmParams(*leaves))
    return t, leaves, out


def test_zero_params_zero_state_gives_zero():
    out = run_lstm([np.zeros((4, 3)), np.zeros((4, 1)), np.zeros(4)], np.array([[1.0, -2.0, 3.0]]),
                   np.zeros((1, 1)), np.zeros((1, 1)))[2]
    np.testing.assert_array_equal(out.h.value, [[0.0]])
    np.testing.assert_array_equal(out.s.value, [[0.0]])


def test_zero_params_with_cell_state():
    out = run_lstm([np.zeros((4, 2)), np.zeros((4, 1)), np.zeros(4)], np.array([[0.3, 0.1]]),
                   np.zeros((1, 1)), np.array([[2.0]]))[2]
    assert out.s.value[0, 0] == 1.0
    # 0.5 * tanh(1), evaluated directly from the gate formulas
    np.testing.assert_allclose(out.h.value, [[0.3807970779778824]], rtol=0, atol=1e-12)


def test_lstm_matches_oracle(rng):
    arrays = lstm_arrays(rng, 3, 4)
    x, h, s = rng.normal(size=(1, 3)), rng.normal(size=(1, 4)), rng.normal(size=(1, 4))
    out = run_lstm(arrays, x, h, s)[2]
    h_ref, s_ref = lstm(x[0], h[0], s[0], *arrays)
    np.testing.assert_allclose(out.h.value[0], h_ref, rtol=0, atol=1e-14)
    np.testing.assert_allclose(out.s.value[0], s_ref, rtol=0, atol=1e-14)


def test_lstm_gradients_match_finite_differences(rng):
    arrays = lstm_arrays(rng, 3, 4)
    x, h, s = rng.normal(size=(2, 3)), rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
    t, leaves, out = run_lstm(arrays, x, h, s)
    t.backward(ad.sum_all(out.h))
    for leaf, arr in zip(leaves, arrays):
        num = central_difference(lambda: float(run_lstm(arrays, x, h, s)[2].h.value.sum()), arr)
        assert relative_errors(leaf.grad, num).max() < 1e-5


def test_lstm_shape_errors(rng):
    arrays = lstm_arrays(rng, 3, 4)
    with pytest.raises(DimensionError):
        run_lstm(arrays, np.ones((1, 2)), np.zeros((1, 4)), np.zeros((1, 4)))
    with pytest.raises(DimensionError):
        run_lstm(arrays, np.ones((1, 3)), np.zeros((1, 5)), np.zeros((1, 5)))


@settings(max_examples=30)
@given(st.integers(0, 2**31), st.floats(0.1, 20.0))
def test_lstm_hidden_bounded(seed, scale):
    rng = np.random.default_rng(seed)
    arrays = lstm_arrays(rng, 3, 5, scale)
    out = run_lstm(arrays, rng.normal(size=(4, 3)) * scale, rng.uniform(-1, 1, (4, 5)), rng.normal(size=(4, 5)) * scale)[2]
    assert np.all(np.abs(out.h.value) <= 1.0)


def test_lstm_deterministic(rng):
    arrays = lstm_arrays(rng, 3, 4)
    x, h, s = rng.normal(size=(1, 3)), rng.normal(size=(1, 4)), rng.normal(size=(1, 4))
    a, b = run_lstm(arrays, x, h, s)[2], run_lstm(arrays, x, h, s)[2]
    assert np.array_equal(a.h.value, b.h.value) and np.array_equal(a.s.value, b.s.value)


@pytest.mark.parametrize("T", [1, 5, 20])
def test_unrolled_lstm_gradient_reaches_first_step(T, rng):
    hidden = 8
    bound = 1 / np.sqrt(hidden)
    arrays = [rng.uniform(-1 / np.sqrt(3), 1 / np.sqrt(3), (4 * hidden, 3)),
              rng.uniform(-bound, bound, (4 * hidden, hidden)), np.zeros(4 * hidden)]
    arrays[2][hidden:2 * hidden] = 1.0
    t = Tape()
    params = LstmParams(*[t.leaf(a) for a in arrays])
    xs = [t.leaf(rng.normal(size=(1, 3))) for _ in range(T)]
    state = zero_state(t, 1, hidden)
    for x in xs:
        state = lstm_step(x, state, params)
    t.backward(ad.sum_all(state.h))
    assert np.abs(xs[0].grad).max() > 1e-8


# --- GRU -------------------------------------------------------------------------------


def run_gru(arrays, x, h):
    t = Tape()
    leaves = [t.leaf(a) for a in arrays]
    return t, leaves, gru_step(t.leaf(x), t.leaf(h), GruParams(*leaves))


def test_gru_zero():
    out = run_gru([np.zeros((6, 2)), np.zeros((6, 2)), np.zeros(6)], np.array([[1.0, 2.0]]), np.zeros((1, 2)))[2]
    np.testing.assert_array_equal(out.value, np.zeros((1, 2)))


def test_gru_update_gate_saturated_carries_state(rng):
    arrays = gru_arrays(rng, 3, 4)
    arrays[2][:4] = 50.0  # update gate -> 1
    h = rng.uniform(-1, 1, (1, 4))
    out = run_gru(arrays, rng.normal(size=(1, 3)), h)[2]
    np.testing.assert_allclose(out.value, h, atol=1e-3)


def test_gru_matches_oracle(rng):
    arrays = gru_arrays(rng, 3, 4)
    x, h = rng.normal(size=(1, 3)), rng.normal(size=(1, 4))
    np.testing.assert_allclose(run_gru(arrays, x, h)[2].value[0], gru(x[0], h[0], *arrays), rtol=0, atol=1e-14)


def test_gru_gradients_match_finite_differences(rng):
    arrays = gru_arrays(rng, 3, 4)
    x, h = rng.normal(size=(2, 3)), rng.normal(size=(2, 4))
    t, leaves, out = run_gru(arrays, x, h)
    t.backward(ad.sum_all(out))
    for leaf, arr in zip(leaves, arrays):
        num = central_difference(lambda: float(run_gru(arrays, x, h)[2].value.sum()), arr)
        assert relative_errors(leaf.grad, num).max() < 1e-5


def test_gru_shape_error(rng):
    with pytest.raises(DimensionError):
        run_gru(gru_arrays(rng, 3, 4), np.ones((1, 4)), np.zeros((1, 4)))
