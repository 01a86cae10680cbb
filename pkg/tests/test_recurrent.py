"""GRU/LSTM step semantics and sequence-layer consistency."""

import numpy as np
import numpy.testing as npt
import pytest

from edgegaze.nn import (
    GRULayer,
    GRUParams,
    LSTMLayer,
    LSTMParams,
    ShapeError,
    grad_check,
    gru_step,
    lstm_step,
)


def zero_gru(n, h):
    return GRUParams(np.zeros((n, 3 * h)), np.zeros((h, 3 * h)), np.zeros(3 * h))


def zero_lstm(n, h):
    return LSTMParams(np.zeros((n, 4 * h)), np.zeros((h, 4 * h)), np.zeros(4 * h))


def test_lstm_step_zero_params_zero_cell():
    h, c = lstm_step(np.zeros(3), np.zeros(2), np.zeros(2), zero_lstm(3, 2))
    npt.assert_array_equal(c, np.zeros(2))
    npt.assert_array_equal(h, np.zeros(2))


def test_lstm_step_zero_params_halves_cell():
    # input/forget gates sit at sigmoid(0) = 0.5 and the candidate is tanh(0) = 0
    c0 = np.array([1.0, -4.0])
    h, c = lstm_step(np.zeros(3), np.zeros(2), c0, zero_lstm(3, 2))
    npt.assert_allclose(c, 0.5 * c0)
    npt.assert_allclose(h, 0.5 * np.tanh(0.5 * c0))


def test_gru_step_zero_params_halves_state():
    h0 = np.array([2.0, -1.0, 0.5])
    npt.assert_allclose(gru_step(np.zeros(4), h0, zero_gru(4, 3)), 0.5 * h0)


def test_gru_step_zero_state():
    npt.assert_array_equal(gru_step(np.zeros(4), np.zeros(3), zero_gru(4, 3)), np.zeros(3))


def test_step_shape_errors():
    with pytest.raises(ShapeError):
        gru_step(np.zeros(4), np.zeros(3), zero_gru(5, 3))
    with pytest.raises(ShapeError):
        lstm_step(np.zeros(4), np.zeros(3), np.zeros(3), zero_lstm(4, 2))


@pytest.mark.parametrize("kind", ["gru", "lstm"])
def test_recurrent_gradients(kind):
    for seed in range(5):
        assert grad_check(kind, seed=seed) <= 1e-3


@pytest.mark.parametrize("cls,params_cls,step", [
    (GRULayer, GRUParams, None),
    (LSTMLayer, LSTMParams, None),
])
def test_sequence_layer_matches_step_composition(cls, params_cls, step):
    rng = np.random.default_rng(9)
    layer = cls(4)
    layer.build((5,), rng)
    params = layer.params()
    x = rng.normal(size=(2, 6, 5))

    out = layer.forward(x, params)

    p = params_cls(*params)
    h = np.zeros((2, 4))
    c = np.zeros((2, 4))
    for t in range(6):
        if cls is GRULayer:
            h = gru_step(x[:, t, :], h, p)
        else:
            h, c = lstm_step(x[:, t, :], h, c, p)
    npt.assert_allclose(out, h, atol=1e-12)


def test_gru_has_fewer_params_than_lstm():
    rng = np.random.default_rng(0)
    gru, lstm = GRULayer(16), LSTMLayer(16)
    gru.build((8,), rng)
    lstm.build((8,), rng)
    n_gru = sum(p.size for p in gru.params())
    n_lstm = sum(p.size for p in lstm.params())
    assert n_gru < n_lstm
    assert n_lstm * 3 == n_gru * 4  # 3 vs 4 gate blocks
