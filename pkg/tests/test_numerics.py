import numpy as np
import pytest

from src.core.errors import DimensionMismatchError, EmptyDatasetError, ScalerNotFittedError
from src.core.linkstate import LINK_STATE_LAYERS
from src.core.numerics import (
    DenseNet, MinMaxScaler, adam_step, backward, cross_entropy, forward, init_adam, init_dense_net,
    iterate_minibatches, make_rng, mean_cross_entropy, minmax_apply, minmax_fit, minmax_invert, softmax,
)
from src.core.pathvae import decoder_layers, encoder_layers

STEP = 1e-5


def numeric_gradient(loss, params, index, coord):
    p = params[index]
    original = p[coord]
    p[coord] = original + STEP
    up = loss(params)
    p[coord] = original - STEP
    down = loss(params)
    p[coord] = original
    return (up - down) / (2 * STEP)


@pytest.mark.parametrize("layers,activation", [
    (LINK_STATE_LAYERS, "softmax"),
    (encoder_layers(20), "linear"),
    (decoder_layers(20), "linear"),
])
def test_backprop_matches_finite_differences(layers, activation):
    rng = np.random.default_rng(42)
    net = init_dense_net(layers, rng, output_activation=activation)
    x = rng.uniform(0.0, 1.0, size=(4, layers[0]))
    if activation == "softmax":
        labels = np.array([0, 1, 2, 1])

        def loss(params):
            return mean_cross_entropy(forward(net.with_params(params), x), labels)[0]

        _, grad_out = mean_cross_entropy(forward(net, x), labels)
    else:
        weights = rng.standard_normal((4, layers[-1]))

        def loss(params):
            return float(np.sum(forward(net.with_params(params), x) * weights))

        grad_out = weights

    analytic = backward(net, x, grad_out).params()
    params = [p.copy() for p in net.params()]
    for _ in range(20):
        index = int(rng.integers(len(params)))
        coord = tuple(int(rng.integers(n)) for n in params[index].shape)
        a = analytic[index][coord]
        n = numeric_gradient(loss, params, index, coord)
        assert abs(a - n) <= 1e-4 * max(abs(a), abs(n), 1e-2)


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    net = init_dense_net((6, 8, 3), rng)
    x = rng.uniform(size=6)
    g = rng.standard_normal(3)
    grad_in = backward(net, x, g).input
    for k in range(6):
        e = np.zeros(6)
        e[k] = STEP
        numeric = (forward(net, x + e) @ g - forward(net, x - e) @ g) / (2 * STEP)
        assert grad_in[k] == pytest.approx(numeric, rel=1e-4, abs=1e-8)


def test_parameter_counts():
    rng = np.random.default_rng(0)
    assert init_dense_net(LINK_STATE_LAYERS, rng).parameter_count == 443
    assert init_dense_net((2, 3), rng).parameter_count == 9


def test_dense_net_rejects_inconsistent_shapes():
    with pytest.raises(DimensionMismatchError):
        DenseNet((2, 3), (np.zeros((3, 2)),), (np.zeros(3),))
    net = init_dense_net((2, 3), np.random.default_rng(0))
    with pytest.raises(DimensionMismatchError):
        forward(net, np.zeros(5))


def test_forward_single_vector_and_batch_agree():
    net = init_dense_net((4, 7, 2), np.random.default_rng(1))
    x = np.random.default_rng(2).uniform(size=(3, 4))
    batch = forward(net, x)
    for i in range(3):
        np.testing.assert_allclose(forward(net, x[i]), batch[i])


def test_softmax_rows_sum_to_one():
    p = softmax(np.array([[1000.0, 0.0, -1000.0], [1.0, 2.0, 3.0]]), axis=1)
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    assert p[0, 0] == pytest.approx(1.0)


def test_adam_first_step_moves_by_learning_rate():
    params = [np.array([1.0, -2.0, 3.0])]
    grads = [np.array([0.5, -4.0, 1e3])]
    state = init_adam(params, learning_rate=0.01)
    new_params, new_state = adam_step(state, params, grads)
    np.testing.assert_allclose(new_params[0], params[0] - 0.01 * np.sign(grads[0]), rtol=1e-6)
    assert new_state.step == 1
    assert state.step == 0


def test_adam_shape_mismatch():
    state = init_adam([np.zeros(3)], 0.1)
    with pytest.raises(DimensionMismatchError):
        adam_step(state, [np.zeros(3)], [np.zeros(4)])


def test_minmax_roundtrip_and_extrapolation():
    data = np.array([[0.0, 10.0], [2.0, 30.0], [1.0, 20.0]])
    scaler = minmax_fit(data)
    np.testing.assert_allclose(minmax_apply(scaler, data[1]), [1.0, 1.0])
    np.testing.assert_allclose(minmax_apply(scaler, [4.0, 0.0]), [2.0, -0.5])
    np.testing.assert_allclose(minmax_invert(scaler, minmax_apply(scaler, data)), data)


def test_minmax_pinned_lower_and_degenerate_component():
    scaler = minmax_fit(np.array([[5.0, 3.0], [7.0, 3.0]]), pinned_lower=[0.0, None])
    assert scaler.lower[0] == 0.0
    np.testing.assert_allclose(minmax_apply(scaler, [3.5, 3.0]), [0.5, 0.0])
    np.testing.assert_allclose(minmax_invert(scaler, [0.5, 0.7]), [3.5, 3.0])


def test_minmax_errors():
    with pytest.raises(ScalerNotFittedError):
        minmax_apply(MinMaxScaler(), [1.0])
    with pytest.raises(EmptyDatasetError):
        minmax_fit(np.empty((0, 2)))
    with pytest.raises(DimensionMismatchError):
        minmax_apply(minmax_fit(np.ones((2, 2))), [1.0, 2.0, 3.0])


def test_cross_entropy_is_floored():
    assert cross_entropy([1.0, 0.0, 0.0], 1) == pytest.approx(-np.log(1e-12))
    assert cross_entropy([0.5, 0.5, 0.0], 0) == pytest.approx(np.log(2.0))


def test_minibatches_cover_every_index_once():
    batches = list(iterate_minibatches(23, 5, np.random.default_rng(0)))
    assert [len(b) for b in batches] == [5, 5, 5, 5, 3]
    assert sorted(np.concatenate(batches).tolist()) == list(range(23))


def test_substreams_are_deterministic_and_distinct():
    a = make_rng(3, 1, 2).uniform(size=4)
    np.testing.assert_array_equal(a, make_rng(3, 1, 2).uniform(size=4))
    assert not np.allclose(a, make_rng(3, 1, 3).uniform(size=4))
