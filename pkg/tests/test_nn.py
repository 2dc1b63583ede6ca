from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfaudit import nn
from cfaudit.errors import DimensionError
from cfaudit.nn import Adam, Layer, NeuralNet
from cfaudit.rng import Rng

from gradcheck import gradcheck_case


def linear_identity(n=3):
    return NeuralNet([Layer(np.eye(n), np.zeros(n), "linear")])


def test_forward_examples():
    x = np.array([0.5, -1.0, 2.0])
    assert np.array_equal(linear_identity()(x), x)
    sig = NeuralNet([Layer(np.ones((2, 3)), np.zeros(2), "sigmoid")])
    assert np.all(sig(np.zeros(3)) == 0.5)
    assert nn.activate("leaky_relu", np.array([-2.0]))[0] == pytest.approx(-0.2)


def test_forward_dimension_error():
    with pytest.raises(DimensionError):
        linear_identity()(np.zeros(4))


def test_backward_examples():
    net = NeuralNet([Layer(np.arange(6.0).reshape(2, 3), np.zeros(2), "linear")])
    x = np.array([1.0, 2.0, 3.0])
    _, cache = net.forward(x)
    grads, gin = net.backward(cache, np.array([1.0, 0.0]))
    assert np.array_equal(grads[0][0], x)
    assert np.array_equal(grads[0][1], np.zeros(3))
    assert np.array_equal(gin, net.layers[0].weights[0])
    zero, _ = net.backward(cache, np.zeros(2))
    assert all(np.all(g == 0) for g in zero)
    with pytest.raises(DimensionError):
        net.backward(cache, np.zeros(3))


def test_build_init():
    net = NeuralNet.build([50, 40, 3], ["leaky_relu", "linear"], Rng(0))
    w = net.layers[0].weights
    assert w.shape == (40, 50)
    assert np.all(np.abs(w) <= 2 * nn.INIT_STD)
    assert abs(w.std() - nn.INIT_STD) < 0.003
    assert np.all(net.layers[0].biases == 0)
    assert net.n_params == 50 * 40 + 40 + 40 * 3 + 3


def test_json_roundtrip():
    net = NeuralNet.build([5, 4, 2], ["sigmoid", "softmax"], Rng(1), init_std=0.3)
    back = NeuralNet.from_json(net.to_json())
    x = np.random.default_rng(0).normal(size=(3, 5))
    assert back(x).tobytes() == net(x).tobytes()
    assert '"version": "nn-1"' in net.to_json()


def test_loss_examples():
    assert nn.bce(np.array([0.5]), np.array([1.0]))[0] == pytest.approx(math.log(2))
    a = np.array([0.1, 0.7])
    assert nn.mse(a, a)[0] == 0.0 and nn.mae(a, a)[0] == 0.0
    assert nn.softmax_xent(np.zeros(4), 2)[0] == pytest.approx(math.log(4))
    assert nn.bce_logits(np.array([0.0]), np.array([1.0]))[0] == pytest.approx(math.log(2))
    with pytest.raises(DimensionError):
        nn.mse(np.zeros(2), np.zeros(3))
    with pytest.raises(DimensionError):
        nn.softmax_xent(np.zeros((2, 4)), [0, 4])


def test_bce_clamps():
    v, g = nn.bce(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    assert np.isfinite(v) and v == pytest.approx(-math.log(nn.BCE_EPS), rel=1e-6)
    assert np.all(g == 0)


def test_bce_logits_matches_bce():
    z = np.array([-3.0, -0.2, 0.4, 2.5])
    y = np.array([0.0, 1.0, 1.0, 0.0])
    p = 1 / (1 + np.exp(-z))
    assert nn.bce_logits(z, y)[0] == pytest.approx(nn.bce(p, y)[0], rel=1e-9)


def test_adam_examples():
    p = [np.array([1.0])]
    opt = Adam(p, lr=1e-4)
    opt.step(p, [np.array([1.0])])
    assert p[0][0] == pytest.approx(1.0 - 1e-4, abs=1e-10)
    assert opt.t == 1
    q = [np.array([0.3, -0.2])]
    opt = Adam(q)
    opt.step(q, [np.zeros(2)])
    assert np.array_equal(q[0], [0.3, -0.2]) and opt.t == 1
    with pytest.raises(DimensionError):
        opt.step(q, [np.zeros(3)])


def test_adam_descends_quadratic():
    w = [np.array([1.0])]
    opt = Adam(w, lr=1e-2)
    best = [1.0]
    for _ in range(100):
        opt.step(w, [2.0 * w[0]])
        best.append(min(best[-1], float(w[0][0] ** 2)))
    assert all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
    assert abs(w[0][0]) < 1.0


@pytest.mark.parametrize("seed", range(25))
def test_gradients_match_finite_differences(seed):
    ok, desc = gradcheck_case(seed)
    assert ok, desc


@given(st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_softmax_rows_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    out = nn.activate("softmax", rng.normal(scale=5, size=(3, 6)))
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)


def test_minibatches_cover_all_rows():
    seen = np.concatenate(list(nn.iterate_minibatches(103, 10, Rng(2))))
    assert sorted(seen.tolist()) == list(range(103))


def test_training_is_deterministic():
    def run():
        net = NeuralNet.build([4, 8, 1], ["leaky_relu", "linear"], Rng(5), init_std=0.3)
        opt = Adam(net.params(), lr=1e-2)
        x = Rng(6).normal(64).reshape(16, 4)
        y = (x[:, :1] > 0).astype(float)
        for _ in range(20):
            out, cache = net.forward(x)
            _, g = nn.bce_logits(out, y)
            grads, _ = net.backward(cache, g)
            opt.step(net.params(), grads)
        return net.to_json()

    assert run() == run()
