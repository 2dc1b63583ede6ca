"""Random finite-difference gradient checks shared by the nn and acceptance suites."""

from __future__ import annotations

import numpy as np

from cfaudit import nn
from cfaudit.rng import Rng

LOSSES = ("bce", "bce_logits", "mse", "mae", "softmax_xent")
KINK_MARGIN = 1e-2


def _draw(seed: int):
    rng = np.random.default_rng(seed)
    loss = LOSSES[seed % len(LOSSES)]
    depth = int(rng.integers(1, 4))
    sizes = [int(rng.integers(2, 33)) for _ in range(depth + 1)]
    hidden = [str(rng.choice(["leaky_relu", "sigmoid", "linear", "softmax"])) for _ in range(depth - 1)]
    head = {"bce": "sigmoid", "bce_logits": "linear", "mse": str(rng.choice(["linear", "sigmoid"])),
            "mae": "linear", "softmax_xent": "linear"}[loss]
    if loss in ("bce", "bce_logits"):
        sizes[-1] = 1
    net = nn.NeuralNet.build(sizes, hidden + [head], Rng(seed), init_std=float(rng.uniform(0.2, 0.8)))
    batch = int(rng.integers(1, 5))
    x = rng.normal(size=(batch, sizes[0]))
    if loss in ("bce", "bce_logits"):
        target = rng.integers(0, 2, size=(batch, 1)).astype(float)
    elif loss == "softmax_xent":
        target = rng.integers(0, sizes[-1], size=batch)
    else:
        target = rng.normal(size=(batch, sizes[-1]))
    return loss, net, x, target


def _loss(loss, out, target):
    return getattr(nn, loss)(out, target)


def _away_from_kinks(loss, net, x, target) -> bool:
    _, (_, steps) = net.forward(x)
    for layer, (_, a, _) in zip(net.layers, steps):
        if layer.activation == "leaky_relu" and np.min(np.abs(a)) < KINK_MARGIN:
            return False
    out = steps[-1][2]
    if loss == "mae" and np.min(np.abs(out - target)) < KINK_MARGIN:
        return False
    if loss == "bce" and (np.min(out) < 1e-3 or np.max(out) > 1 - 1e-3):
        return False
    return True


def gradcheck_case(seed: int):
    """Returns ``(ok, description)`` comparing analytic and central-difference gradients.

    Instances whose leaky-ReLU pre-activations (or MAE residuals) sit within
    ``KINK_MARGIN`` of a kink are redrawn: finite differences straddling a
    kink do not estimate the one-sided derivative backprop returns.
    """
    k = 0
    while True:
        loss, net, x, target = _draw(seed * 1000 + k)
        if _away_from_kinks(loss, net, x, target):
            break
        k += 1
    out, cache = net.forward(x)
    _, g = _loss(loss, out, target)
    grads, gin = net.backward(cache, g)

    def f():
        return _loss(loss, net.forward(x)[0], target)[0]

    ok = True
    for p, gp in zip(net.params(), grads):
        ok &= nn.gradients_close(gp, nn.numerical_gradient(f, p))
    ok &= nn.gradients_close(gin, nn.numerical_gradient(f, x))
    desc = f"{loss} sizes={[l.in_dim for l in net.layers] + [net.out_dim]} " \
           f"acts={[l.activation for l in net.layers]}"
    return bool(ok), desc
