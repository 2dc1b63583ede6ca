"""Dense networks with hand-written backpropagation and Adam.

Arrays are float64 and batched along axis 0; a 1-D input is treated as a
batch of one and the output is squeezed back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .errors import DimensionError, SchemaError
from .rng import Rng

LEAKY_SLOPE = 0.1
INIT_STD = 0.01
BCE_EPS = 1e-7
ACTIVATIONS = ("leaky_relu", "sigmoid", "linear", "softmax")


def activate(name: str, a: np.ndarray) -> np.ndarray:
    if name == "leaky_relu":
        return np.where(a > 0, a, LEAKY_SLOPE * a)
    if name == "sigmoid":
        return expit(a)
    if name == "linear":
        return a
    if name == "softmax":
        return softmax(a, axis=-1)
    raise SchemaError(f"unknown activation {name!r}")


def activation_backward(name: str, a: np.ndarray, out: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. pre-activation ``a`` given gradient ``g`` w.r.t. output."""
    if name == "leaky_relu":
        return np.where(a > 0, g, LEAKY_SLOPE * g)
    if name == "sigmoid":
        return g * out * (1.0 - out)
    if name == "linear":
        return g
    if name == "softmax":
        return out * (g - np.sum(g * out, axis=-1, keepdims=True))
    raise SchemaError(f"unknown activation {name!r}")


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: str

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


class NeuralNet:
    def __init__(self, layers: list[Layer]):
        if not layers:
            raise DimensionError("network needs at least one layer")
        for k, layer in enumerate(layers):
            if layer.activation not in ACTIVATIONS:
                raise SchemaError(f"unknown activation {layer.activation!r}")
            if layer.biases.shape != (layer.out_dim,):
                raise DimensionError(f"layer {k}: bias shape {layer.biases.shape}")
            if k and layers[k - 1].out_dim != layer.in_dim:
                raise DimensionError(f"layer {k}: input {layer.in_dim} != previous output {layers[k - 1].out_dim}")
        self.layers = layers

    @classmethod
    def build(cls, sizes: list[int], activations: list[str], rng: Rng, init_std: float = INIT_STD) -> "NeuralNet":
        """Truncated-normal weights (cut at 2 std), zero biases."""
        if len(activations) != len(sizes) - 1:
            raise DimensionError("need one activation per layer")
        layers = []
        for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
            w = rng.truncated_normal(n_in * n_out, init_std).reshape(n_out, n_in)
            layers.append(Layer(w, np.zeros(n_out), act))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def n_params(self) -> int:
        return sum(l.weights.size + l.biases.size for l in self.layers)

    def params(self) -> list[np.ndarray]:
        out = []
        for l in self.layers:
            out.extend((l.weights, l.biases))
        return out

    def copy(self) -> "NeuralNet":
        return NeuralNet([Layer(l.weights.copy(), l.biases.copy(), l.activation) for l in self.layers])

    def forward(self, x: np.ndarray):
        """Returns ``(output, cache)``; the cache feeds :meth:`backward`."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.in_dim:
            raise DimensionError(f"input width {h.shape[1]} != {self.in_dim}")
        steps = []
        for l in self.layers:
            a = h @ l.weights.T + l.biases
            out = activate(l.activation, a)
            steps.append((h, a, out))
            h = out
        return (h[0] if single else h), (single, steps)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray):
        """Returns ``(param_grads, grad_input)``; grads align with :meth:`params`."""
        single, steps = cache
        g = np.asarray(grad_out, dtype=np.float64)
        if single:
            g = g[None, :]
        if g.shape != steps[-1][2].shape:
            raise DimensionError(f"output gradient shape {g.shape} != {steps[-1][2].shape}")
        grads = []
        for l, (h, a, out) in zip(reversed(self.layers), reversed(steps)):
            ga = activation_backward(l.activation, a, out, g)
            grads.append((ga.T @ h, ga.sum(axis=0)))
            g = ga @ l.weights
        flat = []
        for gw, gb in reversed(grads):
            flat.extend((gw, gb))
        return flat, (g[0] if single else g)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())

    def to_dict(self) -> dict:
        return {
            "version": "nn-1",
            "layers": [
                {
                    "in": l.in_dim,
                    "out": l.out_dim,
                    "activation": l.activation,
                    "weights": l.weights.ravel().tolist(),
                    "biases": l.biases.tolist(),
                }
                for l in self.layers
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "NeuralNet":
        if doc.get("version") != "nn-1":
            raise SchemaError("unsupported network file version")
        layers = []
        for d in doc["layers"]:
            w = np.array(d["weights"], dtype=np.float64)
            if w.size != d["in"] * d["out"]:
                raise DimensionError("weight array does not match layer dims")
            layers.append(Layer(w.reshape(d["out"], d["in"]), np.array(d["biases"], dtype=np.float64), d["activation"]))
        return cls(layers)

    @classmethod
    def from_json(cls, text: str) -> "NeuralNet":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# losses: each returns (mean-reduced value, gradient w.r.t. the first argument)


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def bce(p, y):
    p, y = _same_shape(p, y)
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    n = p.size
    value = float(np.mean(-y * np.log(pc) - (1.0 - y) * np.log(1.0 - pc)))
    grad = (-y / pc + (1.0 - y) / (1.0 - pc)) / n
    grad = np.where((p < BCE_EPS) | (p > 1.0 - BCE_EPS), 0.0, grad)
    return value, grad


def bce_logits(logits, y):
    """BCE of ``sigmoid(logits)`` computed stably from the logits."""
    z, y = _same_shape(logits, y)
    value = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return value, (expit(z) - y) / z.size


def mse(a, b):
    a, b = _same_shape(a, b)
    d = a - b
    return float(np.mean(d * d)), 2.0 * d / d.size


def mae(a, b):
    a, b = _same_shape(a, b)
    d = a - b
    return float(np.mean(np.abs(d))), np.sign(d) / d.size


def softmax_xent(logits, classes):
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    if single:
        z = z[None, :]
    c = np.atleast_1d(np.asarray(classes, dtype=np.int64))
    if c.shape != (z.shape[0],) or np.any(c < 0) or np.any(c >= z.shape[1]):
        raise DimensionError("class indices do not match logits")
    logp = log_softmax(z, axis=1)
    n = z.shape[0]
    value = float(-np.mean(logp[np.arange(n), c]))
    grad = np.exp(logp)
    grad[np.arange(n), c] -= 1.0
    grad /= n
    return value, (grad[0] if single else grad)


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Bias-corrected Adam over a fixed list of parameter arrays (updated in place)."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-4, beta1: float = 0.5,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        if len(params) != len(self.m) or len(grads) != len(params):
            raise DimensionError("parameter/gradient lists do not match optimizer state")
        for p, g, m in zip(params, grads, self.m):
            if p.shape != g.shape or p.shape != m.shape:
                raise DimensionError(f"shape mismatch {p.shape} / {g.shape} / {m.shape}")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


# ---------------------------------------------------------------------------
# gradient checking


def numerical_gradient(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = f()
        flat[k] = orig - h
        fm = f()
        flat[k] = orig
        gflat[k] = (fp - fm) / (2.0 * h)
    return grad


def gradients_close(analytic, numeric, rel: float = 1e-4, floor: float = 1e-6) -> bool:
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    tol = np.maximum(rel * np.maximum(np.abs(a), np.abs(n)), floor)
    return bool(np.all(np.abs(a - n) <= tol))


def iterate_minibatches(n: int, batch: int, rng: Rng):
    perm = rng.permutation(n)
    for start in range(0, n, batch):
        yield perm[start:start + batch]
