"""The audited classifier, its planted training label, and a glyph-label classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DegenerateDataError, DimensionError, EmptyInputError, UnknownAttributeError
from .graph import CausalGraph
from .nn import Adam, NeuralNet, bce_logits, iterate_minibatches, softmax_xent
from .rng import Rng
from .scm import unscale

FEATURES = ("scaled", "one_minus_abs_raw")


@dataclass(frozen=True)
class LabelRule:
    """``y = 1[sum_k w_k * feature_k + eta > threshold]``, ``eta ~ N(0, noise_std)``.

    Each term is ``(attribute, weight, feature)`` where feature ``scaled`` is
    the attribute's [0, 1] value and ``one_minus_abs_raw`` is ``1 - |raw|``.
    """

    terms: tuple[tuple[str, float, str], ...] = (("i", 0.8, "scaled"), ("s", 0.2, "one_minus_abs_raw"))
    threshold: float = 0.55
    noise_std: float = 0.05

    def __post_init__(self):
        for name, w, feat in self.terms:
            if not np.isfinite(w):
                raise ConfigError(f"weight for {name} is not finite")
            if feat not in FEATURES:
                raise ConfigError(f"unknown feature {feat!r}")
        if not self.noise_std >= 0:
            raise ConfigError("noise_std must be >= 0")

    def score(self, table, graph: CausalGraph) -> np.ndarray:
        """Noise-free score for a scaled column table."""
        total = None
        for name, w, feat in self.terms:
            if name not in table or name not in graph:
                raise UnknownAttributeError(f"label rule needs attribute {name!r}")
            col = np.asarray(table[name], dtype=np.float64)
            if feat == "one_minus_abs_raw":
                col = 1.0 - np.abs(unscale(graph.spec(name), col))
            term = w * col
            total = term if total is None else total + term
        return np.atleast_1d(total)


def assign_labels(rule: LabelRule, table, graph: CausalGraph, rng: Rng) -> np.ndarray:
    score = rule.score(table, graph)
    eta = rng.normal(len(score)) * rule.noise_std
    return (score + eta > rule.threshold).astype(np.int64)


# ---------------------------------------------------------------------------
# networks


def _flatten(x, width: int | None = None) -> np.ndarray:
    """Batch of flat rows from one image (H, W), an image stack (n, H, W) or
    already-flat rows (n, width)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2 and not (width is not None and x.shape[1] == width):
        x = x[None]
    return x.reshape(x.shape[0], -1)


@dataclass
class Classifier:
    """Binary image classifier; the net's single linear output is the logit."""

    net: NeuralNet

    def logits(self, x) -> np.ndarray:
        return self.net(_flatten(x, self.net.in_dim))[:, 0]

    def prob(self, x) -> np.ndarray:
        return expit(self.logits(x))

    def predict(self, x, threshold: float = 0.5) -> np.ndarray:
        return (self.prob(x) > threshold).astype(np.int64)

    def copy(self) -> "Classifier":
        return Classifier(self.net.copy())


@dataclass
class LabelClassifier:
    """Multiclass glyph-label classifier with a softmax head."""

    net: NeuralNet

    def logits(self, x) -> np.ndarray:
        return self.net(_flatten(x, self.net.in_dim))

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)


@dataclass
class ClassifierConfig:
    hidden: tuple[int, ...] = (128, 64)
    epochs: int = 30
    batch: int = 64
    lr: float = 1e-3
    holdout: float = 1.0 / 6.0
    seed: int = 0

    def validate(self) -> None:
        if self.epochs <= 0 or self.batch <= 0:
            raise ConfigError("epochs and batch must be positive")
        if not 0.0 < self.holdout < 1.0:
            raise ConfigError("holdout must be in (0, 1)")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")


@dataclass
class TrainResult:
    model: object
    heldout_accuracy: float
    train_idx: np.ndarray
    test_idx: np.ndarray
    log: list[dict] = field(default_factory=list)


def split_indices(n: int, holdout: float, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    n_test = max(1, int(round(n * holdout)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def _train(net: NeuralNet, X: np.ndarray, loss_fn, targets: np.ndarray, config: ClassifierConfig,
           rng: Rng, evaluate) -> list[dict]:
    opt = Adam(net.params(), lr=config.lr)
    log = []
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for idx in iterate_minibatches(len(X), config.batch, rng):
            out, cache = net.forward(X[idx])
            value, grad = loss_fn(out, targets[idx])
            grads, _ = net.backward(cache, grad)
            opt.step(net.params(), grads)
            total += value * len(idx)
            count += len(idx)
        if not net.all_finite():
            raise FloatingPointError(f"non-finite parameters after epoch {epoch}")
        log.append({"epoch": epoch, "loss": total / count, "heldout_accuracy": evaluate()})
    return log


def train_classifier(images, labels, config: ClassifierConfig | None = None) -> TrainResult:
    """BCE training with Adam on a seeded train/held-out split."""
    config = config or ClassifierConfig()
    config.validate()
    X = _flatten(images)
    y = np.asarray(labels, dtype=np.float64)
    if len(X) == 0:
        raise EmptyInputError("no training images")
    if y.shape != (len(X),):
        raise DimensionError("one label per image required")
    rng = Rng(config.seed)
    tr, te = split_indices(len(X), config.holdout, rng.spawn(1))
    if len(np.unique(y[tr])) < 2:
        raise DegenerateDataError("training labels contain a single class")
    net = NeuralNet.build([X.shape[1], *config.hidden, 1], ["leaky_relu"] * len(config.hidden) + ["linear"],
                          rng.spawn(2))
    clf = Classifier(net)

    def loss(out, t):
        value, g = bce_logits(out[:, 0], t)
        return value, g[:, None]

    def evaluate():
        return float(np.mean(clf.predict(X[te]) == y[te]))

    log = _train(net, X[tr], loss, y[tr], config, rng.spawn(3), evaluate)
    return TrainResult(clf, log[-1]["heldout_accuracy"], tr, te, log)


def accuracy(clf: Classifier, images, labels) -> float:
    return float(np.mean(clf.predict(images) == np.asarray(labels)))


def train_label_classifier(images, classes, config: ClassifierConfig | None = None) -> TrainResult:
    config = config or ClassifierConfig()
    config.validate()
    X = _flatten(images)
    c = np.asarray(classes, dtype=np.int64)
    if c.shape != (len(X),):
        raise DimensionError("one class per image required")
    k = int(c.max()) + 1 if len(c) else 0
    if len(np.unique(c)) < 2:
        raise ConfigError("label classifier needs at least two classes")
    rng = Rng(config.seed)
    tr, te = split_indices(len(X), config.holdout, rng.spawn(1))
    net = NeuralNet.build([X.shape[1], *config.hidden, k], ["leaky_relu"] * len(config.hidden) + ["linear"],
                          rng.spawn(2))
    clf = LabelClassifier(net)

    def evaluate():
        return float(np.mean(clf.predict(X[te]) == c[te]))

    log = _train(net, X[tr], softmax_xent, c[tr], config, rng.spawn(3), evaluate)
    return TrainResult(clf, log[-1]["heldout_accuracy"], tr, te, log)


def cf_label_agreement(clf: LabelClassifier, pairs, attribute: str = "l") -> float:
    """Fraction of counterfactual images classified as their intervention's target label."""
    used = [p for p in pairs if not p.skipped]
    if not used:
        raise EmptyInputError("no counterfactual pairs to score")
    pred = clf.predict(np.stack([p.x_c for p in used]))
    target = np.array([int(p.intervention.targets[attribute]) for p in used])
    return float(np.mean(pred == target))
