"""Counterfactual fairness audits, explanations and bias mitigation.

The bias of a classifier under an intervention is
``p(y_r=0, y_c=1) - p(y_r=1, y_c=0)`` over base/counterfactual label pairs,
equivalently ``p_flip * (p_01 - p_10)`` with conditionals given a flip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cfengine import CfPair, InterventionSpec, cf_batch
from .classifier import Classifier
from .errors import ConfigError, EmptyInputError, NoFeasibleCheckpointError, NonBinaryAttributeError
from .nn import Adam, bce_logits, iterate_minibatches
from .renderer import adjust_brightness, flip_horizontal
from .rng import Rng

SIGNIFICANCE = 0.05
AGREEMENT_TOL = 1e-12


@dataclass
class BiasReport:
    intervention: str
    n_pairs: int
    p_flip: float
    p_01: float
    p_10: float
    bias: float
    significant: bool
    threshold: float = SIGNIFICANCE
    n_skipped: int = 0
    scatter: list = field(default_factory=list)  # (prob_r, prob_c, y_r, y_c)

    def to_dict(self) -> dict:
        return {
            "version": "bias-1",
            "intervention": self.intervention,
            "n_pairs": self.n_pairs,
            "n_skipped": self.n_skipped,
            "p_flip": self.p_flip,
            "p_01": self.p_01,
            "p_10": self.p_10,
            "bias": self.bias,
            "significant": self.significant,
            "threshold": self.threshold,
            "scatter": [[pr, pc] for pr, pc, _, _ in self.scatter],
        }


def bias_from_counts(n00: int, n01: int, n10: int, n11: int, intervention: str = "",
                     threshold: float = SIGNIFICANCE) -> BiasReport:
    n = n00 + n01 + n10 + n11
    if n == 0:
        raise EmptyInputError("no label pairs")
    flips = n01 + n10
    p_flip = flips / n
    p_01 = n01 / flips if flips else 0.0
    p_10 = n10 / flips if flips else 0.0
    via_conditionals = p_flip * (p_01 - p_10)
    via_joint = n01 / n - n10 / n
    if abs(via_conditionals - via_joint) > AGREEMENT_TOL:
        raise AssertionError(f"bias computations disagree: {via_conditionals!r} vs {via_joint!r}")
    return BiasReport(intervention, n, p_flip, p_01, p_10, via_joint, abs(via_joint) > threshold, threshold)


def bias_from_labels(pairs, intervention: str = "", threshold: float = SIGNIFICANCE) -> BiasReport:
    """Bias from ``(y_r, y_c)`` label pairs."""
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(arr) == 0:
        raise EmptyInputError("no label pairs")
    if np.any((arr != 0) & (arr != 1)):
        raise ValueError("labels must be 0 or 1")
    code = 2 * arr[:, 0] + arr[:, 1]
    n00, n01, n10, n11 = (int(c) for c in np.bincount(code, minlength=4))
    return bias_from_counts(n00, n01, n10, n11, intervention, threshold)


def bias_from_rates(p_flip: float, p_01: float) -> float:
    """``p_flip * (p_01 - p_10)`` with ``p_10 = 1 - p_01``."""
    return p_flip * (p_01 - (1.0 - p_01))


def _report_from_probs(prob_r, prob_c, label: str, decision: float, threshold: float, n_skipped: int) -> BiasReport:
    y_r = (prob_r > decision).astype(np.int64)
    y_c = (prob_c > decision).astype(np.int64)
    rep = bias_from_labels(np.column_stack([y_r, y_c]), label, threshold)
    rep.n_skipped = n_skipped
    rep.scatter = [(float(a), float(b), int(c), int(d)) for a, b, c, d in zip(prob_r, prob_c, y_r, y_c)]
    return rep


def audit_intervention(clf: Classifier, pairs: list[CfPair], threshold: float = 0.5,
                       significance: float = SIGNIFICANCE, label: str | None = None) -> BiasReport:
    used = [p for p in pairs if not p.skipped]
    if not used:
        raise EmptyInputError("every pair is skipped; nothing to audit")
    if label is None:
        labels = sorted({p.intervention.label for p in used})
        label = labels[0] if len(labels) == 1 else "+".join(labels)
    prob_r = clf.prob(np.stack([p.x_r for p in used]))
    prob_c = clf.prob(np.stack([p.x_c for p in used]))
    return _report_from_probs(prob_r, prob_c, label, threshold, significance, len(pairs) - len(used))


def baseline_transform(name: str, factor: float = 1.25):
    if name == "flip":
        return "horizontal_flip", flip_horizontal
    if name == "brightness":
        return f"brightness({factor:g})", lambda x: adjust_brightness(x, factor)
    raise ConfigError(f"unknown baseline transform {name!r}")


def audit_baseline(clf: Classifier, images, transform: str = "flip", factor: float = 1.25,
                   threshold: float = 0.5, significance: float = SIGNIFICANCE) -> BiasReport:
    """Pairs are (real image, transformed real image)."""
    images = np.asarray(images)
    if len(images) == 0:
        raise EmptyInputError("no images")
    label, fn = baseline_transform(transform, factor)
    moved = np.stack([fn(x) for x in images])
    return _report_from_probs(clf.prob(images), clf.prob(moved), label, threshold, significance, 0)


# ---------------------------------------------------------------------------
# explanations


@dataclass
class ImportanceReport:
    attributes: list[str]
    local: np.ndarray  # (n_inputs, n_attributes)
    mode: str = "hard"

    @property
    def global_scores(self) -> dict:
        return {a: float(self.local[:, k].mean()) for k, a in enumerate(self.attributes)}

    @property
    def ranking(self) -> list[str]:
        g = self.global_scores
        return sorted(self.attributes, key=lambda a: (-g[a], a))

    def to_dict(self) -> dict:
        g = self.global_scores
        return {
            "version": "importance-1",
            "mode": self.mode,
            "n_inputs": int(self.local.shape[0]),
            "ranking": self.ranking,
            "global": {a: g[a] for a in self.ranking},
        }


def explain(clf: Classifier, codec, model, data, attributes, mode: str = "hard", threshold: float = 0.5,
            rows=None) -> ImportanceReport:
    """Local score ``y(a_i <- 1) - y(a_i <- 0)`` per input and binary attribute."""
    if mode not in ("hard", "prob"):
        raise ConfigError("mode must be 'hard' or 'prob'")
    attributes = list(attributes)
    for a in attributes:
        if model.graph.spec(a).kind != "binary":
            raise NonBinaryAttributeError(f"{a} is not binary")
    n = data.n if rows is None else len(rows)
    local = np.zeros((n, len(attributes)))
    for k, a in enumerate(attributes):
        on, off = InterventionSpec({a: 1}), InterventionSpec({a: 0})
        pairs = cf_batch(codec, model, data, [on, off], rows=rows)
        x_on = np.stack([p.x_c for p in pairs[0::2]])
        x_off = np.stack([p.x_c for p in pairs[1::2]])
        if mode == "hard":
            local[:, k] = clf.predict(x_on, threshold) - clf.predict(x_off, threshold)
        else:
            local[:, k] = clf.prob(x_on) - clf.prob(x_off)
    return ImportanceReport(attributes, local, mode)


# ---------------------------------------------------------------------------
# mitigation


@dataclass
class MitigationConfig:
    lam: float = 1.0
    accuracy_floor: float = 0.80
    max_accuracy_drop: float | None = None
    epochs: int = 100
    batch: int = 64
    lr: float = 3e-4
    validation_fraction: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        if self.lam < 0 or self.epochs <= 0 or self.batch <= 0 or not self.lr > 0:
            raise ConfigError("lam >= 0 and positive epochs, batch, lr required")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must be in (0, 1)")


@dataclass
class MitigationResult:
    classifier: Classifier
    selected_epoch: int
    floor: float
    checkpoints: list[dict]
    fit_rows: np.ndarray
    validation_rows: np.ndarray


def split_pairs_by_row(pairs: list[CfPair], fraction: float, rng: Rng):
    """Disjoint (fit, validation) pair lists, split on row id."""
    used = [p for p in pairs if not p.skipped]
    ids = np.array(sorted({p.row_id for p in used}))
    if len(ids) < 2:
        raise EmptyInputError("need pairs from at least two rows")
    perm = ids[rng.permutation(len(ids))]
    n_val = max(1, int(round(len(ids) * fraction)))
    val_ids = set(perm[:n_val].tolist())
    fit = [p for p in used if p.row_id not in val_ids]
    val = [p for p in used if p.row_id in val_ids]
    return fit, val, np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _accuracy(clf: Classifier, X, y) -> float:
    return float(np.mean(clf.predict(X) == y))


def mitigate(clf: Classifier, images, labels, pairs: list[CfPair], heldout_images, heldout_labels,
             config: MitigationConfig | None = None, progress=None) -> MitigationResult:
    """Fine-tune on ``BCE(y, f(x)) + lam * MSE(logit(x_r), logit(x_c))``.

    Each epoch is a checkpoint; among checkpoints whose held-out accuracy
    clears the floor, the one with the smallest |bias| on the validation
    pairs wins (earliest on ties).
    """
    config = config or MitigationConfig()
    config.validate()
    rng = Rng(config.seed)
    fit, val, fit_rows, val_rows = split_pairs_by_row(pairs, config.validation_fraction, rng.spawn(1))
    X = np.asarray(images, dtype=np.float64).reshape(len(images), -1)
    y = np.asarray(labels, dtype=np.float64)
    Xh = np.asarray(heldout_images)
    yh = np.asarray(heldout_labels)
    base_acc = _accuracy(clf, Xh, yh)
    floor = config.accuracy_floor
    if config.max_accuracy_drop is not None:
        floor = max(floor, base_acc - config.max_accuracy_drop)
    xr = np.stack([p.x_r for p in fit]).reshape(len(fit), -1).astype(np.float64)
    xc = np.stack([p.x_c for p in fit]).reshape(len(fit), -1).astype(np.float64)

    model = clf.copy()
    net = model.net
    opt = Adam(net.params(), lr=config.lr)
    batch_rng, pair_rng = rng.spawn(2), rng.spawn(3)
    pair_order = pair_rng.permutation(len(fit))
    pair_pos = 0
    checkpoints = []
    best = None
    for epoch in range(1, config.epochs + 1):
        for idx in iterate_minibatches(len(X), config.batch, batch_rng):
            out, cache = net.forward(X[idx])
            _, g = bce_logits(out[:, 0], y[idx])
            grads, _ = net.backward(cache, g[:, None])
            if config.lam > 0:
                take = []
                while len(take) < len(idx):
                    if pair_pos == len(pair_order):
                        pair_order = pair_rng.permutation(len(fit))
                        pair_pos = 0
                    step = min(len(idx) - len(take), len(pair_order) - pair_pos)
                    take.extend(pair_order[pair_pos:pair_pos + step].tolist())
                    pair_pos += step
                B = len(take)
                lo, cache2 = net.forward(np.concatenate([xr[take], xc[take]]))
                d = lo[:B, 0] - lo[B:, 0]
                gd = config.lam * 2.0 * d / B
                g2, _ = net.backward(cache2, np.concatenate([gd, -gd])[:, None])
                grads = [a + b for a, b in zip(grads, g2)]
            opt.step(net.params(), grads)
        if not net.all_finite():
            raise FloatingPointError(f"non-finite parameters after mitigation epoch {epoch}")
        acc = _accuracy(model, Xh, yh)
        rep = audit_intervention(model, val)
        rec = {"epoch": epoch, "heldout_accuracy": acc, "validation_bias": rep.bias,
               "feasible": acc >= floor}
        checkpoints.append(rec)
        if progress:
            progress(rec)
        if rec["feasible"] and (best is None or abs(rep.bias) < abs(best[1])):
            best = (epoch, rep.bias, model.copy())
    if best is None:
        raise NoFeasibleCheckpointError(f"no checkpoint reached held-out accuracy {floor:.4f}")
    return MitigationResult(best[2], best[0], floor, checkpoints, fit_rows, val_rows)
