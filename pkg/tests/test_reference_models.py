"""Frozen bounds on the default-config models trained on the seeded reference corpus."""

from __future__ import annotations

import numpy as np
import pytest

from cfaudit.audit import audit_baseline, audit_intervention
from cfaudit.cfengine import InterventionSpec, cf_batch
from cfaudit.codec import codec_metrics

pytestmark = pytest.mark.slow

# Reference run (corpus seed 7, default configs): held-out reconstruction MSE
# 0.00181, classifier held-out accuracy 0.896. Bounds: 1.5x the MSE and the
# accuracy minus 3 points.
HELDOUT_MSE_BOUND = 1.5 * 0.00181
ACCURACY_BOUND = 0.896 - 0.03


def test_heldout_reconstruction_error(reference):
    heldout = reference["ds"].subset(reference["clf"].test_idx)
    m = codec_metrics(reference["codec"], heldout)
    assert m["mse_x"] < HELDOUT_MSE_BOUND
    assert np.isfinite(m["mae_z"]) and np.isfinite(m["mae_z_cycle"])


def test_codec_training_log(reference):
    log = reference["codec"].log
    assert len(log) == 70
    assert all(np.isfinite(r["loss"]) for r in log)
    joint = [r["loss_x"] for r in log if r["phase"] == "joint"]
    assert min(joint) < joint[0]


def test_classifier_accuracy(reference):
    assert reference["clf"].heldout_accuracy >= ACCURACY_BOUND
    assert len(reference["clf"].train_idx) == 5000 and len(reference["clf"].test_idx) == 1000


def test_baselines_smaller_than_counterfactual_bias(reference):
    r = reference
    test = r["clf"].test_idx
    clf = r["clf"].model
    flip = audit_baseline(clf, r["ds"].images[test], "flip")
    bright = audit_baseline(clf, r["ds"].images[test], "brightness", 1.25)
    pairs = cf_batch(r["codec"], r["model"], r["ds"], [InterventionSpec({"i": 1.0})], filter_redundant=True, rows=test)
    cf_bias = audit_intervention(clf, pairs).bias
    # every glyph is mirror symmetric, so flips barely move the classifier
    assert abs(flip.bias) < 0.02
    assert abs(flip.bias) < cf_bias and abs(bright.bias) < cf_bias
