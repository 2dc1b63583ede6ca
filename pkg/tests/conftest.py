from __future__ import annotations

import time

import numpy as np
import pytest

from cfaudit import dataset
from cfaudit.classifier import ClassifierConfig, train_classifier
from cfaudit.codec import CodecConfig, train_codec


@pytest.fixture(scope="session")
def glyph_model():
    return dataset.glyph_model()


@pytest.fixture(scope="session")
def chain_model():
    return dataset.chain_model()


@pytest.fixture(scope="session")
def small_glyphs(glyph_model):
    return dataset.generate(glyph_model, 300, 11)


@pytest.fixture(scope="session")
def small_chain(chain_model):
    return dataset.generate(chain_model, 200, 12)


@pytest.fixture(scope="session")
def tiny_codec(small_glyphs):
    """A briefly trained codec; good enough for plumbing tests, not for accuracy."""
    cfg = CodecConfig(encoder_hidden=(32,), generator_hidden=(32,), epochs=3, finetune_epochs=2,
                      batch=64, lr=1e-3, seed=3)
    return train_codec(small_glyphs, cfg)


@pytest.fixture(scope="session")
def tiny_classifier(small_glyphs):
    cfg = ClassifierConfig(hidden=(16,), epochs=3, batch=32, lr=1e-3, seed=1)
    return train_classifier(small_glyphs.images, small_glyphs.labels["y"], cfg)


REFERENCE_N, REFERENCE_SEED = 6000, 7


@pytest.fixture(scope="session")
def reference():
    """6000-row glyph corpus; classifier and codec trained on the classifier's 5000 training rows."""
    t0 = time.perf_counter()
    model = dataset.glyph_model()
    ds = dataset.generate(model, REFERENCE_N, REFERENCE_SEED)
    t_data = time.perf_counter() - t0
    t0 = time.perf_counter()
    clf = train_classifier(ds.images, ds.labels["y"], ClassifierConfig())
    t_clf = time.perf_counter() - t0
    t0 = time.perf_counter()
    codec = train_codec(ds.subset(clf.train_idx), CodecConfig())
    t_codec = time.perf_counter() - t0
    return {"model": model, "ds": ds, "clf": clf, "codec": codec,
            "t_data": t_data, "t_clf": t_clf, "t_codec": t_codec}


def assert_images_equal(a, b):
    a, b = np.asarray(a), np.asarray(b)
    assert a.shape == b.shape
    assert a.tobytes() == b.tobytes()


# ---------------------------------------------------------------------------
# acceptance reporting: every criterion test records one pass/fail line, and
# the lines are repeated in a terminal summary section so they survive output
# capture.

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion_line():
    def record(number: int, ok: bool, text: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
