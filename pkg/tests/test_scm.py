from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfaudit.errors import (EmptyConfigurationError, OutOfRangeError, SchemaError, SingularDesignError,
                            UnknownAttributeError)
from cfaudit.graph import AttributeSpec, build_graph, descendants
from cfaudit.rng import Rng
from cfaudit.scm import (BinaryCPT, CategoricalCPT, LinearGaussian, StructuralModel, UniformRoot, abduct_noise,
                         clipped_at_bound, counterfactual_attributes, fit_scm, oracle_counterfactual,
                         predict_attributes, scale, simulate, unscale)

from instances import diamond_model, random_model, random_row, random_targets


def two_node(alpha=0.10, beta=0.60, sigma=0.05):
    g = build_graph([AttributeSpec("t", "continuous", raw_range=(0, 1)),
                     AttributeSpec("i", "continuous", raw_range=(0, 1), parents=("t",))])
    return StructuralModel(g, {"t": UniformRoot(), "i": LinearGaussian(("t",), alpha, (beta,), sigma)})


def glyph_like():
    g = build_graph([AttributeSpec("t", "continuous", raw_range=(1, 5)),
                     AttributeSpec("i", "continuous", raw_range=(0.3, 1), parents=("t",)),
                     AttributeSpec("s", "continuous", raw_range=(-1, 1)),
                     AttributeSpec("l", "categorical", cardinality=4)])
    return StructuralModel(g, {"t": UniformRoot(), "i": LinearGaussian(("t",), 0.1, (0.6,), 0.05),
                               "s": UniformRoot(), "l": CategoricalCPT((), (), ((0.25,) * 4,))})


# ---------------------------------------------------------------------------
# scaling


def test_scale_examples():
    t = AttributeSpec("t", "continuous", raw_range=(1, 5))
    s = AttributeSpec("s", "continuous", raw_range=(-1, 1))
    assert scale(t, 3) == 0.5
    assert scale(t, 1) == 0.0 and scale(t, 5) == 1.0
    assert scale(s, -0.7) == pytest.approx(0.15, abs=1e-15)
    with pytest.raises(OutOfRangeError):
        scale(t, 5.5)
    with pytest.raises(OutOfRangeError):
        unscale(t, -0.1)


@given(st.floats(-50, 50), st.floats(0.01, 100), st.floats(0, 1))
def test_unscale_scale_roundtrip(lo, width, frac):
    spec = AttributeSpec("a", "continuous", raw_range=(lo, lo + width))
    raw = lo + frac * width
    raw = min(max(raw, lo), lo + width)
    assert unscale(spec, scale(spec, raw)) == pytest.approx(raw, abs=1e-12 * max(1.0, abs(raw), width))


# ---------------------------------------------------------------------------
# fitting


def test_fit_cpt_count_ratio():
    g = build_graph([AttributeSpec("p", "binary"), AttributeSpec("c", "binary", parents=("p",))])
    p = np.array([1] * 80 + [0] * 20)
    c = np.array([1] * 60 + [0] * 20 + [1] * 5 + [0] * 15)
    m = fit_scm(g, {"p": p, "c": c}, laplace_alpha=0.0)
    assert m.equations["c"].table[1] == 0.75
    assert m.equations["c"].table[0] == 0.25
    assert m.equations["p"].table[0] == 0.8


def test_fit_laplace_formula():
    g = build_graph([AttributeSpec("a", "binary")])
    m = fit_scm(g, {"a": np.ones(100, dtype=int)}, laplace_alpha=1.0)
    assert m.equations["a"].table[0] == 101 / 102


def test_fit_categorical_laplace():
    g = build_graph([AttributeSpec("l", "categorical", cardinality=3)])
    m = fit_scm(g, {"l": np.array([0, 0, 1, 2, 2, 2])}, laplace_alpha=1.0)
    assert m.equations["l"].probs[0] == pytest.approx((3 / 9, 2 / 9, 4 / 9), abs=1e-15)


def test_fit_unobserved_configuration():
    g = build_graph([AttributeSpec("p", "binary"), AttributeSpec("c", "binary", parents=("p",))])
    data = {"p": np.zeros(10, dtype=int), "c": np.ones(10, dtype=int)}
    with pytest.raises(EmptyConfigurationError):
        fit_scm(g, data, laplace_alpha=0.0)
    m = fit_scm(g, data, laplace_alpha=1.0)
    assert m.equations["c"].table[1] == 0.5


def test_fit_singular_design():
    g = build_graph([AttributeSpec("a", "continuous", raw_range=(0, 1)),
                     AttributeSpec("b", "continuous", raw_range=(0, 1)),
                     AttributeSpec("c", "continuous", raw_range=(0, 1), parents=("a", "b"))])
    a = np.linspace(0, 1, 50)
    with pytest.raises(SingularDesignError):
        fit_scm(g, {"a": a, "b": a.copy(), "c": a})


def test_fit_recovers_linear_gaussian_over_seeds():
    model = two_node()
    for seed in range(20):
        table, _ = simulate(model, 5000, Rng(seed))
        eq = fit_scm(model.graph, table).equations["i"]
        assert abs(eq.coefs[0] - 0.60) <= 0.03
        assert abs(eq.noise_std - 0.05) <= 0.005


def test_fit_least_squares_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.random(300)
    b = (rng.random(300) < 0.4).astype(int)
    c = np.clip(0.2 + 0.3 * a - 0.1 * b + rng.normal(0, 0.05, 300), 0, 1)
    g = build_graph([AttributeSpec("a", "continuous", raw_range=(0, 1)), AttributeSpec("b", "binary"),
                     AttributeSpec("c", "continuous", raw_range=(0, 1), parents=("a", "b"))])
    eq = fit_scm(g, {"a": a, "b": b, "c": c}).equations["c"]
    X = np.column_stack([np.ones(300), a, b])
    ref, *_ = np.linalg.lstsq(X, c, rcond=None)
    assert np.allclose([eq.intercept, *eq.coefs], ref, atol=1e-10)
    assert eq.noise_std == pytest.approx(np.sqrt(np.mean((c - X @ ref) ** 2)), rel=1e-9)


def test_fit_rejects_out_of_range():
    g = build_graph([AttributeSpec("a", "continuous", raw_range=(0, 1))])
    with pytest.raises(OutOfRangeError):
        fit_scm(g, {"a": np.array([0.5, 1.5])})


# ---------------------------------------------------------------------------
# abduction and prediction


def test_abduct_linear_gaussian():
    eps = abduct_noise(two_node(), {"t": 0.5, "i": 0.45})["i"]
    assert eps == pytest.approx(0.05, abs=1e-15)


def test_abduct_cpt_midpoints():
    g = build_graph([AttributeSpec("a", "binary")])
    m = StructuralModel(g, {"a": BinaryCPT((), (), (0.8,))})
    assert abduct_noise(m, {"a": 1})["a"] == pytest.approx(0.4)
    assert abduct_noise(m, {"a": 0})["a"] == pytest.approx(0.9)


def test_abduct_categorical_midpoint():
    g = build_graph([AttributeSpec("l", "categorical", cardinality=4)])
    m = StructuralModel(g, {"l": CategoricalCPT((), (), ((0.25,) * 4,))})
    assert abduct_noise(m, {"l": 2})["l"] == 0.625


def test_do_t_propagates_to_i():
    m = two_node()
    a = {"t": 0.5, "i": 0.45}
    out = counterfactual_attributes(m, a, {"t": 0.8})
    assert out["i"] == pytest.approx(0.63, abs=1e-12)
    assert out == oracle_counterfactual(m, a, {"t": 0.8})


def test_do_label_leaves_morphology():
    m = glyph_like()
    a = {"t": 0.3, "i": 0.33, "s": 0.7, "l": 1}
    out = counterfactual_attributes(m, a, {"l": 3})
    assert out == {"t": 0.3, "i": 0.33, "s": 0.7, "l": 3}


def test_identity_intervention_is_exact():
    m = glyph_like()
    a = {"t": 0.3, "i": 0.37, "s": 0.7, "l": 1}
    assert counterfactual_attributes(m, a, dict(a)) == a


def test_clipping_on_prediction():
    m = two_node()
    a = {"t": 0.0, "i": 0.95}  # residual 0.85
    out = counterfactual_attributes(m, a, {"t": 1.0})
    assert out["i"] == 1.0
    assert clipped_at_bound(m, out) == ["i"]
    assert clipped_at_bound(m, a) == []


def test_unknown_target():
    m = two_node()
    with pytest.raises(UnknownAttributeError):
        counterfactual_attributes(m, {"t": 0.5, "i": 0.4}, {"zz": 1})
    with pytest.raises(UnknownAttributeError):
        oracle_counterfactual(m, {"t": 0.5, "i": 0.4}, {"zz": 1})


def test_oracle_empty_targets():
    m = glyph_like()
    a = {"t": 0.3, "i": 0.33, "s": 0.7, "l": 1}
    assert oracle_counterfactual(m, a, {}) == a


def test_diamond_hand_trace():
    g = build_graph([AttributeSpec("a", "binary"), AttributeSpec("b", "binary", parents=("a",)),
                     AttributeSpec("c", "binary", parents=("a",)), AttributeSpec("d", "binary", parents=("b", "c"))])
    # d's table indexed by b + 2c
    m = StructuralModel(g, {"a": BinaryCPT((), (), (0.5,)), "b": BinaryCPT(("a",), (2,), (0.2, 0.9)),
                            "c": BinaryCPT(("a",), (2,), (0.3, 0.8)),
                            "d": BinaryCPT(("b", "c"), (2, 2), (0.1, 0.5, 0.5, 0.95))})
    a = {"a": 0, "b": 0, "c": 0, "d": 0}
    # noise: b: (1+0.2)/2 = 0.6, c: (1+0.3)/2 = 0.65, d: (1+0.1)/2 = 0.55
    # do(a=1): b = 1[0.6 <= 0.9] = 1, c = 1[0.65 <= 0.8] = 1, d = 1[0.55 <= 0.95] = 1
    out = counterfactual_attributes(m, a, {"a": 1})
    assert out == {"a": 1, "b": 1, "c": 1, "d": 1}
    assert oracle_counterfactual(m, a, {"a": 1}) == out


def test_gate_waits_for_all_changed_parents():
    # a -> b -> c and a -> c: c is recomputed only after b has been updated
    g = build_graph([AttributeSpec("a", "continuous", raw_range=(0, 1)),
                     AttributeSpec("b", "continuous", raw_range=(0, 1), parents=("a",)),
                     AttributeSpec("c", "continuous", raw_range=(0, 1), parents=("a", "b"))])
    m = StructuralModel(g, {"a": UniformRoot(), "b": LinearGaussian(("a",), 0.1, (0.5,), 0.1),
                            "c": LinearGaussian(("a", "b"), 0.0, (0.3, 0.6), 0.1)})
    a = {"a": 0.2, "b": 0.25, "c": 0.3}
    out = counterfactual_attributes(m, a, {"a": 0.6})
    b_new = 0.1 + 0.5 * 0.6 + (0.25 - 0.2)
    c_new = 0.3 * 0.6 + 0.6 * b_new + (0.3 - (0.06 + 0.15))
    assert out["b"] == pytest.approx(b_new, abs=1e-12)
    assert out["c"] == pytest.approx(c_new, abs=1e-12)


# ---------------------------------------------------------------------------
# simulation


def test_simulate_mean():
    table, _ = simulate(two_node(), 10000, Rng(1))
    assert abs(table["i"].mean() - 0.40) <= 0.01


def test_simulate_degenerate_noise():
    table, _ = simulate(two_node(sigma=1e-9), 2000, Rng(2))
    assert np.max(np.abs(table["i"] - (0.10 + 0.60 * table["t"]))) < 1e-6


def test_simulate_deterministic():
    m = glyph_like()
    t1, n1 = simulate(m, 500, Rng(3))
    t2, n2 = simulate(m, 500, Rng(3))
    for k in t1:
        assert t1[k].tobytes() == t2[k].tobytes()
        assert n1[k].tobytes() == n2[k].tobytes()


def test_simulate_stores_generating_noise():
    m = two_node()
    table, noise = simulate(m, 200, Rng(4))
    inside = (table["i"] > 0) & (table["i"] < 1)
    rec = table["i"] - (0.10 + 0.60 * table["t"])
    assert np.allclose(rec[inside], noise["i"][inside], atol=1e-12)


# ---------------------------------------------------------------------------
# model invariants and serialization


def test_model_validation():
    g = build_graph([AttributeSpec("a", "binary")])
    with pytest.raises(SchemaError):
        StructuralModel(g, {"a": BinaryCPT((), (), (1.2,))})
    g2 = build_graph([AttributeSpec("c", "continuous", raw_range=(0, 1))])
    with pytest.raises(SchemaError):
        StructuralModel(g2, {"c": LinearGaussian((), 0.0, (), 0.0)})
    g3 = build_graph([AttributeSpec("l", "categorical", cardinality=2)])
    with pytest.raises(SchemaError):
        StructuralModel(g3, {"l": CategoricalCPT((), (), ((0.5, 0.6),))})


def test_model_json_roundtrip():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = random_model(rng)
        back = StructuralModel.from_json(m.to_json())
        assert back.to_json() == m.to_json()
        assert back.graph == m.graph
    lines = glyph_like().summary()
    assert lines[1].startswith("i = 0.1000 + 0.6000*t")


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=150, deadline=None)
def test_counterfactual_properties(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    a = random_row(m, rng)
    noise = abduct_noise(m, a)
    # consistency
    assert predict_attributes(m, a, dict(a), noise) == a
    # abduction round trip
    for n in m.graph.names:
        eq = m.equations[n]
        if isinstance(eq, LinearGaussian):
            if 0.0 < a[n] < 1.0:
                assert abs(float(eq.evaluate(a, noise[n])) - a[n]) <= 1e-12
        else:
            assert eq.evaluate(a, noise[n]) == a[n]
        if isinstance(eq, (BinaryCPT, CategoricalCPT)):
            assert 0.0 <= noise[n] <= 1.0
    targets = random_targets(m, rng)
    out = predict_attributes(m, a, targets, noise)
    # gated propagation equals the topological oracle
    assert out == oracle_counterfactual(m, a, targets)
    # non-descendant invariance
    untouched = set(m.graph.names) - descendants(m.graph, targets) - set(targets)
    for n in untouched:
        assert out[n] == a[n]


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_monotone_cpt_counterfactual(seed):
    rng = np.random.default_rng(seed)
    m = diamond_model(rng)
    a = random_row(m, rng)
    out = counterfactual_attributes(m, a, {"a": 1 - a["a"]})
    for n in ("b", "c", "d"):
        eq = m.equations[n]
        if a[n] == 1 and eq.prob(out) >= eq.prob(a):
            assert out[n] == 1
