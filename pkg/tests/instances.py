"""Random structural models and intervention instances for property tests."""

from __future__ import annotations

import numpy as np

from cfaudit.graph import AttributeSpec, build_graph
from cfaudit.renderer import DEFAULT_PARAMS
from cfaudit.rng import Rng
from cfaudit.scm import BinaryCPT, CategoricalCPT, LinearGaussian, StructuralModel, UniformRoot, simulate, table_rows


def _equation(spec, graph_specs, rng: np.random.Generator):
    parents = spec.parents
    if spec.kind == "continuous":
        if not parents and rng.random() < 0.5:
            return UniformRoot()
        coefs = tuple(float(c) for c in rng.uniform(-0.8, 0.8, len(parents)))
        return LinearGaussian(parents, float(rng.uniform(0.1, 0.6)), coefs, float(rng.uniform(0.02, 0.2)))
    levels = tuple(graph_specs[p].levels for p in parents)
    n_cfg = int(np.prod(levels, dtype=np.int64)) if parents else 1
    if spec.kind == "binary":
        return BinaryCPT(parents, levels, tuple(float(p) for p in rng.uniform(0.05, 0.95, n_cfg)))
    rows = rng.dirichlet(np.ones(spec.levels), n_cfg)
    rows = [tuple(float(v) for v in r / r.sum()) for r in rows]
    return CategoricalCPT(parents, levels, tuple(rows))


def _allowed(child_kind, parent_kind):
    if child_kind == "continuous":
        return parent_kind in ("continuous", "binary")
    return parent_kind in ("binary", "categorical")


def random_model(rng: np.random.Generator, max_nodes: int = 6, glyph: bool = False,
                 edge_prob: float = 0.5) -> StructuralModel:
    """Random DAG with mixed CPT / linear-Gaussian equations.

    With ``glyph`` the node set is t, i, s, l plus up to two binary marks, so
    rows can be rendered.
    """
    if glyph:
        base = [("t", "continuous", DEFAULT_PARAMS.thickness_range, None),
                ("i", "continuous", DEFAULT_PARAMS.intensity_range, None),
                ("s", "continuous", DEFAULT_PARAMS.slant_range, None),
                ("l", "categorical", None, DEFAULT_PARAMS.n_labels)]
        extra = int(rng.integers(0, max_nodes - 3))
        base += [(f"b{k}", "binary", None, None) for k in range(extra)]
    else:
        n = int(rng.integers(2, max_nodes + 1))
        base = []
        for k in range(n):
            kind = ("binary", "categorical", "continuous")[int(rng.integers(0, 3))]
            base.append((f"v{k}", kind, (0.0, 1.0) if kind == "continuous" else None,
                         int(rng.integers(2, 5)) if kind == "categorical" else None))
    order = [base[k] for k in rng.permutation(len(base))]
    specs = []
    for j, (name, kind, rr, card) in enumerate(order):
        parents = tuple(p.name for p in specs if _allowed(kind, p.kind) and rng.random() < edge_prob)
        specs.append(AttributeSpec(name, kind, raw_range=rr, cardinality=card, parents=parents))
    # keep declaration order different from a topological order now and then
    if rng.random() < 0.5:
        specs = specs[::-1]
    graph = build_graph(specs)
    by_name = {s.name: s for s in specs}
    eqs = {s.name: _equation(s, by_name, rng) for s in specs}
    return StructuralModel(graph, eqs)


def diamond_model(rng: np.random.Generator) -> StructuralModel:
    specs = [AttributeSpec("a", "binary"), AttributeSpec("b", "binary", parents=("a",)),
             AttributeSpec("c", "binary", parents=("a",)), AttributeSpec("d", "binary", parents=("b", "c"))]
    by_name = {s.name: s for s in specs}
    return StructuralModel(build_graph(specs), {s.name: _equation(s, by_name, rng) for s in specs})


def chain_model(rng: np.random.Generator, n: int = 4, continuous: bool = True) -> StructuralModel:
    kind = "continuous" if continuous else "binary"
    specs = [AttributeSpec("x0", kind, raw_range=(0.0, 1.0) if continuous else None)]
    for k in range(1, n):
        specs.append(AttributeSpec(f"x{k}", kind, raw_range=(0.0, 1.0) if continuous else None,
                                   parents=(f"x{k - 1}",)))
    by_name = {s.name: s for s in specs}
    return StructuralModel(build_graph(specs), {s.name: _equation(s, by_name, rng) for s in specs})


def random_value(spec, rng: np.random.Generator):
    if spec.kind == "continuous":
        r = rng.random()
        if r < 0.1:
            return 0.0
        if r < 0.2:
            return 1.0
        return float(rng.random())
    return int(rng.integers(0, spec.levels))


def random_row(model: StructuralModel, rng: np.random.Generator) -> dict:
    """A row drawn from the model itself."""
    table, _ = simulate(model, 1, Rng(int(rng.integers(0, 2**62))))
    return table_rows(table)[0]


def random_targets(model: StructuralModel, rng: np.random.Generator) -> dict:
    names = model.graph.names
    k = int(rng.integers(1, len(names) + 1))
    chosen = [names[j] for j in sorted(rng.choice(len(names), size=k, replace=False))]
    return {n: random_value(model.graph.spec(n), rng) for n in chosen}
