"""Structural equations over attributes: fitting, abduction and interventions.

Continuous attributes live in scaled [0, 1] units inside every table and
attribute vector; raw units only appear at the edges (``scale``/``unscale``).
Binary attributes are 0/1 and categorical attributes are class indices.

Discrete nodes use the monotone probability-integral form ``a = 1[u <= p]``
with ``u ~ Uniform(0, 1)``; abduction picks the midpoint of the interval of
``u`` values consistent with the observation, so counterfactuals are
deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    EmptyConfigurationError,
    OutOfRangeError,
    SchemaError,
    SingularDesignError,
    UnknownAttributeError,
)
from .graph import AttributeSpec, CausalGraph, descendants, mutilate, topo_order
from .rng import Rng

PIVOT_TOL = 1e-10


# ---------------------------------------------------------------------------
# scaling


def scale(spec: AttributeSpec, raw):
    """Map a raw value into the attribute's scaled representation."""
    if spec.kind != "continuous":
        return _check_discrete(spec, raw)
    lo, hi = spec.raw_range
    arr = np.asarray(raw, dtype=np.float64)
    if np.any(arr < lo) or np.any(arr > hi) or np.any(~np.isfinite(arr)):
        raise OutOfRangeError(f"{spec.name}: raw value outside [{lo}, {hi}]")
    out = (arr - lo) / (hi - lo)
    return float(out) if out.ndim == 0 else out


def unscale(spec: AttributeSpec, scaled):
    if spec.kind != "continuous":
        return _check_discrete(spec, scaled)
    lo, hi = spec.raw_range
    arr = np.asarray(scaled, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise OutOfRangeError(f"{spec.name}: scaled value outside [0, 1]")
    out = lo + arr * (hi - lo)
    return float(out) if out.ndim == 0 else out


def _check_discrete(spec: AttributeSpec, value):
    arr = np.asarray(value)
    if arr.dtype.kind == "f":
        if np.any(arr != np.round(arr)):
            raise OutOfRangeError(f"{spec.name}: discrete value must be integral")
    arr = arr.astype(np.int64)
    if np.any(arr < 0) or np.any(arr >= spec.levels):
        raise OutOfRangeError(f"{spec.name}: value outside 0..{spec.levels - 1}")
    return int(arr) if arr.ndim == 0 else arr


def check_value(spec: AttributeSpec, value) -> None:
    if spec.kind == "continuous":
        if not (0.0 <= float(value) <= 1.0):
            raise OutOfRangeError(f"{spec.name}: scaled value {value} outside [0, 1]")
    else:
        _check_discrete(spec, value)


# ---------------------------------------------------------------------------
# equations


def _config_index(parent_levels, parent_values) -> int:
    # little-endian mixed radix over the parent list
    idx, radix = 0, 1
    for lev, v in zip(parent_levels, parent_values):
        idx += int(v) * radix
        radix *= lev
    return idx


def _config_index_array(parent_levels, columns, n) -> np.ndarray:
    idx = np.zeros(n, dtype=np.int64)
    radix = 1
    for lev, col in zip(parent_levels, columns):
        idx += np.asarray(col, dtype=np.int64) * radix
        radix *= lev
    return idx


@dataclass(frozen=True)
class LinearGaussian:
    parents: tuple[str, ...]
    intercept: float
    coefs: tuple[float, ...]
    noise_std: float

    kind = "linear_gaussian"

    def linear(self, pv):
        acc = self.intercept
        for b, p in zip(self.coefs, self.parents):
            acc = acc + b * pv[p]
        return acc

    def evaluate(self, pv, noise):
        return np.clip(self.linear(pv) + noise, 0.0, 1.0)

    def abduct(self, value, pv):
        # residual against the pre-clipping linear form
        return value - self.linear(pv)

    def draw_noise(self, rng: Rng, n: int) -> np.ndarray:
        return rng.normal(n) * self.noise_std

    def to_dict(self) -> dict:
        return {
            "type": self.kind,
            "parents": list(self.parents),
            "intercept": self.intercept,
            "coefs": list(self.coefs),
            "noise_std": self.noise_std,
        }


@dataclass(frozen=True)
class BinaryCPT:
    """P(a = 1 | parent configuration), one entry per configuration."""

    parents: tuple[str, ...]
    parent_levels: tuple[int, ...]
    table: tuple[float, ...]

    kind = "cpt"

    def prob(self, pv) -> float:
        return self.table[_config_index(self.parent_levels, [pv[p] for p in self.parents])]

    def evaluate(self, pv, noise):
        if np.ndim(noise):
            p = np.asarray(self.table)[
                _config_index_array(self.parent_levels, [pv[p] for p in self.parents], len(noise))
            ]
            return (noise <= p).astype(np.int64)
        return 1 if noise <= self.prob(pv) else 0

    def abduct(self, value, pv):
        p = self.prob(pv)
        return p / 2.0 if int(value) == 1 else (1.0 + p) / 2.0

    def draw_noise(self, rng: Rng, n: int) -> np.ndarray:
        return rng.uniform(n)

    def to_dict(self) -> dict:
        return {
            "type": self.kind,
            "parents": list(self.parents),
            "parent_levels": list(self.parent_levels),
            "table": list(self.table),
        }


@dataclass(frozen=True)
class CategoricalCPT:
    """Class probabilities per parent configuration (a single row for roots)."""

    parents: tuple[str, ...]
    parent_levels: tuple[int, ...]
    probs: tuple[tuple[float, ...], ...]

    kind = "categorical"

    def bounds(self, pv) -> np.ndarray:
        row = self.probs[_config_index(self.parent_levels, [pv[p] for p in self.parents])]
        c = np.concatenate([[0.0], np.cumsum(row)])
        c[-1] = 1.0
        return c

    def evaluate(self, pv, noise):
        if np.ndim(noise):
            idx = _config_index_array(self.parent_levels, [pv[p] for p in self.parents], len(noise))
            out = np.empty(len(noise), dtype=np.int64)
            for cfg in np.unique(idx):
                c = np.concatenate([[0.0], np.cumsum(self.probs[cfg])])
                sel = idx == cfg
                out[sel] = np.searchsorted(c[1:-1], noise[sel], side="right")
            return out
        c = self.bounds(pv)
        return int(np.searchsorted(c[1:-1], noise, side="right"))

    def abduct(self, value, pv):
        c = self.bounds(pv)
        k = int(value)
        return (c[k] + c[k + 1]) / 2.0

    def draw_noise(self, rng: Rng, n: int) -> np.ndarray:
        return rng.uniform(n)

    def to_dict(self) -> dict:
        return {
            "type": self.kind,
            "parents": list(self.parents),
            "parent_levels": list(self.parent_levels),
            "probs": [list(r) for r in self.probs],
        }


@dataclass(frozen=True)
class UniformRoot:
    """Continuous root drawn uniformly over its scaled range; noise is the value."""

    parents: tuple[str, ...] = ()

    kind = "uniform"

    def evaluate(self, pv, noise):
        return noise

    def abduct(self, value, pv):
        return value

    def draw_noise(self, rng: Rng, n: int) -> np.ndarray:
        return rng.uniform(n)

    def to_dict(self) -> dict:
        return {"type": self.kind, "parents": []}


def equation_from_dict(doc: dict):
    t = doc["type"]
    if t == "linear_gaussian":
        return LinearGaussian(tuple(doc["parents"]), float(doc["intercept"]),
                              tuple(float(c) for c in doc["coefs"]), float(doc["noise_std"]))
    if t == "cpt":
        return BinaryCPT(tuple(doc["parents"]), tuple(doc["parent_levels"]),
                         tuple(float(p) for p in doc["table"]))
    if t == "categorical":
        return CategoricalCPT(tuple(doc["parents"]), tuple(doc["parent_levels"]),
                              tuple(tuple(float(p) for p in r) for r in doc["probs"]))
    if t == "uniform":
        return UniformRoot()
    raise SchemaError(f"unknown equation type {t!r}")


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class StructuralModel:
    graph: CausalGraph
    equations: Mapping[str, object]

    def __post_init__(self):
        g = self.graph
        if set(self.equations) != set(g.names):
            raise SchemaError("equations must cover exactly the graph's attributes")
        for name in g.names:
            eq = self.equations[name]
            spec = g.spec(name)
            if tuple(eq.parents) != spec.parents:
                raise SchemaError(f"{name}: equation parents {eq.parents} != graph parents {spec.parents}")
            if isinstance(eq, LinearGaussian):
                if spec.kind != "continuous":
                    raise SchemaError(f"{name}: linear-Gaussian equation on a {spec.kind} node")
                if not eq.noise_std > 0:
                    raise SchemaError(f"{name}: noise_std must be positive")
            elif isinstance(eq, UniformRoot):
                if spec.kind != "continuous" or spec.parents:
                    raise SchemaError(f"{name}: uniform equations are for continuous roots")
            elif isinstance(eq, BinaryCPT):
                if spec.kind != "binary":
                    raise SchemaError(f"{name}: CPT equation on a {spec.kind} node")
                if any(not 0.0 <= p <= 1.0 for p in eq.table):
                    raise SchemaError(f"{name}: CPT probability outside [0, 1]")
                if len(eq.table) != int(np.prod(eq.parent_levels, dtype=np.int64)):
                    raise SchemaError(f"{name}: CPT size does not match parent configurations")
            elif isinstance(eq, CategoricalCPT):
                if spec.kind != "categorical":
                    raise SchemaError(f"{name}: categorical equation on a {spec.kind} node")
                for row in eq.probs:
                    if len(row) != spec.levels or any(p < 0 for p in row) or abs(sum(row) - 1.0) > 1e-9:
                        raise SchemaError(f"{name}: class probabilities must be a distribution")
            else:
                raise SchemaError(f"{name}: unsupported equation {type(eq).__name__}")
        object.__setattr__(self, "equations", {n: self.equations[n] for n in g.names})

    def to_dict(self) -> dict:
        return {
            "version": "scm-1",
            "graph": self.graph.to_dict(),
            "equations": {n: self.equations[n].to_dict() for n in self.graph.names},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "StructuralModel":
        if doc.get("version") != "scm-1":
            raise SchemaError("unsupported model version")
        graph = CausalGraph.from_dict(doc["graph"])
        return cls(graph, {n: equation_from_dict(d) for n, d in doc["equations"].items()})

    @classmethod
    def from_json(cls, text: str) -> "StructuralModel":
        return cls.from_dict(json.loads(text))

    def summary(self) -> list[str]:
        lines = []
        for n in self.graph.names:
            eq = self.equations[n]
            if isinstance(eq, LinearGaussian):
                terms = " ".join(f"+ {b:.4f}*{p}" for b, p in zip(eq.coefs, eq.parents))
                lines.append(f"{n} = {eq.intercept:.4f} {terms} + N(0, {eq.noise_std:.4f})".replace("  ", " "))
            elif isinstance(eq, BinaryCPT):
                lines.append(f"P({n}=1 | {','.join(eq.parents) or '-'}) = " + ", ".join(f"{p:.4f}" for p in eq.table))
            elif isinstance(eq, CategoricalCPT):
                lines.append(f"P({n} | {','.join(eq.parents) or '-'}) = " +
                             "; ".join(", ".join(f"{p:.4f}" for p in r) for r in eq.probs))
            else:
                lines.append(f"{n} ~ Uniform[0, 1]")
        return lines


# ---------------------------------------------------------------------------
# fitting


def _solve_normal_equations(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Solve (X'X) b = X'y by Gauss-Jordan elimination with partial pivoting."""
    A = X.T @ X
    rhs = X.T @ y
    n = A.shape[0]
    M = np.concatenate([A, rhs[:, None]], axis=1)
    tol = PIVOT_TOL * max(np.max(np.abs(np.diag(A))), np.finfo(float).tiny)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(M[col:, col])))
        if abs(M[piv, col]) <= tol:
            raise SingularDesignError(f"normal matrix is rank-deficient (pivot {M[piv, col]:.3e})")
        if piv != col:
            M[[col, piv]] = M[[piv, col]]
        M[col] = M[col] / M[col, col]
        for r in range(n):
            if r != col:
                M[r] = M[r] - M[r, col] * M[col]
    return M[:, n]


def fit_scm(graph: CausalGraph, data: Mapping[str, np.ndarray], laplace_alpha: float = 1.0) -> StructuralModel:
    """Maximum-likelihood structural equations for ``graph`` from a column table."""
    if laplace_alpha < 0:
        raise ValueError("laplace_alpha must be >= 0")
    cols = {n: np.asarray(data[n]) for n in graph.names}
    n_rows = len(next(iter(cols.values())))
    if n_rows == 0:
        raise ValueError("data is empty")
    for n, spec in zip(graph.names, graph.attributes):
        if len(cols[n]) != n_rows:
            raise SchemaError("columns have different lengths")
        if spec.kind == "continuous":
            if np.any(cols[n] < 0) or np.any(cols[n] > 1):
                raise OutOfRangeError(f"{n}: scaled values outside [0, 1]")
        else:
            _check_discrete(spec, cols[n])

    equations = {}
    alpha = float(laplace_alpha)
    for spec in graph.attributes:
        parents = spec.parents
        y = cols[spec.name]
        if spec.kind == "continuous":
            X = np.column_stack([np.ones(n_rows)] + [cols[p].astype(np.float64) for p in parents])
            beta = _solve_normal_equations(X, y.astype(np.float64))
            resid = y - X @ beta
            sigma = float(np.sqrt(np.mean(resid**2)))
            equations[spec.name] = LinearGaussian(parents, float(beta[0]), tuple(float(b) for b in beta[1:]),
                                                  max(sigma, 1e-12))
            continue
        levels = tuple(graph.spec(p).levels for p in parents)
        n_cfg = int(np.prod(levels, dtype=np.int64)) if parents else 1
        idx = _config_index_array(levels, [cols[p] for p in parents], n_rows)
        totals = np.bincount(idx, minlength=n_cfg).astype(np.float64)
        if alpha == 0 and np.any(totals == 0):
            missing = int(np.flatnonzero(totals == 0)[0])
            raise EmptyConfigurationError(f"{spec.name}: parent configuration {missing} never observed")
        k = spec.levels
        counts = np.zeros((n_cfg, k))
        np.add.at(counts, (idx, y.astype(np.int64)), 1.0)
        if spec.kind == "binary":
            table = (counts[:, 1] + alpha) / (totals + 2 * alpha)
            equations[spec.name] = BinaryCPT(parents, levels, tuple(float(p) for p in table))
        else:
            probs = (counts + alpha) / (totals[:, None] + k * alpha)
            equations[spec.name] = CategoricalCPT(parents, levels, tuple(tuple(float(p) for p in r) for r in probs))
    return StructuralModel(graph, equations)


# ---------------------------------------------------------------------------
# abduction / prediction


def _check_vector(model: StructuralModel, a: Mapping) -> None:
    for n in model.graph.names:
        if n not in a:
            raise UnknownAttributeError(f"attribute vector is missing {n!r}")
        check_value(model.graph.spec(n), a[n])


def abduct_noise(model: StructuralModel, a: Mapping) -> dict:
    _check_vector(model, a)
    return {n: float(model.equations[n].abduct(a[n], a)) for n in model.graph.names}


def clipped_at_bound(model: StructuralModel, a: Mapping) -> list[str]:
    """Linear-Gaussian attributes whose observed value sits on 0 or 1.

    Abduction there ignores the clipping, so the recovered residual may not be
    the noise that produced the row; reports flag these rows.
    """
    return [n for n, eq in model.equations.items()
            if isinstance(eq, LinearGaussian) and a[n] in (0.0, 1.0)]


def _reevaluate(eq, observed, old_parents: Mapping, new_parents: Mapping, noise):
    # with unchanged parents, abducted noise reproduces the observation; return
    # it verbatim so identity interventions are exact in floating point
    if all(new_parents[p] == old_parents[p] for p in eq.parents):
        return observed
    v = eq.evaluate(new_parents, noise)
    return float(v) if isinstance(eq, LinearGaussian) else int(v)


def _check_targets(model: StructuralModel, targets: Mapping) -> None:
    for name, value in targets.items():
        spec = model.graph.spec(name)
        check_value(spec, value)


def predict_attributes(model: StructuralModel, a: Mapping, targets: Mapping, noise: Mapping) -> dict:
    """Action + prediction with level-by-level gated propagation.

    Targets are set directly; their descendants are recomputed from changed
    parents and the abducted noise, a node only once every parent inside the
    descendant set has been recomputed.
    """
    _check_targets(model, targets)
    graph = model.graph
    out = dict(a)
    if not targets:
        return out
    K = set(targets)
    for k, v in targets.items():
        out[k] = v
    mut = mutilate(graph, K)
    D = descendants(mut, K)
    changed = {n: False for n in graph.names}
    order = {n: i for i, n in enumerate(graph.names)}

    def children_of(nodes):
        kids = {c for n in nodes for c in mut.children(n)}
        return sorted(kids, key=order.__getitem__)

    currset = children_of(K)
    while currset:
        cs = []
        for aj in currset:
            if any(p in D and not changed[p] for p in mut.parents(aj)):
                continue
            eq = model.equations[aj]
            out[aj] = _reevaluate(eq, a[aj], a, out, noise[aj])
            cs.append(aj)
            changed[aj] = True
        currset = children_of(cs)
    return out


def oracle_counterfactual(model: StructuralModel, a: Mapping, targets: Mapping) -> dict:
    """Reference counterfactual: re-evaluate every equation of the mutilated model
    in topological order, without any frontier bookkeeping."""
    _check_vector(model, a)
    _check_targets(model, targets)
    noise = {n: model.equations[n].abduct(a[n], a) for n in model.graph.names}
    mut = mutilate(model.graph, targets.keys())
    out = {}
    for n in topo_order(mut):
        if n in targets:
            out[n] = targets[n]
        else:
            out[n] = _reevaluate(model.equations[n], a[n], a, out, noise[n])
    return out


def counterfactual_attributes(model: StructuralModel, a: Mapping, targets: Mapping) -> dict:
    """Abduction followed by :func:`predict_attributes`."""
    return predict_attributes(model, a, targets, abduct_noise(model, a))


# ---------------------------------------------------------------------------
# simulation


def simulate(model: StructuralModel, n: int, rng: Rng) -> tuple[dict, dict]:
    """Forward-sample ``n`` rows; returns ``(table, noise)`` column dicts."""
    if n < 1:
        raise ValueError("n must be >= 1")
    table: dict[str, np.ndarray] = {}
    noise: dict[str, np.ndarray] = {}
    for name in topo_order(model.graph):
        eq = model.equations[name]
        u = eq.draw_noise(rng, n)
        noise[name] = u
        table[name] = np.asarray(eq.evaluate(table, u))
    ordered = {k: table[k] for k in model.graph.names}
    return ordered, {k: noise[k] for k in model.graph.names}


def table_rows(table: Mapping[str, np.ndarray]) -> list[dict]:
    """Column table to a list of per-row attribute vectors (python scalars)."""
    names = list(table)
    cols = [np.asarray(table[k]) for k in names]
    n = len(cols[0])
    rows = []
    for i in range(n):
        rows.append({k: (float(c[i]) if c.dtype.kind == "f" else int(c[i])) for k, c in zip(names, cols)})
    return rows


def rows_table(rows: list[Mapping], graph: CausalGraph) -> dict:
    out = {}
    for spec in graph.attributes:
        dt = np.float64 if spec.kind == "continuous" else np.int64
        out[spec.name] = np.array([r[spec.name] for r in rows], dtype=dt)
    return out
