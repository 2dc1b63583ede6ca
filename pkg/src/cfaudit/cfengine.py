"""Counterfactual images: encode, abduct attribute noise, intervene, propagate, decode.

``x_r = G(E(x, a), a)`` is the base image and ``x_c = G(E(x, a), a_c)`` the
counterfactual; both share the latent code, so any pixel difference between
them is caused by the attribute change alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import BlankImageError, ConfigError, FormatError, SchemaError, UnknownAttributeError
from .fileio import atomic_directory, read_f32, write_f32
from .graph import CausalGraph
from .renderer import measure
from .scm import StructuralModel, abduct_noise, predict_attributes, scale, unscale

REDUNDANCY_TOL = 1e-9


def _fmt_value(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


@dataclass(frozen=True)
class InterventionSpec:
    """Target values in raw units, keyed by attribute name."""

    targets: dict
    label: str = ""

    def __post_init__(self):
        if not self.targets:
            raise ConfigError("an intervention needs at least one target")
        if not self.label:
            body = ",".join(f"{k}={_fmt_value(v)}" for k, v in self.targets.items())
            object.__setattr__(self, "label", f"do({body})")

    @classmethod
    def parse(cls, text: str) -> "InterventionSpec":
        """Parse ``"name=value,name=value"``; integral values stay integers."""
        targets = {}
        for part in text.split(","):
            if "=" not in part:
                raise ConfigError(f"bad intervention term {part!r} (expected name=value)")
            name, value = (s.strip() for s in part.split("=", 1))
            try:
                targets[name] = int(value)
            except ValueError:
                try:
                    targets[name] = float(value)
                except ValueError:
                    raise ConfigError(f"bad value {value!r} for {name}") from None
        return cls(targets)

    def scaled_targets(self, model: StructuralModel) -> dict:
        out = {}
        for name, raw in self.targets.items():
            if name not in model.graph:
                raise UnknownAttributeError(f"unknown attribute {name!r}")
            out[name] = scale(model.graph.spec(name), raw)
        return out

    def is_redundant(self, model: StructuralModel, a) -> bool:
        """True when every target already holds (raw-unit comparison)."""
        for name, raw in self.targets.items():
            spec = model.graph.spec(name)
            observed = unscale(spec, a[name])
            if spec.kind == "continuous":
                if abs(float(observed) - float(raw)) > REDUNDANCY_TOL:
                    return False
            elif int(observed) != int(raw):
                return False
        return True


@dataclass
class CfPair:
    x_r: np.ndarray
    x_c: np.ndarray
    a: dict
    a_c: dict
    intervention: InterventionSpec
    skipped: bool = False
    row_id: int = -1


def counterfactual(codec, model: StructuralModel, x, a, spec: InterventionSpec, row_id: int = -1) -> CfPair:
    z = codec.encode(np.asarray(x)[None], [a])
    a_c = predict_attributes(model, a, spec.scaled_targets(model), abduct_noise(model, a))
    x_r = codec.decode(z, [a])[0]
    x_c = codec.decode(z, [a_c])[0]
    return CfPair(x_r, x_c, dict(a), a_c, spec, row_id=row_id)


def cf_batch(codec, model: StructuralModel, data: Dataset, specs, filter_redundant: bool = False,
             rows=None, chunk: int = 500) -> list[CfPair]:
    """Apply every spec to every row; output ordered by (row, spec).

    With ``filter_redundant`` rows where the intervention changes nothing on
    its targets are kept but flagged ``skipped``.
    """
    specs = list(specs)
    if data.n == 0:
        raise ConfigError("dataset is empty")
    if model.graph.names != data.graph.names:
        raise SchemaError("model and dataset have different attributes")
    ids = np.arange(data.n) if rows is None else np.asarray(rows)
    scaled = [s.scaled_targets(model) for s in specs]
    out = []
    for start in range(0, len(ids), chunk):
        idx = ids[start:start + chunk]
        a = [data.row(int(k)) for k in idx]
        z = codec.encode(data.images[idx], a)
        x_r = codec.decode(z, a)
        per_spec = []
        for spec, tgt in zip(specs, scaled):
            a_c = [predict_attributes(model, r, tgt, abduct_noise(model, r)) for r in a]
            per_spec.append((a_c, codec.decode(z, a_c)))
        for j, k in enumerate(idx):
            for spec, (a_c, x_c) in zip(specs, per_spec):
                skipped = filter_redundant and spec.is_redundant(model, a[j])
                out.append(CfPair(x_r[j], x_c[j], a[j], a_c[j], spec, skipped, int(k)))
    return out


@dataclass
class SweepResult:
    attribute: str
    points: list[dict] = field(default_factory=list)  # row, target, measured
    median_abs_error: float = float("nan")
    n_blank: int = 0
    reconstruction_median_abs_error: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "n_points": len(self.points),
            "n_blank": self.n_blank,
            "median_abs_error": self.median_abs_error,
            "reconstruction_median_abs_error": self.reconstruction_median_abs_error,
        }


TARGET_DISTRIBUTIONS = ("marginal", "uniform")


def sample_targets(data: Dataset, attribute: str, n: int, rng, distribution: str = "marginal") -> np.ndarray:
    """Raw sweep targets: resampled observed values (``marginal``) or uniform over the raw range."""
    spec = data.graph.spec(attribute)
    if spec.kind != "continuous":
        raise ConfigError(f"{attribute} is not continuous")
    if distribution == "marginal":
        observed = unscale(spec, np.asarray(data.table[attribute], dtype=np.float64))
        return observed[rng.integers(n, data.n)]
    if distribution == "uniform":
        return rng.uniform(n, *spec.raw_range)
    raise ConfigError(f"unknown target distribution {distribution!r}; expected one of {TARGET_DISTRIBUTIONS}")


def cf_measurement_sweep(codec, model: StructuralModel, data: Dataset, attribute: str, targets,
                         rows=None, params=None) -> SweepResult:
    """Generate ``do(attribute = target)`` for every row and target, and measure the result.

    Also reports the median error of measuring the plain reconstructions
    against their observed values, as the no-intervention reference.
    """
    spec = model.graph.spec(attribute)
    if spec.kind != "continuous":
        raise ConfigError(f"{attribute} is not continuous")
    params = params or data.params
    ids = np.arange(data.n) if rows is None else np.asarray(rows)
    specs = [InterventionSpec({attribute: float(t)}) for t in targets]
    pairs = cf_batch(codec, model, data, specs, rows=ids)
    res = SweepResult(attribute)
    errs, rec_errs = [], []
    seen_rows = set()
    for p in pairs:
        target = p.intervention.targets[attribute]
        try:
            m = measure(p.x_c, params)[attribute]
        except BlankImageError:
            res.n_blank += 1
            continue
        res.points.append({"row": p.row_id, "target": target, "measured": m})
        errs.append(abs(m - target))
        if p.row_id not in seen_rows:
            seen_rows.add(p.row_id)
            try:
                observed = unscale(spec, p.a[attribute])
                rec_errs.append(abs(measure(p.x_r, params)[attribute] - observed))
            except BlankImageError:
                pass
    if errs:
        res.median_abs_error = float(np.median(errs))
    if rec_errs:
        res.reconstruction_median_abs_error = float(np.median(rec_errs))
    return res


# ---------------------------------------------------------------------------
# pairs container: manifest.json, x_r.f32, x_c.f32, pairs.csv (scaled attribute values)


def write_pairs(pairs: list[CfPair], graph, path) -> None:
    if not pairs:
        raise ConfigError("no pairs to write")
    h, w = pairs[0].x_r.shape
    specs, index = [], {}
    for p in pairs:
        if p.intervention.label not in index:
            index[p.intervention.label] = len(specs)
            specs.append({"label": p.intervention.label, "targets": p.intervention.targets})
    names = graph.names
    header = ["row_id", "spec", "skipped"] + [f"a.{n}" for n in names] + [f"c.{n}" for n in names]
    lines = [",".join(header)]
    for p in pairs:
        vals = [str(p.row_id), str(index[p.intervention.label]), str(int(p.skipped))]
        vals += [_cell(p.a[n]) for n in names] + [_cell(p.a_c[n]) for n in names]
        lines.append(",".join(vals))
    doc = {"version": "pairs-1", "n": len(pairs), "height": h, "width": w, "units": "scaled",
           "graph": graph.to_dict(), "specs": specs}
    with atomic_directory(path) as tmp:
        (tmp / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")
        write_f32(tmp / "x_r.f32", np.stack([p.x_r for p in pairs]))
        write_f32(tmp / "x_c.f32", np.stack([p.x_c for p in pairs]))
        (tmp / "pairs.csv").write_text("\n".join(lines) + "\n")


def _cell(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(int(v))


def read_pairs(path):
    """Returns ``(pairs, graph)``."""
    path = Path(path)
    try:
        doc = json.loads((path / "manifest.json").read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"{path} is not a pairs container") from exc
    if doc.get("version") != "pairs-1":
        raise FormatError("unsupported pairs container version")
    graph = CausalGraph.from_dict(doc["graph"])
    n, h, w = doc["n"], doc["height"], doc["width"]
    x_r = read_f32(path / "x_r.f32", n * h * w).reshape(n, h, w)
    x_c = read_f32(path / "x_c.f32", n * h * w).reshape(n, h, w)
    specs = [InterventionSpec(dict(s["targets"]), s["label"]) for s in doc["specs"]]
    rows = (path / "pairs.csv").read_text().splitlines()
    if len(rows) - 1 != n:
        raise FormatError(f"pairs.csv has {len(rows) - 1} rows, manifest says {n}")
    names = graph.names
    kinds = [graph.spec(nm).kind for nm in names]

    def parse(vals):
        return {nm: (float(v) if k == "continuous" else int(v)) for nm, k, v in zip(names, kinds, vals)}

    out = []
    for k, line in enumerate(rows[1:]):
        cells = line.split(",")
        m = len(names)
        out.append(CfPair(x_r[k], x_c[k], parse(cells[3:3 + m]), parse(cells[3 + m:3 + 2 * m]),
                          specs[int(cells[1])], bool(int(cells[2])), int(cells[0])))
    return out, graph
