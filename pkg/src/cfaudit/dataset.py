"""Synthetic glyph corpora: ground-truth models, generation and the on-disk container.

Container layout (a directory):

* ``manifest.json`` -- version ``cfg-1``, dims, graph schema, scaling, seed
* ``images.f32``    -- n*H*W little-endian float32, row-major
* ``attributes.csv`` -- raw attribute values, header = attribute names
* ``latents.f32``   -- n*m float32 renderer latents (when ``stored_z``)
* ``labels.csv``    -- label columns (e.g. the planted target ``y``)

Continuous attributes are kept in scaled units in memory. The scaled value of
a row is always ``scale(raw)`` of the stored raw value, and images are rendered
from ``unscale(scaled)``, so re-rendering a loaded row reproduces its pixels.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classifier import LabelRule, assign_labels
from .errors import FormatError, SchemaError
from .fileio import atomic_directory, read_f32, write_f32
from .graph import AttributeSpec, CausalGraph, build_graph
from .renderer import DEFAULT_PARAMS, RenderParams, render
from .rng import Rng
from .scm import BinaryCPT, CategoricalCPT, LinearGaussian, StructuralModel, UniformRoot, scale, simulate, unscale

# Ground-truth intensity equation (scaled units): i = 0.25 + 0.60 t + N(0, 0.05).
# The intercept puts the planted label's prevalence near one half.
GLYPH_INTERCEPT = 0.25
GLYPH_SLOPE = 0.60
GLYPH_NOISE = 0.05

# Binary chain attached to the glyph graph: young -> {gray, glasses}, gray -> receding.
CHAIN_CPTS = {
    "young": ((), (0.5,)),
    "gray": (("young",), (0.6, 0.1)),
    "glasses": (("young",), (0.5, 0.2)),
    "receding": (("gray",), (0.15, 0.7)),
}


def glyph_specs(params: RenderParams = DEFAULT_PARAMS) -> list[AttributeSpec]:
    return [
        AttributeSpec("t", "continuous", raw_range=params.thickness_range),
        AttributeSpec("i", "continuous", raw_range=params.intensity_range, parents=("t",)),
        AttributeSpec("s", "continuous", raw_range=params.slant_range),
        AttributeSpec("l", "categorical", cardinality=params.n_labels),
    ]


def glyph_model(params: RenderParams = DEFAULT_PARAMS, intercept: float = GLYPH_INTERCEPT,
                slope: float = GLYPH_SLOPE, noise_std: float = GLYPH_NOISE) -> StructuralModel:
    """t, s ~ Uniform over their ranges; i linear-Gaussian in t; l uniform over glyphs."""
    graph = build_graph(glyph_specs(params))
    k = params.n_labels
    return StructuralModel(graph, {
        "t": UniformRoot(),
        "i": LinearGaussian(("t",), intercept, (slope,), noise_std),
        "s": UniformRoot(),
        "l": CategoricalCPT((), (), (tuple([1.0 / k] * k),)),
    })


def chain_model(params: RenderParams = DEFAULT_PARAMS) -> StructuralModel:
    """Glyph model plus the binary chain; binaries render as corner marks."""
    base = glyph_model(params)
    specs = glyph_specs(params) + [AttributeSpec(n, "binary", parents=p) for n, (p, _) in CHAIN_CPTS.items()]
    graph = build_graph(specs)
    eqs = dict(base.equations)
    for n, (p, table) in CHAIN_CPTS.items():
        eqs[n] = BinaryCPT(p, tuple(2 for _ in p), table)
    return StructuralModel(graph, eqs)


GRAPHS = {"glyph": glyph_model, "chain": chain_model}


def binary_marks(graph: CausalGraph) -> tuple[str, ...]:
    return tuple(s.name for s in graph.attributes if s.kind == "binary")


def raw_row(graph: CausalGraph, a) -> dict:
    return {n: unscale(graph.spec(n), a[n]) for n in graph.names}


def render_scaled(graph: CausalGraph, a, z, params: RenderParams = DEFAULT_PARAMS) -> np.ndarray:
    """Render from a scaled attribute vector."""
    return render(raw_row(graph, a), z, params)


def canonical_table(graph: CausalGraph, table) -> tuple[dict, dict]:
    """``(scaled, raw)`` with scaled recomputed from raw, as a loaded container would."""
    raw = {n: np.asarray(unscale(graph.spec(n), np.asarray(table[n]))) for n in graph.names}
    scaled = {n: np.asarray(scale(graph.spec(n), raw[n])) for n in graph.names}
    return scaled, raw


@dataclass
class Dataset:
    graph: CausalGraph
    table: dict  # scaled columns
    images: np.ndarray  # (n, H, W) float32
    latents: np.ndarray | None = None  # (n, m) float32
    labels: dict = field(default_factory=dict)
    seed: int | None = None
    params: RenderParams = DEFAULT_PARAMS

    def __post_init__(self):
        n = len(self.images)
        for name in self.graph.names:
            if len(self.table[name]) != n:
                raise SchemaError(f"column {name} has {len(self.table[name])} rows, expected {n}")
        if self.latents is not None and len(self.latents) != n:
            raise SchemaError("latent rows do not match images")
        for name, col in self.labels.items():
            if len(col) != n:
                raise SchemaError(f"label column {name} has wrong length")

    @property
    def n(self) -> int:
        return len(self.images)

    def row(self, k: int) -> dict:
        out = {}
        for spec in self.graph.attributes:
            v = self.table[spec.name][k]
            out[spec.name] = float(v) if spec.kind == "continuous" else int(v)
        return out

    def rows(self) -> list[dict]:
        return [self.row(k) for k in range(self.n)]

    def raw_table(self) -> dict:
        return {n: np.asarray(unscale(self.graph.spec(n), self.table[n])) for n in self.graph.names}

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return replace(
            self,
            table={k: np.asarray(v)[idx] for k, v in self.table.items()},
            images=self.images[idx],
            latents=None if self.latents is None else self.latents[idx],
            labels={k: np.asarray(v)[idx] for k, v in self.labels.items()},
        )


def generate(model: StructuralModel, n: int, seed: int, params: RenderParams | None = None,
             rule: LabelRule | None = LabelRule()) -> Dataset:
    """Simulate attributes, draw renderer latents, render, and assign planted labels."""
    if params is None:
        params = replace(DEFAULT_PARAMS, marks=binary_marks(model.graph))
    rng = Rng(seed)
    table, _ = simulate(model, n, rng.spawn(1))
    scaled, _ = canonical_table(model.graph, table)
    z = rng.spawn(2).normal(n * params.latent_dim).reshape(n, params.latent_dim).astype(np.float32)
    ds = Dataset(model.graph, scaled, np.empty((n, params.height, params.width), np.float32), z,
                 seed=seed, params=params)
    for k in range(n):
        ds.images[k] = render_scaled(model.graph, ds.row(k), z[k], params)
    if rule is not None:
        ds.labels["y"] = assign_labels(rule, scaled, model.graph, rng.spawn(3))
    return ds


# ---------------------------------------------------------------------------
# container IO


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(int(v))


def _csv_text(header, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*columns):
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _read_csv(path: Path, n: int) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path.name} is empty")
    if len(rows) - 1 != n:
        raise FormatError(f"{path.name}: {len(rows) - 1} rows, manifest says {n}")
    return rows[0], rows[1:]


def manifest(ds: Dataset) -> dict:
    p = ds.params
    return {
        "version": "cfg-1",
        "width": p.width,
        "height": p.height,
        "n": ds.n,
        "graph": ds.graph.to_dict(),
        "scaling": {s.name: list(s.raw_range) for s in ds.graph.attributes if s.kind == "continuous"},
        "seed": ds.seed,
        "stored_z": ds.latents is not None,
        "latent_dim": None if ds.latents is None else int(ds.latents.shape[1]),
        "marks": list(p.marks),
        "label_columns": list(ds.labels),
    }


def write_dataset(ds: Dataset, path) -> None:
    raw = ds.raw_table()
    names = ds.graph.names
    with atomic_directory(path) as tmp:
        (tmp / "manifest.json").write_text(json.dumps(manifest(ds), indent=2) + "\n")
        write_f32(tmp / "images.f32", ds.images)
        cols = [raw[n].astype(np.float64) if ds.graph.spec(n).kind == "continuous" else raw[n] for n in names]
        (tmp / "attributes.csv").write_text(_csv_text(names, cols))
        if ds.latents is not None:
            write_f32(tmp / "latents.f32", ds.latents)
        (tmp / "labels.csv").write_text(_csv_text(list(ds.labels), [ds.labels[k] for k in ds.labels]))


def read_dataset(path) -> Dataset:
    path = Path(path)
    try:
        doc = json.loads((path / "manifest.json").read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"{path} is not a dataset container (no manifest.json)") from exc
    if doc.get("version") != "cfg-1":
        raise FormatError("unsupported dataset container version")
    graph = CausalGraph.from_dict(doc["graph"])
    n, h, w = doc["n"], doc["height"], doc["width"]
    params = replace(DEFAULT_PARAMS, width=w, height=h, marks=tuple(doc.get("marks", ())))
    images = read_f32(path / "images.f32", n * h * w).reshape(n, h, w)
    header, rows = _read_csv(path / "attributes.csv", n)
    if header != graph.names:
        raise FormatError("attribute columns do not match the graph")
    table = {}
    for j, spec in enumerate(graph.attributes):
        if spec.kind == "continuous":
            table[spec.name] = np.asarray(scale(spec, np.array([float(r[j]) for r in rows])))
        else:
            table[spec.name] = np.array([int(r[j]) for r in rows], dtype=np.int64)
    latents = None
    if doc["stored_z"]:
        m = doc["latent_dim"]
        latents = read_f32(path / "latents.f32", n * m).reshape(n, m)
        params = replace(params, latent_dim=m)
    labels = {}
    header, rows = _read_csv(path / "labels.csv", n)
    for j, name in enumerate(header):
        labels[name] = np.array([int(r[j]) for r in rows], dtype=np.int64)
    return Dataset(graph, table, images, latents, labels, doc.get("seed"), params)
