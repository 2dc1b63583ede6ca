"""Encoder/generator pair: E maps (image, attributes) to a latent code and G maps
(latent, attributes) back to an image.

The learned codec is a deterministic conditional autoencoder trained with
image-space and latent-space cycle losses. ``OracleCodec`` pairs the true
renderer with stored latents and realizes exact inversion.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, render_scaled
from .errors import ConfigError, DimensionError, FormatError, UnknownRowError
from .fileio import atomic_directory
from .graph import CausalGraph
from .nn import Adam, NeuralNet, iterate_minibatches
from .renderer import RenderParams
from .rng import Rng


def schema_hash(graph: CausalGraph) -> str:
    return hashlib.sha256(graph.to_json().encode("utf-8")).hexdigest()


class AttributeEncoder:
    """Scaled continuous values, one-hot categoricals and raw binaries, in graph order."""

    def __init__(self, graph: CausalGraph):
        self.graph = graph
        self.dim = sum(s.cardinality if s.kind == "categorical" else 1 for s in graph.attributes)

    def encode_table(self, table) -> np.ndarray:
        cols = []
        for s in self.graph.attributes:
            v = np.asarray(table[s.name])
            if s.kind == "categorical":
                cols.append(np.eye(s.cardinality)[v.astype(np.int64)])
            else:
                cols.append(v.astype(np.float64)[:, None])
        return np.concatenate(cols, axis=1)

    def encode_rows(self, rows) -> np.ndarray:
        return self.encode_table({n: np.array([r[n] for r in rows]) for n in self.graph.names})


def _as_batch(x) -> np.ndarray:
    x = np.asarray(x)
    return x[None] if x.ndim == 2 else x


def _as_rows(a) -> list:
    return [a] if isinstance(a, dict) else list(a)


LATENT_TARGETS = ("data", "prior", "both")
DEFAULT_LATENT_DIM = 8


@dataclass
class CodecConfig:
    latent_dim: int | None = None  # None: match the stored latents (data targets) or 8
    encoder_hidden: tuple[int, ...] = (256, 128)
    generator_hidden: tuple[int, ...] = (256, 512)
    epochs: int = 50
    finetune_epochs: int = 20
    batch: int = 128
    lambda_z: float = 0.1
    latent_target: str = "data"
    lr: float = 1e-3
    seed: int = 0

    def validate(self) -> None:
        if self.epochs <= 0 or self.batch <= 0 or self.finetune_epochs < 0:
            raise ConfigError("epochs and batch must be positive (finetune_epochs >= 0)")
        if (self.latent_dim is not None and self.latent_dim <= 0) or not self.lr > 0 or self.lambda_z < 0:
            raise ConfigError("latent_dim and lr must be positive, lambda_z >= 0")
        if self.latent_target not in LATENT_TARGETS:
            raise ConfigError(f"latent_target must be one of {LATENT_TARGETS}")

    @classmethod
    def from_dict(cls, doc: dict) -> "CodecConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown codec config keys: {sorted(extra)}")
        doc = dict(doc)
        for k in ("encoder_hidden", "generator_hidden"):
            if k in doc:
                doc[k] = tuple(doc[k])
        return cls(**doc)


@dataclass
class Codec:
    encoder: NeuralNet
    generator: NeuralNet
    graph: CausalGraph
    height: int
    width: int
    log: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.attrs = AttributeEncoder(self.graph)
        npix = self.height * self.width
        if self.encoder.in_dim != npix + self.attrs.dim or self.generator.out_dim != npix:
            raise DimensionError("networks do not match image size and attribute encoding")
        if self.generator.in_dim != self.encoder.out_dim + self.attrs.dim:
            raise DimensionError("encoder output does not match generator latent input")

    @property
    def latent_dim(self) -> int:
        return self.encoder.out_dim

    def encode(self, x, a) -> np.ndarray:
        x = _as_batch(x)
        if x.shape[1:] != (self.height, self.width):
            raise DimensionError(f"image shape {x.shape[1:]} != {(self.height, self.width)}")
        rows = _as_rows(a)
        if len(rows) != len(x):
            raise DimensionError("one attribute vector per image required")
        inp = np.concatenate([x.reshape(len(x), -1).astype(np.float64), self.attrs.encode_rows(rows)], axis=1)
        return self.encoder(inp)

    def decode(self, z, a) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        rows = _as_rows(a)
        if z.shape != (len(rows), self.latent_dim):
            raise DimensionError(f"latent batch shape {z.shape} does not match {len(rows)} x {self.latent_dim}")
        out = self.generator(np.concatenate([z, self.attrs.encode_rows(rows)], axis=1))
        return out.reshape(len(rows), self.height, self.width).astype(np.float32)

    def prior(self, n: int, rng: Rng) -> np.ndarray:
        return rng.normal(n * self.latent_dim).reshape(n, self.latent_dim)

    def save(self, path) -> None:
        header = {
            "version": "codec-1",
            "latent_dim": self.latent_dim,
            "height": self.height,
            "width": self.width,
            "schema_hash": schema_hash(self.graph),
            "graph": self.graph.to_dict(),
            "encoder": "encoder.json",
            "generator": "generator.json",
        }
        with atomic_directory(path) as tmp:
            (tmp / "codec.json").write_text(json.dumps(header, indent=2) + "\n")
            (tmp / "encoder.json").write_text(self.encoder.to_json())
            (tmp / "generator.json").write_text(self.generator.to_json())
            if self.log:
                (tmp / "train_log.json").write_text(json.dumps(self.log, indent=1) + "\n")

    @classmethod
    def load(cls, path, graph: CausalGraph | None = None) -> "Codec":
        path = Path(path)
        header = json.loads((path / "codec.json").read_text())
        if header.get("version") != "codec-1":
            raise FormatError("unsupported codec version")
        g = CausalGraph.from_dict(header["graph"])
        if graph is not None and schema_hash(graph) != header["schema_hash"]:
            raise FormatError("codec was trained on a different attribute schema")
        enc = NeuralNet.from_json((path / header["encoder"]).read_text())
        gen = NeuralNet.from_json((path / header["generator"]).read_text())
        return cls(enc, gen, g, header["height"], header["width"])


class OracleCodec:
    """Exact inversion: G is the true renderer and E returns the true latent.

    E looks latents up by image bytes, covering the dataset's images and every
    image this codec has generated.
    """

    def __init__(self, dataset: Dataset, params: RenderParams | None = None):
        if dataset.latents is None:
            raise ConfigError("oracle codec needs a dataset with stored latents")
        self.graph = dataset.graph
        self.params = params or dataset.params
        self.height, self.width = self.params.height, self.params.width
        self.latent_dim = dataset.latents.shape[1]
        self._memo = {}
        for k in range(dataset.n):
            self._memo[dataset.images[k].tobytes()] = dataset.latents[k]

    def encode(self, x, a) -> np.ndarray:
        x = _as_batch(np.asarray(x, dtype=np.float32))
        out = np.empty((len(x), self.latent_dim), dtype=np.float32)
        for k, img in enumerate(x):
            try:
                out[k] = self._memo[img.tobytes()]
            except KeyError:
                raise UnknownRowError("image is not a dataset row or an oracle-generated image") from None
        return out

    def decode(self, z, a) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float32))
        rows = _as_rows(a)
        if z.shape != (len(rows), self.latent_dim):
            raise DimensionError("latent batch does not match attribute rows")
        out = np.stack([render_scaled(self.graph, r, zk, self.params) for r, zk in zip(rows, z)])
        for img, zk in zip(out, z):
            self._memo.setdefault(img.tobytes(), zk.copy())
        return out

    def prior(self, n: int, rng: Rng) -> np.ndarray:
        return rng.normal(n * self.latent_dim).reshape(n, self.latent_dim).astype(np.float32)


def oracle_codec(dataset: Dataset, params: RenderParams | None = None) -> OracleCodec:
    return OracleCodec(dataset, params)


# ---------------------------------------------------------------------------
# training


def _cycle_step(E: NeuralNet, G: NeuralNet, X, A, z_true, zp, lambda_z: float, target: str,
                train_generator: bool):
    """Losses and gradients of ``L_x + lambda_z * L_z`` for one batch.

    ``L_x`` is the mean squared pixel error and ``L_z`` the mean absolute
    latent error, both averaged over batch and dimensions. ``L_z`` compares
    against the stored latents the images were rendered from (``data``),
    against prior draws pushed through G and back (``prior``), or the sum of
    both.
    """
    B, m = zp.shape
    D = X.shape[1]
    z, cE = E.forward(np.concatenate([X, A], axis=1))
    xr, cG = G.forward(np.concatenate([z, A], axis=1))
    diff = xr - X
    lx = float(np.sum(diff * diff)) / (B * D)
    gG, gin = G.backward(cG, 2.0 * diff / (B * D))
    gz = gin[:, :m]
    lz = 0.0
    if lambda_z > 0 and target in ("data", "both"):
        dz = z - z_true
        lz += float(np.sum(np.abs(dz))) / (B * m)
        gz = gz + lambda_z * np.sign(dz) / (B * m)
    gE, _ = E.backward(cE, gz)
    if lambda_z > 0 and target in ("prior", "both"):
        xg, cG2 = G.forward(np.concatenate([zp, A], axis=1))
        zr, cE2 = E.forward(np.concatenate([xg, A], axis=1))
        dz = zr - zp
        lz += float(np.sum(np.abs(dz))) / (B * m)
        gE2, gin2 = E.backward(cE2, lambda_z * np.sign(dz) / (B * m))
        gE = [a + b for a, b in zip(gE, gE2)]
        if train_generator:
            gG2, _ = G.backward(cG2, gin2[:, :X.shape[1]])
            gG = [a + b for a, b in zip(gG, gG2)]
    return lx, lz, gE, gG


def train_codec(data: Dataset, config: CodecConfig | None = None, progress=None) -> Codec:
    """Phase 1 trains E and G jointly; phase 2 freezes G and fine-tunes E."""
    config = config or CodecConfig()
    config.validate()
    if data.n == 0:
        raise ConfigError("empty dataset")
    uses_data = config.latent_target in ("data", "both")
    if uses_data and data.latents is None:
        raise ConfigError("latent_target needs a dataset with stored latents")
    m = config.latent_dim
    if m is None:
        m = data.latents.shape[1] if uses_data else DEFAULT_LATENT_DIM
    if uses_data and m != data.latents.shape[1]:
        raise ConfigError(f"latent_dim {m} differs from the stored latents ({data.latents.shape[1]})")
    h, w = data.images.shape[1:]
    attrs = AttributeEncoder(data.graph)
    rng = Rng(config.seed)
    E = NeuralNet.build([h * w + attrs.dim, *config.encoder_hidden, m],
                        ["leaky_relu"] * len(config.encoder_hidden) + ["linear"], rng.spawn(1))
    G = NeuralNet.build([m + attrs.dim, *config.generator_hidden, h * w],
                        ["leaky_relu"] * len(config.generator_hidden) + ["sigmoid"], rng.spawn(2))
    X_all = data.images.reshape(data.n, -1).astype(np.float64)
    A_all = attrs.encode_table(data.table)
    Z_all = data.latents.astype(np.float64) if uses_data else np.zeros((data.n, m))
    opt_E = Adam(E.params(), lr=config.lr)
    opt_G = Adam(G.params(), lr=config.lr)
    batch_rng, prior_rng = rng.spawn(3), rng.spawn(4)
    log = []
    phases = [("joint", config.epochs), ("finetune", config.finetune_epochs)]
    for phase, epochs in phases:
        joint = phase == "joint"
        for epoch in range(epochs):
            sums = np.zeros(2)
            for idx in iterate_minibatches(data.n, config.batch, batch_rng):
                zp = prior_rng.normal(len(idx) * m).reshape(len(idx), m)
                lx, lz, gE, gG = _cycle_step(E, G, X_all[idx], A_all[idx], Z_all[idx], zp,
                                        config.lambda_z, config.latent_target, joint)
                opt_E.step(E.params(), gE)
                if joint:
                    opt_G.step(G.params(), gG)
                sums += np.array([lx, lz]) * len(idx)
            if not (E.all_finite() and G.all_finite()):
                raise FloatingPointError(f"non-finite parameters in {phase} epoch {epoch}")
            lx, lz = sums / data.n
            rec = {"phase": phase, "epoch": epoch, "loss_x": lx, "loss_z": lz,
                   "loss": lx + config.lambda_z * lz}
            log.append(rec)
            if progress:
                progress(rec)
    return Codec(E, G, data.graph, h, w, log)


def reconstruct(codec, x, a) -> np.ndarray:
    """``x_r = G(E(x, a), a)``."""
    single = np.asarray(x).ndim == 2
    out = codec.decode(codec.encode(x, a), a)
    return out[0] if single else out


def codec_metrics(codec, data: Dataset, seed: int = 0, batch: int = 500) -> dict:
    """Reconstruction MSE, latent MAE against the stored latents, and prior-cycle MAE.

    ``mae_z`` compares ``E(x, a)`` with the latents the images were rendered
    from (``nan`` when the dataset stores none); ``mae_z_cycle`` compares
    prior draws ``z`` with ``E(G(z, a), a)``.
    """
    rows = data.rows()
    rng = Rng(seed)
    se, ae, ce = [], [], []
    for start in range(0, data.n, batch):
        r = rows[start:start + batch]
        x = data.images[start:start + batch]
        z_hat = codec.encode(x, r)
        xr = codec.decode(z_hat, r).astype(np.float64)
        se.append(np.mean((xr - x) ** 2, axis=(1, 2)))
        if data.latents is not None:
            z_true = data.latents[start:start + batch].astype(np.float64)
            ae.append(np.mean(np.abs(np.asarray(z_hat, np.float64) - z_true), axis=1))
        z = codec.prior(len(r), rng)
        zr = codec.encode(codec.decode(z, r), r)
        ce.append(np.mean(np.abs(np.asarray(zr, np.float64) - z), axis=1))
    return {
        "mse_x": float(np.mean(np.concatenate(se))),
        "mae_z": float(np.mean(np.concatenate(ae))) if ae else float("nan"),
        "mae_z_cycle": float(np.mean(np.concatenate(ce))),
    }


def interpolate(codec, z1, z2, a, steps: int) -> list[np.ndarray]:
    """Frames ``G((1 - tau) z1 + tau z2, a)`` for ``tau = 0, 1/(steps-1), ..., 1``."""
    if steps < 2:
        raise ConfigError("interpolation needs at least 2 steps")
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    frames = []
    for k in range(steps):
        tau = k / (steps - 1)
        z = (1.0 - tau) * z1 + tau * z2
        frames.append(codec.decode(z[None], [a])[0])
    return frames


def config_dict(config: CodecConfig) -> dict:
    return asdict(config)
