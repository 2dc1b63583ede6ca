"""Ground-truth image mechanism for the synthetic glyph corpus.

``render`` draws a glyph from raw attributes (thickness ``t`` in px,
intensity ``i``, slant ``s``, label ``l``) and a latent jitter code ``z``;
``measure`` recovers ``t``, ``i`` and ``s`` from pixels. Optional binary
attributes can be drawn as corner marks so binary-attribute graphs have a
visible image mechanism too.

Coordinates are pixel units with the origin at the top-left corner and ``y``
growing downwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import BlankImageError, DimensionError, OutOfRangeError

# Every glyph is mirror-symmetric about the vertical centre line, so its
# unsheared second-order cross moment vanishes and the moment-based slant
# estimate measures the applied shear rather than the glyph's own tilt.
SKELETONS: dict[int, tuple[tuple[tuple[float, float], ...], ...]] = {
    0: (((0.50, 0.25), (0.50, 0.75)),),                            # vertical bar
    1: (((0.32, 0.25), (0.68, 0.75)), ((0.68, 0.25), (0.32, 0.75))),  # diagonal cross
    2: (((0.50, 0.25), (0.50, 0.75)), ((0.30, 0.50), (0.70, 0.50))),  # plus cross
    3: (((0.32, 0.25), (0.50, 0.75), (0.68, 0.25)),),              # chevron
}
GLYPH_NAMES = {0: "bar", 1: "diagonal_cross", 2: "plus", 3: "chevron"}

# corner marks for binary attributes: (row0, col0), 3x3 px, value 1
MARK_SIZE = 3
MARK_CORNERS = ((0, 0), (0, 25), (25, 0), (25, 25))

# Thickness calibration: t_hat = THICKNESS_GAIN * mean(EDT over foreground).
# Fitted by tools/calibrate_renderer.py (least squares through the origin,
# seed 20240101, 2000 renders) and frozen here.
THICKNESS_GAIN = 2.373414245879853


@dataclass(frozen=True)
class RenderParams:
    width: int = 28
    height: int = 28
    thickness_range: tuple[float, float] = (1.0, 5.0)
    intensity_range: tuple[float, float] = (0.3, 1.0)
    slant_range: tuple[float, float] = (-1.0, 1.0)
    shear_gain: float = 0.5
    jitter_amp: float = 0.5
    latent_dim: int = 4
    supersample: int = 4
    skeletons: dict = field(default_factory=lambda: SKELETONS)
    thickness_gain: float = THICKNESS_GAIN
    marks: tuple[str, ...] = ()

    @property
    def n_labels(self) -> int:
        return len(self.skeletons)


DEFAULT_PARAMS = RenderParams()


def _in_range(name, value, rng_):
    lo, hi = rng_
    if not lo <= value <= hi:
        raise OutOfRangeError(f"{name}={value} outside [{lo}, {hi}]")


def glyph_segments(label: int, z, params: RenderParams = DEFAULT_PARAMS) -> np.ndarray:
    """Jittered skeleton segments ``(ax, ay, bx, by)`` in unsheared pixel coordinates.

    Control point ``j`` moves by ``jitter_amp * tanh(z[2j mod m], z[2j+1 mod m])``.
    """
    z = np.asarray(z, dtype=np.float64)
    m = params.latent_dim
    jit = params.jitter_amp * np.tanh(z)
    w, h = params.width, params.height
    segs = []
    j = 0
    for stroke in params.skeletons[int(label)]:
        pts = []
        for x, y in stroke:
            pts.append((x * w + jit[(2 * j) % m], y * h + jit[(2 * j + 1) % m]))
            j += 1
        for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
            segs.append((ax, ay, bx, by))
    return np.array(segs, dtype=np.float64)


def render(a_raw, z, params: RenderParams = DEFAULT_PARAMS) -> np.ndarray:
    """Render one glyph. ``a_raw`` maps ``t``, ``i``, ``s``, ``l`` (raw units).

    Pixel value = intensity * fraction of the pixel's subsamples covered by
    disks of diameter ``t`` stamped along the skeleton; the stamped glyph is
    then sheared about the canvas centre row, ``x' = x + s * k * (y - cy)``.
    Returns float32 (H, W).
    """
    t, i, s, l = float(a_raw["t"]), float(a_raw["i"]), float(a_raw["s"]), a_raw["l"]
    _in_range("t", t, params.thickness_range)
    _in_range("i", i, params.intensity_range)
    _in_range("s", s, params.slant_range)
    if int(l) != l or int(l) not in params.skeletons:
        raise OutOfRangeError(f"l={l} is not a glyph label")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (params.latent_dim,):
        raise DimensionError(f"z must have length {params.latent_dim}")
    ss = params.supersample
    counts = np.zeros((params.height, params.width), dtype=np.int32)
    kernels.render_coverage(glyph_segments(int(l), z, params), t / 2.0, ss,
                           s * params.shear_gain, params.height / 2.0, counts)
    img = i * (counts / float(ss * ss))
    for k, name in enumerate(params.marks):
        if int(a_raw.get(name, 0)) == 1:
            r0, c0 = MARK_CORNERS[k]
            img[r0:r0 + MARK_SIZE, c0:c0 + MARK_SIZE] = 1.0
    return img.astype(np.float32)


def foreground(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    peak = x.max() if x.size else 0.0
    if not peak > 0:
        raise BlankImageError("image has no positive pixels")
    return x >= 0.5 * peak


def measure(x: np.ndarray, params: RenderParams = DEFAULT_PARAMS) -> dict:
    """Estimate raw ``t``, ``i``, ``s`` from pixels (binarized at half the max)."""
    x = np.asarray(x, dtype=np.float64)
    fg = foreground(x)
    if not fg.any():
        raise BlankImageError("empty foreground")
    intensity = float(x[fg].mean())
    edt = ndimage.distance_transform_edt(fg)
    thickness = params.thickness_gain * float(edt[fg].mean())
    rows, cols = np.nonzero(fg)
    yc = rows - rows.mean()
    xc = cols - cols.mean()
    mu02 = float(np.sum(yc * yc))
    mu11 = float(np.sum(xc * yc))
    slant = (mu11 / mu02) / params.shear_gain if mu02 > 0 else 0.0
    return {"t": thickness, "i": intensity, "s": slant}


def mean_edt(x: np.ndarray) -> float:
    fg = foreground(x)
    return float(ndimage.distance_transform_edt(fg)[fg].mean())


def flip_horizontal(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x)[:, ::-1])


def adjust_brightness(x: np.ndarray, factor: float = 1.25) -> np.ndarray:
    if not factor > 0:
        raise OutOfRangeError("brightness factor must be positive")
    x = np.asarray(x)
    return np.clip(x * np.asarray(factor, dtype=x.dtype), 0.0, 1.0).astype(x.dtype)


def to_pgm(x: np.ndarray) -> bytes:
    """8-bit binary PGM (P5, maxval 255)."""
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape
    data = np.round(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode("ascii") + data.tobytes()


def from_pgm(blob: bytes) -> np.ndarray:
    parts = blob.split(b"\n", 3)
    if parts[0] != b"P5" or parts[2] != b"255":
        raise ValueError("not an 8-bit P5 PGM")
    w, h = (int(v) for v in parts[1].split())
    data = np.frombuffer(parts[3], dtype=np.uint8, count=w * h)
    return (data.reshape(h, w) / 255.0).astype(np.float32)


# ---------------------------------------------------------------------------
# calibration


def calibration_corpus(n: int, seed: int, params: RenderParams = DEFAULT_PARAMS):
    """Seeded renders with attributes drawn independently and uniformly over
    their raw ranges; returns ``(attrs, z, images)``."""
    from .rng import Rng

    rng = Rng(seed)
    t = rng.uniform(n, *params.thickness_range)
    i = rng.uniform(n, *params.intensity_range)
    s = rng.uniform(n, *params.slant_range)
    lab = rng.integers(n, params.n_labels)
    z = rng.normal(n * params.latent_dim).reshape(n, params.latent_dim)
    attrs = [{"t": float(t[k]), "i": float(i[k]), "s": float(s[k]), "l": int(lab[k])} for k in range(n)]
    images = np.stack([render(a, z[k], params) for k, a in enumerate(attrs)])
    return attrs, z, images


def fit_thickness_gain(attrs, images) -> float:
    """Least-squares gain through the origin mapping mean EDT to thickness."""
    e = np.array([mean_edt(x) for x in images])
    t = np.array([a["t"] for a in attrs])
    return float(np.dot(e, t) / np.dot(e, e))


def roundtrip_errors(attrs, images, params: RenderParams = DEFAULT_PARAMS) -> dict:
    """Absolute measurement error per attribute for every image."""
    errs = {"t": [], "i": [], "s": []}
    for a, x in zip(attrs, images):
        m = measure(x, params)
        for k in errs:
            errs[k].append(abs(m[k] - a[k]))
    return {k: np.array(v) for k, v in errs.items()}


CALIBRATION_SEED = 20240101
ROUNDTRIP_SEED = 20240202
# Median |measured - true| over the 1000-render round-trip corpus, frozen by
# tools/calibrate_renderer.py before any counterfactual test ran.
ROUNDTRIP_MEDIANS = {"t": 0.4915624593506267, "i": 0.06303833735095282, "s": 0.05549939723501221}
TOLERANCE_FACTOR = 1.5
MEASUREMENT_TOLERANCES = {k: TOLERANCE_FACTOR * v for k, v in ROUNDTRIP_MEDIANS.items()}
