"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Selected automatically when the extension is not built, or forced with
``CFAUDIT_PURE_PYTHON=1``. Output is bit-identical to the compiled path.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_TWO_PI = 6.283185307179586
_INV_2_53 = 1.0 / 9007199254740992.0


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


def _stream(state: np.ndarray, n: int) -> list[int]:
    s0, s1, s2, s3 = (int(v) for v in state)
    out = []
    for _ in range(n):
        out.append((_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK)
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
    state[:] = np.array([s0, s1, s2, s3], dtype=np.uint64)
    return out


def xoshiro_u64(state: np.ndarray, out: np.ndarray) -> None:
    out[:] = np.array(_stream(state, out.shape[0]), dtype=np.uint64)


def xoshiro_uniform(state: np.ndarray, out: np.ndarray) -> None:
    raw = _stream(state, out.shape[0])
    out[:] = [(x >> 11) * _INV_2_53 for x in raw]


def xoshiro_normal(state: np.ndarray, out: np.ndarray) -> None:
    n = out.shape[0]
    raw = _stream(state, 2 * ((n + 1) // 2))
    vals = []
    for k in range(0, len(raw), 2):
        ua = (raw[k] >> 11) * _INV_2_53
        ub = (raw[k + 1] >> 11) * _INV_2_53
        r = math.sqrt(-2.0 * math.log(1.0 - ua))
        theta = _TWO_PI * ub
        vals.append(r * math.cos(theta))
        vals.append(r * math.sin(theta))
    out[:] = vals[:n]


def render_coverage(segments: np.ndarray, radius: float, ss: int, shear: float, cy: float,
                    counts: np.ndarray) -> None:
    h, w = counts.shape
    sub = (np.arange(ss, dtype=np.float64) + 0.5) / ss
    py = (np.arange(h, dtype=np.float64)[:, None] + sub[None, :]).reshape(-1)[:, None]
    px = (np.arange(w, dtype=np.float64)[:, None] + sub[None, :]).reshape(-1)[None, :]
    # canvas points mapped back into the unsheared glyph frame
    px = px - shear * (py - cy)
    r2 = radius * radius
    inside = np.zeros((h * ss, w * ss), dtype=bool)
    for ax, ay, bx, by in segments:
        dx = bx - ax
        dy = by - ay
        l2 = dx * dx + dy * dy
        if l2 > 0.0:
            t = np.clip(((px - ax) * dx + (py - ay) * dy) / l2, 0.0, 1.0)
        else:
            t = np.zeros_like(px * py)
        ex = px - (ax + t * dx)
        ey = py - (ay + t * dy)
        inside |= ex * ex + ey * ey <= r2
    counts[:] = inside.reshape(h, ss, w, ss).sum(axis=(1, 3))
