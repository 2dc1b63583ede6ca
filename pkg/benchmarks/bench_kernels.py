"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on identical inputs under both backends; outputs are checked
for bitwise equality before timings are reported.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from cfaudit import _pykernels
from cfaudit.renderer import DEFAULT_PARAMS, glyph_segments

try:
    from cfaudit import _kernels
except ImportError:
    _kernels = None

SEED_STATE = np.array([0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9, 0x94D049BB133111EB, 0x2545F4914F6CDD1D],
                      dtype=np.uint64)


def _stream_case(name, n, dtype):
    def run(mod):
        state = SEED_STATE.copy()
        out = np.empty(n, dtype=dtype)
        getattr(mod, name)(state, out)
        return out
    return run


def _render_case(n_glyphs):
    rng = np.random.default_rng(0)
    cases = []
    for k in range(n_glyphs):
        z = rng.standard_normal(DEFAULT_PARAMS.latent_dim)
        seg = np.ascontiguousarray(glyph_segments(k % DEFAULT_PARAMS.n_labels, z, DEFAULT_PARAMS))
        cases.append((seg, float(rng.uniform(0.5, 2.5)), float(rng.uniform(-0.5, 0.5))))

    def run(mod):
        outs = []
        for seg, radius, shear in cases:
            counts = np.zeros((DEFAULT_PARAMS.height, DEFAULT_PARAMS.width), dtype=np.int32)
            mod.render_coverage(seg, radius, DEFAULT_PARAMS.supersample, shear, DEFAULT_PARAMS.height / 2.0, counts)
            outs.append(counts)
        return np.stack(outs)
    return run


CASES = [
    ("xoshiro_u64 x 100k", _stream_case("xoshiro_u64", 100_000, np.uint64)),
    ("xoshiro_uniform x 100k", _stream_case("xoshiro_uniform", 100_000, np.float64)),
    ("xoshiro_normal x 100k", _stream_case("xoshiro_normal", 100_000, np.float64)),
    ("render_coverage x 200 glyphs", _render_case(200)),
]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the Python backend is available", file=sys.stderr)
        return 1
    print(f"{'kernel':32s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s}  outputs")
    for label, run in CASES:
        same = run(_kernels).tobytes() == run(_pykernels).tobytes()
        t_c = min(timeit.repeat(lambda: run(_kernels), number=1, repeat=args.repeat))
        t_p = min(timeit.repeat(lambda: run(_pykernels), number=1, repeat=args.repeat))
        print(f"{label:32s} {1e3 * t_c:10.2f} {1e3 * t_p:10.2f} {t_p / t_c:8.1f}x  {'identical' if same else 'DIFFER'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
