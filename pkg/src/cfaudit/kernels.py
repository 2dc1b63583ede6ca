"""Kernel selection: compiled Cython core when available, Python otherwise."""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("CFAUDIT_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

xoshiro_u64 = _impl.xoshiro_u64
xoshiro_uniform = _impl.xoshiro_uniform
xoshiro_normal = _impl.xoshiro_normal
render_coverage = _impl.render_coverage

__all__ = [
    "BACKEND",
    "xoshiro_u64",
    "xoshiro_uniform",
    "xoshiro_normal",
    "render_coverage",
]
