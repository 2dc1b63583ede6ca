"""Atomic output helpers: write to a temporary sibling, rename on success."""

from __future__ import annotations

import contextlib
import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path, doc) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


@contextlib.contextmanager
def atomic_directory(path):
    """Yield a temporary directory that replaces ``path`` only if the block succeeds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp"))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if path.exists():
        shutil.rmtree(path) if path.is_dir() else path.unlink()
    os.replace(tmp, path)


def write_f32(path, arr) -> None:
    Path(path).write_bytes(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_f32(path, count: int):
    data = Path(path).read_bytes()
    if len(data) != 4 * count:
        raise FormatError(f"{Path(path).name}: expected {4 * count} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f4").astype(np.float32)
