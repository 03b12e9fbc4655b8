"""Shared containers, RNG streams and the raw+JSON grid file format.

Images, coil maps and Cartesian k-space are plain ``complex128`` numpy arrays
of shape ``(H, W)`` indexed ``(row, col) <-> (y, x)``. Stacks of coil maps use
shape ``(c, H, W)``. :func:`as_grid` is the single validation point.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

SEMANTICS = ("image", "csm", "mask", "measurements", "csm-coeffs")


class FormatError(ValueError):
    """Raised when a grid file pair is malformed or unsupported."""


def as_grid(data, ndim: int | None = 2, name: str = "grid") -> np.ndarray:
    """Return ``data`` as a C-contiguous complex128 array, validating shape and finiteness."""
    arr = np.asarray(data)
    if arr.dtype == np.complex64 or arr.dtype == np.float32:
        raise TypeError(f"{name}: single precision is not supported")
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name}: expected {ndim}-D array, got shape {arr.shape}")
    if any(s <= 0 for s in arr.shape):
        raise ValueError(f"{name}: empty dimension in shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Measurements:
    """Per-coil k-space samples, shape ``(num_coils, m)``, in acquisition-plan order."""

    samples: np.ndarray

    def __post_init__(self):
        s = as_grid(self.samples, ndim=2, name="measurements")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def num_coils(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)


def samples_of(y) -> np.ndarray:
    """Accept either :class:`Measurements` or a raw ``(c, m)`` array."""
    if isinstance(y, Measurements):
        return y.samples
    return as_grid(y, ndim=2, name="measurements")


# --- RNG -------------------------------------------------------------------

def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator for ``seed`` and an optional sub-stream key.

    Distinct ``stream`` tuples give statistically independent streams, so each
    parameter block of a sampler can own one and stay reproducible on its own.
    """
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, shape, scale: float = 1.0) -> np.ndarray:
    """Complex normal samples with per-component standard deviation ``scale``."""
    out = rng.standard_normal(tuple(shape) + (2,))
    return scale * (out[..., 0] + 1j * out[..., 1])


# --- file format -------------------------------------------------------------

def _pair(path) -> tuple[Path, Path]:
    p = Path(path)
    name = p.name
    for suffix in (".hdr.json", ".bin"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    return p.with_name(name + ".hdr.json"), p.with_name(name + ".bin")


def save_grid(grid, path, semantic: str = "image", **extra: Any) -> None:
    """Write ``<path>.hdr.json`` and ``<path>.bin`` (interleaved little-endian complex128).

    ``extra`` keys are stored verbatim in the header (must be JSON-serializable).
    """
    arr = as_grid(grid, ndim=None)
    if semantic not in SEMANTICS:
        raise ValueError(f"unknown semantic {semantic!r}; expected one of {SEMANTICS}")
    hdr_path, bin_path = _pair(path)
    header = {
        "shape": list(arr.shape),
        "dtype": "complex128",
        "order": "little-endian",
        "layout": "row-major",
        "semantic": semantic,
    }
    for key in extra:
        if key in header:
            raise ValueError(f"extra header key {key!r} collides with a reserved key")
    header.update(extra)
    try:
        bin_path.write_bytes(arr.astype("<c16").tobytes(order="C"))
        hdr_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"failed to write grid to {hdr_path.parent / hdr_path.name}: {exc}") from exc


def read_header(path) -> dict:
    hdr_path, _ = _pair(path)
    if not hdr_path.exists():
        raise FormatError(f"missing header {hdr_path}")
    try:
        return json.loads(hdr_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{hdr_path}: invalid JSON header: {exc}") from exc


def load_grid(path, with_header: bool = False):
    """Read a grid written by :func:`save_grid`; optionally also return the header dict."""
    header = read_header(path)
    _, bin_path = _pair(path)
    if header.get("dtype") != "complex128":
        raise FormatError(f"{bin_path}: unsupported dtype {header.get('dtype')!r}")
    if header.get("order") != "little-endian":
        raise FormatError(f"{bin_path}: unsupported byte order {header.get('order')!r}")
    if header.get("layout", "row-major") != "row-major":
        raise FormatError(f"{bin_path}: unsupported layout {header.get('layout')!r}")
    shape = header.get("shape")
    if not isinstance(shape, list) or not shape or not all(isinstance(s, int) and s > 0 for s in shape):
        raise FormatError(f"{bin_path}: invalid shape {shape!r}")
    if not bin_path.exists():
        raise FormatError(f"missing payload {bin_path}")
    payload = bin_path.read_bytes()
    expected = 16 * int(np.prod(shape))
    if len(payload) != expected:
        raise FormatError(
            f"{bin_path}: payload has {len(payload)} bytes, header shape {shape} needs {expected}"
        )
    arr = np.frombuffer(payload, dtype="<c16").astype(np.complex128).reshape(shape)
    return (arr, header) if with_header else arr


def thread_limit() -> int | None:
    """Parallelism cap from ``JSMOCO_THREADS`` (None when unset)."""
    raw = os.environ.get("JSMOCO_THREADS")
    if not raw:
        return None
    n = int(raw)
    if n < 1:
        raise ValueError("JSMOCO_THREADS must be >= 1")
    return n
