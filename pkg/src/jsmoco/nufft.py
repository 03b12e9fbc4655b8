"""Centered FFTs, a direct nonuniform DFT oracle, and a Kaiser-Bessel gridding NUFFT.

All transforms use orthonormal ``1/sqrt(H*W)`` scaling and centered pixel
coordinates (origin at ``(H // 2, W // 2)``). Frequencies are radians/pixel.
Because pixel positions are integers the transform is 2*pi periodic in each
frequency axis, so rotated coordinates beyond ``[-pi, pi)`` are evaluated
exactly through periodic grid indexing.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.fft
from scipy.special import i0

from . import kernels
from .core import thread_limit


@dataclass(frozen=True)
class NufftOptions:
    """Gridding parameters.

    ``beta=None`` selects the Beatty et al. shape parameter for the given
    width and oversampling. ``guard`` bounds ``|k|`` in units of pi; larger
    coordinates are rejected. ``fast_path`` lets on-grid coordinates go
    through a plain FFT.
    """

    oversamp: float = 2.0
    width: int = 7
    beta: float | None = None
    guard: float = 2.0
    fast_path: bool = True

    @property
    def kb_beta(self) -> float:
        if self.beta is not None:
            return float(self.beta)
        a, w = self.oversamp, self.width
        return math.pi * math.sqrt((w / a) ** 2 * (a - 0.5) ** 2 - 0.8)

    def metadata(self) -> dict:
        return {"oversamp": self.oversamp, "width": self.width, "beta": self.kb_beta, "guard": self.guard}


DEFAULT_OPTIONS = NufftOptions()


def _workers():
    return thread_limit() or 1


def fft2_centered(x: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D DFT over the last two axes with DC at ``(H // 2, W // 2)``."""
    x = np.asarray(x, dtype=np.complex128)
    ax = (-2, -1)
    return scipy.fft.fftshift(
        scipy.fft.fft2(scipy.fft.ifftshift(x, axes=ax), norm="ortho", workers=_workers()), axes=ax
    )


def ifft2_centered(k: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2_centered`."""
    k = np.asarray(k, dtype=np.complex128)
    ax = (-2, -1)
    return scipy.fft.fftshift(
        scipy.fft.ifft2(scipy.fft.ifftshift(k, axes=ax), norm="ortho", workers=_workers()), axes=ax
    )


def dft_direct(image: np.ndarray, coords) -> np.ndarray:
    """Reference nonuniform DFT by explicit summation (O(H*W*M))."""
    image = np.ascontiguousarray(image, dtype=np.complex128)
    coords = np.ascontiguousarray(coords, dtype=np.float64).reshape(-1, 2)
    h, w = image.shape
    return kernels.dft(image, coords) / math.sqrt(h * w)


def dft_direct_adjoint(samples, coords, height: int, width: int) -> np.ndarray:
    samples = np.ascontiguousarray(samples, dtype=np.complex128).ravel()
    coords = np.ascontiguousarray(coords, dtype=np.float64).reshape(-1, 2)
    return kernels.dft_adjoint(samples, coords, height, width) / math.sqrt(height * width)


# --- gridding ---------------------------------------------------------------

class InterpTable(NamedTuple):
    """Per-axis tap indices (already wrapped) and weights for a coordinate set."""

    iy: np.ndarray
    wy: np.ndarray
    ix: np.ndarray
    wx: np.ndarray


def _grid_size(n: int, oversamp: float) -> int:
    k = int(math.ceil(n * oversamp))
    return k + (k % 2)


def kb_kernel(d, width: int, beta: float) -> np.ndarray:
    """Kaiser-Bessel kernel with its edge pedestal removed, so it is continuous at ``|d| = width/2``."""
    d = np.asarray(d, dtype=float)
    arg = 1.0 - (2.0 * d / width) ** 2
    return np.where(arg >= 0, i0(beta * np.sqrt(np.clip(arg, 0, None))) - 1.0, 0.0)


def kb_transform(nu, width: int, beta: float) -> np.ndarray:
    """Continuous Fourier transform of :func:`kb_kernel` at frequency ``nu`` (cycles per grid unit)."""
    nu = np.asarray(nu, dtype=float)
    a = math.pi * width * nu
    z2 = beta**2 - a**2
    z = np.sqrt(np.abs(z2))
    with np.errstate(invalid="ignore", divide="ignore"):
        kb = np.where(z2 > 0, np.sinh(z) / z, np.sin(z) / z)
        kb = np.where(z == 0, 1.0, kb)
        box = np.where(a == 0, 1.0, np.sin(a) / a)
    return width * (kb - box)


class Gridder:
    """Oversampled-FFT NUFFT machinery for one image size and option set."""

    def __init__(self, height: int, width: int, opts: NufftOptions = DEFAULT_OPTIONS):
        self.height, self.width, self.opts = height, width, opts
        self.k1 = _grid_size(height, opts.oversamp)
        self.k2 = _grid_size(width, opts.oversamp)
        beta = opts.kb_beta
        ry = np.arange(height) - height // 2
        rx = np.arange(width) - width // 2
        self._deapod = np.outer(
            1.0 / kb_transform(ry / self.k1, opts.width, beta), 1.0 / kb_transform(rx / self.k2, opts.width, beta)
        )
        self._scale = 1.0 / math.sqrt(height * width)
        self._r0 = self.k1 // 2 - height // 2
        self._c0 = self.k2 // 2 - width // 2

    def _axis(self, k, n):
        w = self.opts.width
        u = k * n / (2 * np.pi)
        l0 = np.floor(u - w / 2.0).astype(np.int64) + 1
        taps = l0[:, None] + np.arange(w)[None, :]
        wts = kb_kernel(u[:, None] - taps, w, self.opts.kb_beta)
        return np.ascontiguousarray(np.mod(taps, n)), np.ascontiguousarray(wts)

    def table(self, coords) -> InterpTable:
        coords = np.asarray(coords, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(coords)):
            raise ValueError("non-finite k-space coordinates")
        lim = self.opts.guard * np.pi
        if coords.size and np.max(np.abs(coords)) >= lim:
            raise ValueError(f"k-space coordinate beyond supported range |k| < {self.opts.guard}*pi")
        ix, wx = self._axis(coords[:, 0], self.k2)
        iy, wy = self._axis(coords[:, 1], self.k1)
        return InterpTable(iy, wy, ix, wx)

    def spectrum(self, images: np.ndarray) -> np.ndarray:
        """Oversampled, deapodized spectra of a ``(c, H, W)`` stack (unshifted index = frequency mod K)."""
        c = images.shape[0]
        pad = np.zeros((c, self.k1, self.k2), dtype=np.complex128)
        pad[:, self._r0 : self._r0 + self.height, self._c0 : self._c0 + self.width] = images * self._deapod
        return scipy.fft.fft2(scipy.fft.ifftshift(pad, axes=(-2, -1)), workers=_workers())

    def spectrum_adjoint(self, grids: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`spectrum`."""
        g = scipy.fft.ifft2(grids, norm="forward", workers=_workers())
        g = scipy.fft.fftshift(g, axes=(-2, -1))
        return g[:, self._r0 : self._r0 + self.height, self._c0 : self._c0 + self.width] * self._deapod

    def interp(self, spec: np.ndarray, tab: InterpTable) -> np.ndarray:
        return kernels.interp(spec, tab.iy, tab.wy, tab.ix, tab.wx) * self._scale

    def spread(self, samples: np.ndarray, tab: InterpTable, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.zeros((samples.shape[0], self.k1, self.k2), dtype=np.complex128)
        samples = np.ascontiguousarray(samples * self._scale, dtype=np.complex128)
        return kernels.spread(samples, tab.iy, tab.wy, tab.ix, tab.wx, out)


@functools.lru_cache(maxsize=32)
def get_gridder(height: int, width: int, opts: NufftOptions = DEFAULT_OPTIONS) -> Gridder:
    return Gridder(height, width, opts)


def cartesian_indices(coords, height: int, width: int):
    """Return ``(rows, cols)`` if every coordinate sits on the ``(H, W)`` grid, else ``None``."""
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    cx = coords[:, 0] * width / (2 * np.pi)
    cy = coords[:, 1] * height / (2 * np.pi)
    rx, ry = np.rint(cx), np.rint(cy)
    if np.max(np.abs(cx - rx), initial=0) > 1e-9 or np.max(np.abs(cy - ry), initial=0) > 1e-9:
        return None
    rows = np.mod(ry.astype(np.int64) + height // 2, height)
    cols = np.mod(rx.astype(np.int64) + width // 2, width)
    return rows, cols


def nufft_forward(image, coords, opts: NufftOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Samples of the orthonormal DFT of ``image`` (``(H, W)`` or ``(c, H, W)``) at ``coords``."""
    image = np.asarray(image, dtype=np.complex128)
    single = image.ndim == 2
    stack = image[None] if single else image
    h, w = stack.shape[-2:]
    idx = cartesian_indices(coords, h, w) if opts.fast_path else None
    if idx is not None:
        out = fft2_centered(stack)[:, idx[0], idx[1]]
    else:
        g = get_gridder(h, w, opts)
        out = g.interp(g.spectrum(stack), g.table(coords))
    return out[0] if single else out


def nufft_adjoint(samples, coords, height: int, width: int, opts: NufftOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Exact adjoint of :func:`nufft_forward` for the same coordinates and options."""
    samples = np.asarray(samples, dtype=np.complex128)
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    single = samples.ndim == 1
    stack = samples[None] if single else samples
    if stack.shape[-1] != coords.shape[0]:
        raise ValueError(f"{stack.shape[-1]} samples for {coords.shape[0]} coordinates")
    idx = cartesian_indices(coords, height, width) if opts.fast_path else None
    if idx is not None:
        grid = np.zeros((stack.shape[0], height, width), dtype=np.complex128)
        for c in range(stack.shape[0]):
            np.add.at(grid[c], idx, stack[c])
        out = ifft2_centered(grid)
    else:
        g = get_gridder(height, width, opts)
        out = g.spectrum_adjoint(g.spread(stack, g.table(coords)))
    return out[0] if single else out
