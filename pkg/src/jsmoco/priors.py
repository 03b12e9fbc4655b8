"""Noise schedules and score priors.

A prior is anything with ``score(x, sigma) -> array`` returning an
approximation of the gradient of ``log p_sigma(x)``. Built-ins are analytic, so
the sampler runs without a trained network; :class:`ExternalScorePrior`
delegates to a subprocess for learned models.
"""
from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from scipy import ndimage

from .core import as_grid, load_grid, save_grid


@dataclass(frozen=True)
class NoiseSchedule:
    """Geometric noise levels in sampling order (``sigmas[0] = sigma_max``)."""

    sigmas: np.ndarray

    @property
    def sigma_max(self) -> float:
        return float(self.sigmas[0])

    @property
    def sigma_min(self) -> float:
        return float(self.sigmas[-1])

    @property
    def T(self) -> int:
        return len(self.sigmas)


def ve_schedule(sigma_min: float, sigma_max: float, T: int) -> NoiseSchedule:
    """``sigma_i = sigma_max * (sigma_min / sigma_max) ** ((T - i) / (T - 1))``, visited from i = T down to 1."""
    if not 0 < sigma_min < sigma_max:
        raise ValueError("need 0 < sigma_min < sigma_max")
    if T < 2:
        raise ValueError("schedule needs T >= 2")
    i = np.arange(T, 0, -1)
    sig = sigma_max * (sigma_min / sigma_max) ** ((T - i) / (T - 1))
    sig[0], sig[-1] = sigma_max, sigma_min
    sig.setflags(write=False)
    return NoiseSchedule(sig)


@runtime_checkable
class ScorePrior(Protocol):
    def score(self, x: np.ndarray, sigma: float) -> np.ndarray: ...


def laplacian(x: np.ndarray) -> np.ndarray:
    """5-point graph Laplacian ``4 x - neighbours`` with reflective boundaries (symmetric PSD)."""
    p = np.pad(x, 1, mode="edge")
    return 4 * x - (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:])


@dataclass(frozen=True)
class GaussianSmoothnessPrior:
    """Improper Gaussian prior ``exp(-alpha/2 x^H L x)`` annealed by ``1 / (1 + sigma**2)``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def score(self, x, sigma):
        return -self.alpha * laplacian(np.asarray(x, dtype=np.complex128)) / (1.0 + sigma**2)

    def log_density(self, x, sigma):
        x = np.asarray(x, dtype=np.complex128)
        return -0.5 * self.alpha * float(np.vdot(x, laplacian(x)).real) / (1.0 + sigma**2)


def gaussian_smoothness_prior(alpha: float) -> GaussianSmoothnessPrior:
    return GaussianSmoothnessPrior(alpha)


@dataclass(frozen=True)
class DenoiserSurrogatePrior:
    """Tweedie-style surrogate ``(G_rho(x) - x) / sigma**2`` with a normalized Gaussian blur."""

    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    def blur(self, x):
        x = np.asarray(x, dtype=np.complex128)
        # wrap keeps the blur doubly stochastic, so the score has zero mean
        f = lambda a: ndimage.gaussian_filter(a, self.rho, mode="wrap")
        return f(x.real) + 1j * f(x.imag)

    def score(self, x, sigma):
        return (self.blur(x) - x) / sigma**2


def denoiser_surrogate_prior(rho: float) -> DenoiserSurrogatePrior:
    return DenoiserSurrogatePrior(rho)


@dataclass(frozen=True)
class OracleGaussianPrior:
    """``p(x) ~ exp(-||x - x_star||^2 / (2 tau^2))`` smoothed to noise level ``sigma``."""

    x_star: np.ndarray
    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "x_star", as_grid(self.x_star, name="x_star"))

    def score(self, x, sigma):
        x = np.asarray(x)
        if x.shape != self.x_star.shape:
            raise ValueError(f"image shape {x.shape} does not match prior {self.x_star.shape}")
        return (self.x_star - x) / (self.tau**2 + sigma**2)


def oracle_gaussian_prior(x_star, tau: float) -> OracleGaussianPrior:
    return OracleGaussianPrior(x_star, tau)


class ExternalScorePrior:
    """Score evaluated by an external command.

    The command is run as ``<command> IN OUT SIGMA`` where ``IN`` and ``OUT`` are
    grid file stems (``.hdr.json`` + ``.bin``). The input header also carries
    ``sigma``. The command must write an image grid of the same shape to ``OUT``.
    """

    def __init__(self, command, timeout: float | None = 600.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout

    def score(self, x, sigma):
        x = as_grid(x, name="image")
        with tempfile.TemporaryDirectory(prefix="jsmoco-score-") as tmp:
            src, dst = Path(tmp) / "x", Path(tmp) / "score"
            save_grid(x, src, semantic="image", sigma=float(sigma))
            proc = subprocess.run(
                [*self.command, str(src), str(dst), repr(float(sigma))],
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
            if proc.returncode != 0:
                raise RuntimeError(f"external score command failed ({proc.returncode}): {proc.stderr.strip()}")
            out = load_grid(dst)
        if out.shape != x.shape:
            raise RuntimeError(f"external score returned shape {out.shape}, expected {x.shape}")
        return as_grid(out, name="external score")


def prior_from_config(cfg: dict, x_star=None):
    """Build a prior from ``{"kind": ..., ...}``."""
    kind = cfg.get("kind", "smoothness")
    if kind == "smoothness":
        return GaussianSmoothnessPrior(float(cfg.get("alpha", 1.0)))
    if kind == "denoiser":
        return DenoiserSurrogatePrior(float(cfg.get("rho", 1.0)))
    if kind == "oracle":
        if x_star is None:
            raise ValueError("oracle prior needs a reference image")
        return OracleGaussianPrior(x_star, float(cfg.get("tau", 0.1)))
    if kind == "external":
        return ExternalScorePrior(cfg["command"])
    raise ValueError(f"unknown prior kind {kind!r}")
