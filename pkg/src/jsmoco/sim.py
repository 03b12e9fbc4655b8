"""Synthetic ground truth: phantom, coil maps, rigid motion, and corrupted measurements."""
from __future__ import annotations

import numpy as np

from .core import Measurements, complex_normal, make_rng, samples_of
from .csm import PolyCoeffs, eval_csm, fit_csm, normalize_csm_gauge
from .forward import Encoder
from .geometry import AcquisitionPlan, MotionParams, rotate_coords, translation_phase
from .nufft import DEFAULT_OPTIONS, dft_direct, ifft2_centered

# (intensity, semi-axis a, semi-axis b, x0, y0, angle in degrees); Toft's modified intensities
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
)

# (k_theta degrees, k_t pixels) motion levels of the fastMRI experiments
MOTION_PRESETS = {
    "rot2-trans3": (2.0, 3.0),
    "rot2-trans4": (2.0, 4.0),
    "rot3-trans3": (3.0, 3.0),
    "rot3-trans4": (3.0, 4.0),
}


def phantom_axes(height: int, width: int):
    """Pixel-centre coordinates in (-1, 1): x grows with column, y grows upward."""
    x = (2 * np.arange(width) + 1 - width) / width
    y = (height - 1 - 2 * np.arange(height)) / height
    return np.meshgrid(x, y)


def shepp_logan(height: int, width: int, phase_strength: float = 0.0) -> np.ndarray:
    """Modified Shepp-Logan magnitude times a smooth polynomial phase of peak ``phase_strength`` rad."""
    if height < 16 or width < 16:
        raise ValueError("phantom needs at least 16x16 pixels")
    X, Y = phantom_axes(height, width)
    mag = np.zeros((height, width))
    for amp, a, b, x0, y0, ang in SHEPP_LOGAN_ELLIPSES:
        c, s = np.cos(np.radians(ang)), np.sin(np.radians(ang))
        xr, yr = X - x0, Y - y0
        inside = ((xr * c + yr * s) / a) ** 2 + ((-xr * s + yr * c) / b) ** 2 <= 1.0
        mag[inside] += amp
    mag = np.clip(mag, 0.0, 1.0)
    if phase_strength == 0:
        return mag.astype(np.complex128)
    poly = X + 0.5 * Y + 0.5 * X * Y - 0.3 * X**2
    phase = phase_strength * poly / np.max(np.abs(poly))
    return mag * np.exp(1j * phase)


def synth_csm(num_coils: int, height: int, width: int, order: int, seed: int, max_tries: int = 20):
    """Birdcage-like smooth polynomial coil maps.

    Each coil is a least-squares polynomial fit of a Gaussian blob centred just
    outside the field of view at its own azimuth, with a random linear phase and
    a small random coefficient perturbation. The set is gauge-normalized (mean
    RSS 1) and re-drawn if two coils peak at the same pixel.

    Returns ``(maps, phi_true)`` with ``maps == eval_csm(phi_true)``.
    """
    if order > 6:
        raise ValueError("synthetic coil maps are limited to order <= 6")
    if num_coils < 1:
        raise ValueError("need at least one coil")
    y, x = np.meshgrid(np.linspace(-1, 1, height), np.linspace(-1, 1, width), indexing="ij")
    for attempt in range(max_tries):
        rng = make_rng(seed, 0xC5, attempt)
        blobs = []
        for i in range(num_coils):
            ang = 2 * np.pi * i / num_coils + rng.uniform(-0.25, 0.25) * np.pi / num_coils
            cx, cy = 1.4 * np.cos(ang), 1.4 * np.sin(ang)
            width_ = rng.uniform(0.9, 1.2)
            mag = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * width_**2))
            kx, ky = rng.uniform(-1.0, 1.0, 2)
            blobs.append(mag * np.exp(1j * (kx * x + ky * y + rng.uniform(-np.pi, np.pi))))
        phi = fit_csm(np.array(blobs), order)
        noise = rng.standard_normal(phi.coeffs.shape) * 0.02 * np.abs(phi.coeffs).max()
        phi, _ = normalize_csm_gauge(PolyCoeffs(phi.coeffs + noise), height, width)
        maps = eval_csm(phi, height, width)
        peaks = {int(np.argmax(np.abs(m_))) for m_ in maps}
        if len(peaks) == num_coils:
            return maps, phi
    raise RuntimeError(f"could not draw {num_coils} coil maps with distinct peaks")


def draw_motion(num_shots: int, k_theta: float, k_t: float, seed: int) -> MotionParams:
    """Uniform per-shot motion: ``theta ~ U(-k_theta, k_theta)`` degrees, ``t ~ U(-k_t, k_t)^2`` pixels.

    Shot 0 is the reference pose and is set to the identity.
    """
    if k_theta < 0 or k_t < 0:
        raise ValueError("motion ranges must be non-negative")
    rng = make_rng(seed, 0x307)
    theta = np.radians(rng.uniform(-k_theta, k_theta, num_shots))
    t = rng.uniform(-k_t, k_t, (num_shots, 2))
    theta[0] = 0.0
    t[0] = 0.0
    return MotionParams(theta, t)


def simulate_acquisition(
    x_true,
    phi_true: PolyCoeffs,
    m_true: MotionParams,
    plan: AcquisitionPlan,
    noise_sigma: float = 0.0,
    seed: int = 0,
    mode: str = "nufft",
    opts=DEFAULT_OPTIONS,
) -> Measurements:
    """Motion-corrupted multi-coil samples plus complex Gaussian noise (per-component std ``noise_sigma``).

    ``mode="dft"`` evaluates every shot by direct summation instead of the gridding
    operator, for oracle comparisons.
    """
    x_true = np.asarray(x_true, dtype=np.complex128)
    if x_true.shape != (plan.height, plan.width):
        raise ValueError("image does not match the plan grid")
    if m_true.num_shots != plan.num_shots:
        raise ValueError("motion shot count does not match the plan")
    maps = eval_csm(phi_true, plan.height, plan.width)
    if mode == "nufft":
        y = Encoder(plan, opts).forward(x_true, m_true, maps)
    elif mode == "dft":
        y = np.empty((maps.shape[0], plan.num_samples), dtype=np.complex128)
        for j, sl in enumerate(plan.shot_slices):
            p = plan.shot_coords(j)
            q = rotate_coords(p, m_true.rotations[j])
            ph = translation_phase(p, m_true.translations[j])
            for i in range(maps.shape[0]):
                y[i, sl] = dft_direct(maps[i] * x_true, q) * ph
    else:
        raise ValueError(f"unknown simulation mode {mode!r}")
    if noise_sigma > 0:
        y = y + complex_normal(make_rng(seed, 0x401), y.shape, noise_sigma)
    return Measurements(y)


def zero_fill_recon(y, plan: AcquisitionPlan) -> np.ndarray:
    """Root-sum-of-squares of per-coil inverse FFTs with unacquired k-space set to zero (motion ignored)."""
    ys = samples_of(y)
    grid = np.zeros((ys.shape[0], plan.height, plan.width), dtype=np.complex128)
    grid[:, plan.sample_rows, plan.sample_cols] = ys
    coil = ifft2_centered(grid)
    return np.sqrt(np.sum(np.abs(coil) ** 2, axis=0)).astype(np.complex128)
