"""Image, coil-map and motion error metrics.

PSNR and SSIM compare magnitude images. NRMSE compares complex values.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .csm import PolyCoeffs, eval_csm, normalize_csm_gauge
from .geometry import MotionParams, wrap_angle

PSNR_CAP = 200.0
SSIM_DEFAULTS = {"window": 11, "sigma": 1.5, "k1": 0.01, "k2": 0.03}


def _pair(reference, test):
    ref = np.asarray(reference)
    tst = np.asarray(test)
    if ref.shape != tst.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {tst.shape}")
    return ref, tst


def psnr(reference, test) -> float:
    """``10 log10(peak**2 / MSE)`` on magnitudes, peak = max |reference|; capped at 200 dB."""
    ref, tst = _pair(reference, test)
    a, b = np.abs(ref), np.abs(tst)
    mse = float(np.mean((a - b) ** 2))
    peak = float(a.max())
    if mse == 0:
        return PSNR_CAP
    if peak == 0:
        return -PSNR_CAP
    return min(PSNR_CAP, 10 * math.log10(peak**2 / mse))


def ssim(reference, test, window: int = 11, k1: float = 0.01, k2: float = 0.03,
         sigma: float = 1.5, data_range: float | None = None) -> float:
    """Mean structural similarity of magnitude images with a Gaussian window.

    ``data_range`` defaults to the reference's maximum magnitude. Local
    statistics use population (biased) moments; the mean is taken over pixels
    whose window lies fully inside the image.
    """
    if window % 2 != 1 or window < 3:
        raise ValueError("window must be an odd integer >= 3")
    ref, tst = _pair(reference, test)
    a, b = np.abs(ref).astype(float), np.abs(tst).astype(float)
    L = float(a.max()) if data_range is None else float(data_range)
    if L <= 0:
        raise ValueError("data range must be positive")
    radius = window // 2
    filt = lambda z: ndimage.gaussian_filter(z, sigma, truncate=radius / sigma, mode="reflect")
    mu_a, mu_b = filt(a), filt(b)
    vaa = filt(a * a) - mu_a**2
    vbb = filt(b * b) - mu_b**2
    vab = filt(a * b) - mu_a * mu_b
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    smap = ((2 * mu_a * mu_b + c1) * (2 * vab + c2)) / ((mu_a**2 + mu_b**2 + c1) * (vaa + vbb + c2))
    if min(a.shape) > 2 * radius:
        smap = smap[radius:-radius, radius:-radius]
    return float(np.mean(smap))


def nrmse(reference, test) -> float:
    """``||test - reference|| / ||reference||`` over complex values."""
    ref, tst = _pair(reference, test)
    den = float(np.linalg.norm(ref))
    if den == 0:
        raise ValueError("reference is identically zero")
    return float(np.linalg.norm(tst - ref)) / den


def csm_nrmse(phi_est: PolyCoeffs, phi_true: PolyCoeffs, height: int, width: int, align_phase: bool = True) -> float:
    """NRMSE between coil-map sets after normalizing both to mean RSS 1.

    With ``align_phase`` the estimate is first multiplied by the single global
    phase factor that best matches the reference, because ``(S, x)`` and
    ``(S e^{ia}, x e^{-ia})`` produce identical data.
    """
    ref = eval_csm(normalize_csm_gauge(phi_true, height, width)[0], height, width)
    est = eval_csm(normalize_csm_gauge(phi_est, height, width)[0], height, width)
    if align_phase:
        inner = np.vdot(est, ref)
        if abs(inner) > 0:
            est = est * (inner / abs(inner))
    return nrmse(ref, est)


def motion_error(m_est: MotionParams, m_true: MotionParams):
    """Gauge-aligned RMSE over shots: ``(rotation in degrees, translation in pixels)``."""
    if m_est.num_shots != m_true.num_shots:
        raise ValueError("shot count mismatch")
    a, b = m_est.gauge_fixed(), m_true.gauge_fixed()
    dth = wrap_angle(a.rotations - b.rotations)
    dt = np.linalg.norm(a.translations - b.translations, axis=1)
    return (math.degrees(float(np.sqrt(np.mean(dth**2)))), float(np.sqrt(np.mean(dt**2))))


def align_phase(reference, test) -> np.ndarray:
    """``test`` times the global phase that best matches ``reference``."""
    inner = np.vdot(test, reference)
    return test * (inner / abs(inner)) if abs(inner) > 0 else test


def line_profiles(image, row: int | None = None, col: int | None = None):
    """Magnitude line cuts through ``image`` (centre row/column by default)."""
    img = np.abs(np.asarray(image))
    h, w = img.shape
    row = h // 2 if row is None else row
    col = w // 2 if col is None else col
    return img[row, :].copy(), img[:, col].copy()
