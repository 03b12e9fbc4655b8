import numpy as np
import pytest

from jsmoco.csm import PolyCoeffs, eval_csm, mean_rss
from jsmoco.geometry import MotionParams, make_plan
from jsmoco.metrics import psnr
from jsmoco.nufft import fft2_centered
from jsmoco.sim import (
    MOTION_PRESETS,
    SHEPP_LOGAN_ELLIPSES,
    draw_motion,
    shepp_logan,
    simulate_acquisition,
    synth_csm,
    zero_fill_recon,
)


def unit_phi():
    c = np.zeros((1, 2, 1, 1))
    c[0, 0] = 1.0
    return PolyCoeffs(c)


def ellipse_sum(h, w):
    """Pixel-by-pixel ellipse membership, written independently of the vectorized phantom."""
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            px = (2 * c + 1 - w) / w
            py = (h - 1 - 2 * r) / h
            v = 0.0
            for amp, a, b, x0, y0, ang in SHEPP_LOGAN_ELLIPSES:
                t = np.radians(ang)
                u = (px - x0) * np.cos(t) + (py - y0) * np.sin(t)
                s = -(px - x0) * np.sin(t) + (py - y0) * np.cos(t)
                if (u / a) ** 2 + (s / b) ** 2 <= 1:
                    v += amp
            out[r, c] = min(max(v, 0.0), 1.0)
    return out


def test_phantom_examples():
    real = shepp_logan(64, 64)
    assert not np.any(real.imag)
    x = shepp_logan(64, 64, 0.7)
    assert real.real.min() >= 0 and real.real.max() <= 1
    assert np.abs(x).max() <= 1 + 1e-12
    assert np.allclose(np.abs(x), ellipse_sum(64, 64), atol=1e-12)
    assert 0 < np.abs(np.angle(x[np.abs(x) > 0])).max() <= 0.7 + 1e-12
    with pytest.raises(ValueError):
        shepp_logan(8, 8)


def test_synth_csm_examples():
    maps, phi = synth_csm(4, 48, 48, 3, 0)
    assert np.allclose(eval_csm(phi, 48, 48), maps, atol=1e-12)
    assert abs(mean_rss(maps) - 1) < 1e-12
    with pytest.raises(ValueError):
        synth_csm(2, 16, 16, 7, 0)


def test_synth_csm_distinct_peaks_over_seeds():
    for seed in range(20):
        maps, _ = synth_csm(4, 32, 32, 3, seed)
        assert len({int(np.argmax(np.abs(m))) for m in maps}) == 4


def test_draw_motion_examples():
    assert np.array_equal(draw_motion(5, 0, 0, 1).as_array(), np.zeros((5, 3)))
    assert {k for k, _ in MOTION_PRESETS.values()} == {2.0, 3.0}
    assert {t for _, t in MOTION_PRESETS.values()} == {3.0, 4.0}
    m = draw_motion(10_000, 2.0, 3.0, 2)
    assert np.degrees(np.abs(m.rotations)).max() <= 2.0
    assert np.abs(m.translations).max() <= 3.0
    assert np.array_equal(m.as_array()[0], np.zeros(3))
    with pytest.raises(ValueError):
        draw_motion(3, -1.0, 0.0, 0)


def test_draw_motion_moments():
    k = 3.0
    t = draw_motion(100_000, k, k, 3).translations.ravel()
    th = np.degrees(draw_motion(100_000, k, k, 4).rotations)
    for v in (t, th):
        assert abs(v.mean()) < 0.05 * k
        assert abs(v.var() / (k**2 / 3) - 1) < 0.05


def test_simulate_identity_is_masked_fft():
    x = shepp_logan(32, 32, 0.5)
    plan = make_plan(32, 32, 2, 4, num_shots=2)
    y = simulate_acquisition(x, unit_phi(), MotionParams.identity(2), plan).samples
    assert np.allclose(y[0], fft2_centered(x)[plan.sample_rows, plan.sample_cols], atol=1e-12)


def test_simulate_reproducible_and_dft_mode():
    x = shepp_logan(32, 32, 0.5)
    _, phi = synth_csm(2, 32, 32, 2, 1)
    m = draw_motion(4, 2.0, 2.0, 1)
    plan = make_plan(32, 32, 2, 4, num_shots=4, ordering="interleaved")
    a = simulate_acquisition(x, phi, m, plan).samples
    b = simulate_acquisition(x, phi, m, plan).samples
    assert np.array_equal(a.view(np.uint8), b.view(np.uint8))
    d = simulate_acquisition(x, phi, m, plan, mode="dft").samples
    assert np.linalg.norm(a - d) / np.linalg.norm(d) < 1e-5
    with pytest.raises(ValueError):
        simulate_acquisition(x, phi, m, plan, mode="analog")
    with pytest.raises(ValueError):
        simulate_acquisition(x, phi, MotionParams.identity(2), plan)


def test_noise_variance():
    x = np.zeros((256, 256))
    plan = make_plan(256, 256, 1, 0)
    y = simulate_acquisition(x, unit_phi(), MotionParams.identity(1), plan, noise_sigma=0.3, seed=5).samples
    assert y.size >= 10**4
    assert abs(y.real.var() / 0.09 - 1) < 0.05
    assert abs(y.imag.var() / 0.09 - 1) < 0.05


def test_zero_fill_examples():
    x = shepp_logan(32, 32, 0.5)
    full = make_plan(32, 32, 1, 0)
    y = simulate_acquisition(x, unit_phi(), MotionParams.identity(1), full).samples
    assert np.allclose(zero_fill_recon(y, full), np.abs(x), atol=1e-10)
    under = make_plan(32, 32, 2, 4)
    yu = simulate_acquisition(x, unit_phi(), MotionParams.identity(1), under).samples
    assert psnr(x, zero_fill_recon(yu, under)) < psnr(x, zero_fill_recon(y, full))
    assert not np.any(zero_fill_recon(np.zeros_like(yu), under))
