import numpy as np
import pytest
from skimage.metrics import structural_similarity

from jsmoco.csm import PolyCoeffs
from jsmoco.geometry import MotionParams
from jsmoco.metrics import (
    PSNR_CAP,
    align_phase,
    csm_nrmse,
    line_profiles,
    motion_error,
    nrmse,
    psnr,
    ssim,
)
from jsmoco.sim import shepp_logan


def test_psnr_examples():
    x = shepp_logan(32, 32, 0.3)
    assert psnr(x, x) == PSNR_CAP
    ref = np.zeros((8, 8))
    ref[0, 0] = 1.0
    assert np.isclose(psnr(ref, ref + 0.1), 20.0)
    noisy = x + 0.05 * np.random.default_rng(0).normal(size=x.shape)
    assert np.isclose(psnr(3 * x, 3 * noisy), psnr(x, noisy))
    with pytest.raises(ValueError):
        psnr(x, x[:4])


def test_ssim_examples():
    x = np.abs(shepp_logan(64, 64))
    assert np.isclose(ssim(x, x), 1.0)
    assert ssim(x, x.max() - x) < 0.5
    y = x + 0.1 * np.random.default_rng(1).normal(size=x.shape)
    assert np.isclose(ssim(x, y, data_range=1.0), ssim(y, x, data_range=1.0))
    with pytest.raises(ValueError):
        ssim(x, y, window=4)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ssim_matches_skimage(seed):
    rng = np.random.default_rng(seed)
    x = np.abs(shepp_logan(64, 64))
    y = np.clip(x + 0.1 * rng.normal(size=x.shape), 0, None)
    ref = structural_similarity(x, y, data_range=x.max(), gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False)
    assert abs(ssim(x, y) - ref) < 1e-6


def test_nrmse_examples():
    x = shepp_logan(16, 16, 0.4)
    e = np.random.default_rng(2).normal(size=x.shape)
    assert nrmse(x, x) == 0.0
    assert np.isclose(nrmse(x, 2 * x), 1.0)
    assert np.isclose(nrmse(x, x + 0.01 * np.linalg.norm(x) * e / np.linalg.norm(e)), 0.01)
    with pytest.raises(ValueError):
        nrmse(np.zeros(3), np.ones(3))


def test_csm_nrmse_gauge_and_phase_invariance():
    phi = PolyCoeffs(np.random.default_rng(3).normal(size=(3, 2, 3, 3)))
    rot = PolyCoeffs.from_complex(phi.complex_coeffs() * np.exp(0.7j) * 2.5)
    assert csm_nrmse(rot, phi, 16, 16) < 1e-12
    assert csm_nrmse(rot, phi, 16, 16, align_phase=False) > 0.5
    assert np.allclose(align_phase(np.ones(3), 1j * np.ones(3)), np.ones(3))


def test_motion_error_examples():
    arr = np.random.default_rng(4).normal(size=(4, 3)) * [0.02, 1, 1]
    arr[0] = 0.0
    m = MotionParams.from_array(arr)
    assert motion_error(m, m) == (0.0, 0.0)
    rt, tt = motion_error(m.compose_global(0.2, (3.0, -1.0)), m)
    assert rt < 1e-10 and tt < 1e-10
    arr = m.as_array()
    arr[2, 0] += np.radians(1.0)
    rt, tt = motion_error(MotionParams.from_array(arr), m)
    assert np.isclose(rt, 0.5) and tt < 1e-12
    both = motion_error(MotionParams.from_array(arr).compose_global(-0.1, (1, 1)), m.compose_global(0.3, (0, 2)))
    assert np.allclose(both, (0.5, 0.0), atol=1e-10)
    with pytest.raises(ValueError):
        motion_error(m, MotionParams.identity(3))


def test_line_profiles():
    x = shepp_logan(32, 48)
    row, col = line_profiles(x)
    assert row.shape == (48,) and col.shape == (32,)
    assert np.array_equal(row, np.abs(x)[16])
