import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jsmoco.csm import (
    DEFAULT_POLY_ORDER,
    PolyCoeffs,
    RankDeficientError,
    coefficient_count,
    csm_basis,
    eval_csm,
    fit_csm,
    mean_rss,
    normalize_csm_gauge,
    project_csm,
)


def random_phi(c, order, seed, basis="monomial"):
    return PolyCoeffs(np.random.default_rng(seed).normal(size=(c, 2, order + 1, order + 1)), basis)


def test_default_order_and_count():
    assert DEFAULT_POLY_ORDER == 15
    assert coefficient_count(4, 15) == 2 * 4 * 16**2
    assert PolyCoeffs.zeros(4, 15).num_unknowns == 2048


def test_basis_examples():
    assert np.array_equal(csm_basis(5, 7, 0), np.ones((35, 1)))
    assert np.allclose(csm_basis(6, 6, 1)[0], [1, -1, -1, 1])
    assert csm_basis(6, 6, 4).shape[1] == 25
    with pytest.raises(ValueError):
        csm_basis(4, 4, -1)
    with pytest.raises(ValueError):
        csm_basis(4, 4, 1, "chebyshev")


def test_constant_map():
    coeffs = np.zeros((1, 2, 3, 3))
    coeffs[0, 0, 0, 0] = 1.0
    assert np.allclose(eval_csm(PolyCoeffs(coeffs), 8, 8), 1.0)


@pytest.mark.parametrize("basis", ["monomial", "legendre"])
def test_linearity_and_fit_roundtrip(basis):
    phi = random_phi(3, 3, 0, basis)
    maps = eval_csm(phi, 24, 20)
    assert np.allclose(eval_csm(phi.scaled(2.5), 24, 20), 2.5 * maps)
    back = fit_csm(maps, 3, basis=basis)
    assert np.linalg.norm(back.coeffs - phi.coeffs) < 1e-8 * np.linalg.norm(phi.coeffs)
    refit = eval_csm(back, 24, 20)
    assert np.linalg.norm(refit - maps) / np.linalg.norm(maps) < 1e-8


def test_fit_constant_and_residual():
    phi, res = fit_csm(np.full((6, 6), 2 + 1j), 0, return_residual=True)
    assert np.allclose(phi.coeffs[0, :, 0, 0], (2, 1))
    assert res < 1e-12


def test_fit_with_mask_and_rank_errors():
    phi = random_phi(2, 2, 1)
    maps = eval_csm(phi, 16, 16)
    mask = np.zeros((16, 16))
    mask[4:12, 4:12] = 1
    back = fit_csm(maps, 2, support_mask=mask)
    assert np.allclose(back.coeffs, phi.coeffs, atol=1e-8)
    tiny = np.zeros((16, 16))
    tiny[0, :5] = 1
    with pytest.raises(RankDeficientError, match="supported pixels"):
        fit_csm(maps, 2, support_mask=tiny)
    line = np.zeros((16, 16))
    line[3, :] = 1
    with pytest.raises(RankDeficientError, match="rank"):
        fit_csm(maps, 2, support_mask=line)


def test_project_is_transpose_of_eval():
    rng = np.random.default_rng(2)
    phi = random_phi(2, 3, 3)
    f = rng.normal(size=(2, 10, 12)) + 1j * rng.normal(size=(2, 10, 12))
    lhs = np.vdot(f, eval_csm(phi, 10, 12)).real
    rhs = np.sum(project_csm(f, 3) * phi.coeffs)
    assert np.isclose(lhs, rhs, rtol=1e-12)


def test_complex_coeff_roundtrip():
    phi = random_phi(3, 2, 4, "legendre")
    back = PolyCoeffs.from_complex(phi.complex_coeffs(), "legendre")
    assert np.array_equal(back.coeffs, phi.coeffs)


def test_gauge_examples():
    phi, s = normalize_csm_gauge(random_phi(4, 3, 5), 16, 16)
    assert abs(mean_rss(eval_csm(phi, 16, 16)) - 1) < 1e-12
    _, s1 = normalize_csm_gauge(phi, 16, 16)
    assert np.isclose(s1, 1.0)
    _, s2 = normalize_csm_gauge(phi.scaled(2.0), 16, 16)
    assert np.isclose(s2, 0.5)
    with pytest.raises(ValueError):
        normalize_csm_gauge(PolyCoeffs.zeros(2, 2), 8, 8)


def test_coeff_validation():
    with pytest.raises(ValueError):
        PolyCoeffs(np.zeros((2, 3, 2, 2)))
    with pytest.raises(ValueError):
        PolyCoeffs(np.zeros((2, 2, 2, 3)))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 4), st.integers(0, 10_000))
def test_fit_eval_identity_property(c, order, seed):
    phi = random_phi(c, order, seed)
    back = fit_csm(eval_csm(phi, 12, 12), order)
    assert np.allclose(back.coeffs, phi.coeffs, atol=1e-8 * (1 + np.abs(phi.coeffs).max()))
