"""Polynomial coil-sensitivity maps: basis, evaluation, least-squares fit, scale gauge."""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

DEFAULT_POLY_ORDER = 15


@dataclass(frozen=True)
class PolyCoeffs:
    """Real coefficients, shape ``(num_coils, 2, N+1, N+1)``.

    Axis 1 selects the real (0) or imaginary (1) part; ``coeffs[i, part, p, q]``
    multiplies ``x**p * y**q`` (or ``P_p(x) P_q(y)`` for the Legendre basis).
    """

    coeffs: np.ndarray
    basis: str = "monomial"

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 4 or c.shape[1] != 2 or c.shape[2] != c.shape[3]:
            raise ValueError(f"coefficient array must be (c, 2, N+1, N+1), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        if self.basis not in ("monomial", "legendre"):
            raise ValueError(f"unknown basis {self.basis!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def num_coils(self) -> int:
        return self.coeffs.shape[0]

    @property
    def order(self) -> int:
        return self.coeffs.shape[2] - 1

    @property
    def num_unknowns(self) -> int:
        return self.coeffs.size

    @classmethod
    def zeros(cls, num_coils: int, order: int, basis: str = "monomial") -> "PolyCoeffs":
        return cls(np.zeros((num_coils, 2, order + 1, order + 1)), basis)

    def complex_coeffs(self) -> np.ndarray:
        """``(c, (N+1)**2)`` complex coefficients in basis-column order."""
        k = (self.order + 1) ** 2
        return self.coeffs[:, 0].reshape(-1, k) + 1j * self.coeffs[:, 1].reshape(-1, k)

    @classmethod
    def from_complex(cls, cc, basis: str = "monomial") -> "PolyCoeffs":
        cc = np.asarray(cc)
        n1 = int(round(np.sqrt(cc.shape[1])))
        return cls(np.stack([cc.real, cc.imag], axis=1).reshape(cc.shape[0], 2, n1, n1), basis)

    def scaled(self, factor: float) -> "PolyCoeffs":
        return PolyCoeffs(self.coeffs * factor, self.basis)


def coefficient_count(num_coils: int, order: int) -> int:
    """Real unknowns of a complex polynomial coil model: ``2 c (N+1)**2``."""
    return 2 * num_coils * (order + 1) ** 2


def normalized_axes(height: int, width: int):
    """Pixel coordinates mapped affinely onto [-1, 1]: ``(x per column, y per row)``."""
    x = np.linspace(-1.0, 1.0, width) if width > 1 else np.zeros(1)
    y = np.linspace(-1.0, 1.0, height) if height > 1 else np.zeros(1)
    return x, y


@functools.lru_cache(maxsize=16)
def _basis(height: int, width: int, order: int, basis: str) -> np.ndarray:
    x, y = normalized_axes(height, width)
    if basis == "monomial":
        px = np.vander(x, order + 1, increasing=True)
        py = np.vander(y, order + 1, increasing=True)
    else:
        px = legendre.legvander(x, order)
        py = legendre.legvander(y, order)
    # row = pixel (row-major), column = (p, q) lexicographic for x**p y**q
    b = np.einsum("rq,cp->rcpq", py, px).reshape(height * width, (order + 1) ** 2)
    b.setflags(write=False)
    return b


def csm_basis(height: int, width: int, order: int, basis: str = "monomial") -> np.ndarray:
    """Design matrix ``(H*W, (N+1)**2)``; cached per ``(H, W, N, basis)``."""
    if order < 0:
        raise ValueError("polynomial order must be >= 0")
    if basis not in ("monomial", "legendre"):
        raise ValueError(f"unknown basis {basis!r}")
    return _basis(height, width, order, basis)


def eval_csm(phi: PolyCoeffs, height: int, width: int) -> np.ndarray:
    """Coil maps ``(c, H, W)``."""
    b = csm_basis(height, width, phi.order, phi.basis)
    cc = phi.complex_coeffs()
    return (cc @ b.T).reshape(phi.num_coils, height, width)


def project_csm(fields: np.ndarray, order: int, basis: str = "monomial") -> np.ndarray:
    """Transpose of :func:`eval_csm`: project real/imag parts of ``(c, H, W)`` fields onto the basis.

    Returns a ``(c, 2, N+1, N+1)`` array.
    """
    c, h, w = fields.shape
    b = csm_basis(h, w, order, basis)
    f = fields.reshape(c, -1)
    n1 = order + 1
    re = (f.real @ b).reshape(c, n1, n1)
    im = (f.imag @ b).reshape(c, n1, n1)
    return np.stack([re, im], axis=1)


class RankDeficientError(np.linalg.LinAlgError):
    pass


def fit_csm(maps, order: int, support_mask=None, basis: str = "monomial", return_residual: bool = False):
    """Least-squares polynomial coefficients for ``(c, H, W)`` maps over the supported pixels."""
    maps = np.asarray(maps, dtype=np.complex128)
    if maps.ndim == 2:
        maps = maps[None]
    c, h, w = maps.shape
    b = csm_basis(h, w, order, basis)
    sel = np.ones(h * w, dtype=bool) if support_mask is None else np.asarray(support_mask).ravel() > 0.5
    ncols = b.shape[1]
    if sel.sum() < ncols:
        raise RankDeficientError(f"{int(sel.sum())} supported pixels for {ncols} basis columns")
    bs = b[sel]
    rank = np.linalg.matrix_rank(bs)
    if rank < ncols:
        raise RankDeficientError(f"{basis} basis of order {order} has rank {rank} < {ncols} on the support")
    rhs = maps.reshape(c, -1)[:, sel].T
    sol, *_ = np.linalg.lstsq(bs, rhs, rcond=None)
    phi = PolyCoeffs.from_complex(sol.T, basis)
    if return_residual:
        resid = np.linalg.norm(bs @ sol - rhs)
        return phi, float(resid)
    return phi


def mean_rss(maps: np.ndarray) -> float:
    """Grid mean of ``sum_i |S_i|**2``."""
    return float(np.mean(np.sum(np.abs(maps) ** 2, axis=0)))


def normalize_csm_gauge(phi: PolyCoeffs, height: int, width: int):
    """Rescale so the mean of ``sum_i |S_i|**2`` is 1; returns ``(phi, scale)``.

    Pair the returned coefficients with ``x / scale`` to leave ``S_i x`` unchanged.
    """
    m = mean_rss(eval_csm(phi, height, width))
    if not m > 0:
        raise ValueError("coil maps are identically zero")
    scale = 1.0 / np.sqrt(m)
    return phi.scaled(scale), float(scale)
