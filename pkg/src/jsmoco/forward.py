"""Motion- and coil-parameterized encoding operator and its data-term gradients.

For shot ``j`` with nominal coordinates ``p`` the model is

    y_ij = NUFFT{S_i x}(R(theta_j) p) * exp(-j t_j . p)

(``p`` is replaced by the rotated coordinates when ``translation_coords`` is
``"rotated"``). All gradient functions return gradients of the log-likelihood,
i.e. ascent directions, with the complex image gradient packed as
``d/dRe + 1j d/dIm``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Measurements, samples_of
from .csm import PolyCoeffs, csm_basis, eval_csm, project_csm
from .geometry import AcquisitionPlan, MotionParams, rotate_coords
from .nufft import DEFAULT_OPTIONS, NufftOptions, cartesian_indices, fft2_centered, get_gridder, ifft2_centered

FD_STEP_THETA = 1e-4
FD_STEP_T = 1e-3


@dataclass(frozen=True)
class ForwardOutputs:
    predicted: Measurements
    per_shot_slices: tuple


@dataclass
class _Shot:
    nominal: np.ndarray
    rotated: np.ndarray
    phase: np.ndarray
    table: object = None
    cart: tuple | None = None


class Encoder:
    """Applies the joint operator for a fixed plan; caches per-shot interpolation tables.

    Tables are keyed by the rotation angle rounded to 1e-9 rad, so repeated
    applications at the same motion state (coil loops, forward/adjoint pairs)
    reuse them.
    """

    def __init__(
        self,
        plan: AcquisitionPlan,
        opts: NufftOptions = DEFAULT_OPTIONS,
        translation_coords: str = "nominal",
    ):
        if translation_coords not in ("nominal", "rotated"):
            raise ValueError(f"translation_coords must be 'nominal' or 'rotated', not {translation_coords!r}")
        self.plan, self.opts, self.translation_coords = plan, opts, translation_coords
        self.h, self.w = plan.height, plan.width
        self.gridder = get_gridder(self.h, self.w, opts)
        self._nominal = [plan.shot_coords(j) for j in range(plan.num_shots)]
        self._tables: dict = {}
        ys, xs = np.mgrid[0 : self.h, 0 : self.w]
        self._xr = (xs - self.w // 2).astype(float)
        self._yr = (ys - self.h // 2).astype(float)

    def _check(self, m: MotionParams):
        if m.num_shots != self.plan.num_shots:
            raise ValueError(f"motion has {m.num_shots} shots, plan has {self.plan.num_shots}")

    def _shot(self, j: int, theta: float, t) -> _Shot:
        key = (j, round(float(theta), 9))
        hit = self._tables.get(key)
        if hit is None:
            p = self._nominal[j]
            q = rotate_coords(p, theta)
            cart = cartesian_indices(q, self.h, self.w) if self.opts.fast_path else None
            table = None if cart is not None else self.gridder.table(q)
            if len(self._tables) > 8 * self.plan.num_shots:
                self._tables.clear()
            hit = self._tables[key] = (q, table, cart)
        q, table, cart = hit
        p = self._nominal[j]
        pc = p if self.translation_coords == "nominal" else q
        phase = np.exp(-1j * (pc @ np.asarray(t, dtype=float)))
        return _Shot(p, q, phase, table, cart)

    def shots(self, m: MotionParams) -> list:
        self._check(m)
        return [self._shot(j, m.rotations[j], m.translations[j]) for j in range(m.num_shots)]

    def _raw(self, images: np.ndarray, shots: list) -> list:
        """Un-phased samples per shot for a ``(c, H, W)`` stack."""
        need_grid = any(s.cart is None for s in shots)
        need_fft = any(s.cart is not None for s in shots)
        spec = self.gridder.spectrum(images) if need_grid else None
        full = fft2_centered(images) if need_fft else None
        out = []
        for s in shots:
            if s.cart is not None:
                out.append(full[:, s.cart[0], s.cart[1]])
            else:
                out.append(self.gridder.interp(spec, s.table))
        return out

    def apply(self, images: np.ndarray, m: MotionParams, shots: list | None = None) -> np.ndarray:
        """Encode a ``(c, H, W)`` stack of coil images to ``(c, M)`` plan-ordered samples."""
        shots = shots or self.shots(m)
        out = np.empty((images.shape[0], self.plan.num_samples), dtype=np.complex128)
        for s, sl, raw in zip(shots, self.plan.shot_slices, self._raw(images, shots)):
            out[:, sl] = raw * s.phase
        return out

    def adjoint(self, samples: np.ndarray, m: MotionParams, shots: list | None = None) -> np.ndarray:
        """Adjoint of :meth:`apply`: ``(c, M)`` samples to ``(c, H, W)`` coil images."""
        shots = shots or self.shots(m)
        c = samples.shape[0]
        acc = None
        cart = None
        for s, sl in zip(shots, self.plan.shot_slices):
            v = samples[:, sl] * s.phase.conj()
            if s.cart is not None:
                if cart is None:
                    cart = np.zeros((c, self.h, self.w), dtype=np.complex128)
                for i in range(c):
                    np.add.at(cart[i], s.cart, v[i])
            else:
                acc = self.gridder.spread(v, s.table, acc)
        out = np.zeros((c, self.h, self.w), dtype=np.complex128)
        if acc is not None:
            out += self.gridder.spectrum_adjoint(acc)
        if cart is not None:
            out += ifft2_centered(cart)
        return out

    def forward(self, x, m, maps) -> np.ndarray:
        return self.apply(maps * x, m)

    def adjoint_x(self, y, m, maps) -> np.ndarray:
        return np.sum(maps.conj() * self.adjoint(y, m), axis=0)

    def motion_derivatives(self, coil_images: np.ndarray, m: MotionParams, shots: list | None = None):
        """Per shot: predicted samples and their derivatives wrt ``(theta, tx, ty)``.

        Returns a list of ``(pred, d)`` with ``pred`` of shape ``(c, M_j)`` and
        ``d`` of shape ``(3, c, M_j)``.
        """
        shots = shots or self.shots(m)
        c = coil_images.shape[0]
        stack = np.concatenate([coil_images, -1j * self._xr * coil_images, -1j * self._yr * coil_images])
        raws = self._raw(stack, shots)
        out = []
        for j, (s, raw) in enumerate(zip(shots, raws)):
            f, dkx, dky = raw[:c], raw[c : 2 * c], raw[2 * c :]
            pred = f * s.phase
            q = s.rotated
            dtheta = (dkx * (-q[:, 1]) + dky * q[:, 0]) * s.phase
            pc = s.nominal if self.translation_coords == "nominal" else q
            if self.translation_coords == "rotated":
                t = m.translations[j]
                dq_t = -q[:, 1] * t[0] + q[:, 0] * t[1]
                dtheta = dtheta - 1j * dq_t * pred
            dtx = -1j * pc[:, 0] * pred
            dty = -1j * pc[:, 1] * pred
            out.append((pred, np.stack([dtheta, dtx, dty])))
        return out


def _maps(phi, plan):
    return eval_csm(phi, plan.height, plan.width)


def _check_y(y, plan, ncoil):
    ys = samples_of(y)
    if ys.shape != (ncoil, plan.num_samples):
        raise ValueError(f"measurements shape {ys.shape} does not conform to ({ncoil}, {plan.num_samples})")
    return ys


def forward(x, m: MotionParams, phi: PolyCoeffs, plan: AcquisitionPlan, opts=DEFAULT_OPTIONS,
            translation_coords: str = "nominal") -> ForwardOutputs:
    """Predicted multi-coil samples for image ``x`` under motion ``m`` and coil model ``phi``."""
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (plan.height, plan.width):
        raise ValueError(f"image shape {x.shape} does not match plan ({plan.height}, {plan.width})")
    enc = Encoder(plan, opts, translation_coords)
    pred = enc.forward(x, m, _maps(phi, plan))
    return ForwardOutputs(Measurements(pred), plan.shot_slices)


def adjoint_x(y, m: MotionParams, phi: PolyCoeffs, plan: AcquisitionPlan, opts=DEFAULT_OPTIONS,
              translation_coords: str = "nominal") -> np.ndarray:
    ys = _check_y(y, plan, phi.num_coils)
    enc = Encoder(plan, opts, translation_coords)
    return enc.adjoint_x(ys, m, _maps(phi, plan))


def grad_x_data(y, x, m, phi, plan, gamma_t: float, sigma: float, opts=DEFAULT_OPTIONS,
                translation_coords: str = "nominal") -> np.ndarray:
    """``A^H (y - A x) / (gamma_t**2 + sigma**2)``."""
    denom = gamma_t**2 + sigma**2
    if not denom > 0:
        raise ValueError("gamma_t**2 + sigma**2 must be positive")
    ys = _check_y(y, plan, phi.num_coils)
    enc = Encoder(plan, opts, translation_coords)
    maps = _maps(phi, plan)
    r = ys - enc.forward(np.asarray(x, dtype=np.complex128), m, maps)
    return enc.adjoint_x(r, m, maps) / denom


def data_misfit(y, x, m, phi, plan, sigma: float = 1.0, opts=DEFAULT_OPTIONS, translation_coords="nominal") -> float:
    """``0.5 * ||y - A x||**2 / sigma**2``."""
    ys = _check_y(y, plan, phi.num_coils)
    enc = Encoder(plan, opts, translation_coords)
    r = ys - enc.forward(np.asarray(x, dtype=np.complex128), m, _maps(phi, plan))
    return 0.5 * float(np.vdot(r, r).real) / sigma**2


def motion_score_terms(enc: Encoder, ys, x, m, maps, sigma: float):
    """Analytic motion gradient and Gauss-Newton blocks.

    Returns ``(grad, gn)``: ``grad`` is ``(J, 3)``; ``gn`` is ``(J, 3, 3)``,
    the Gauss-Newton curvature of ``0.5 ||y - A x||**2 / sigma**2``.
    """
    derivs = enc.motion_derivatives(maps * x, m)
    J = m.num_shots
    grad = np.zeros((J, 3))
    gn = np.zeros((J, 3, 3))
    for j, ((pred, d), sl) in enumerate(zip(derivs, enc.plan.shot_slices)):
        r = ys[:, sl] - pred
        d2 = d.reshape(3, -1)
        grad[j] = np.real(d2 @ r.ravel().conj())
        gn[j] = np.real(d2.conj() @ d2.T)
    return grad / sigma**2, gn / sigma**2


def grad_m_data(y, x, m: MotionParams, phi, plan, sigma: float, mode: str = "analytic", opts=DEFAULT_OPTIONS,
                translation_coords: str = "nominal") -> np.ndarray:
    """Gradient of ``-||y - A_m x||**2 / (2 sigma**2)`` wrt ``(theta_j, tx_j, ty_j)``, shape ``(J, 3)``.

    ``mode="fd"`` uses central differences (1e-4 rad, 1e-3 px) on the gridded
    operator with the FFT shortcut disabled; it is the reference for ``"analytic"``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    ys = _check_y(y, plan, phi.num_coils)
    x = np.asarray(x, dtype=np.complex128)
    maps = _maps(phi, plan)
    if mode == "analytic":
        enc = Encoder(plan, opts, translation_coords)
        grad, _ = motion_score_terms(enc, ys, x, m, maps, sigma)
        return grad
    if mode != "fd":
        raise ValueError(f"unknown gradient mode {mode!r}")
    enc = Encoder(plan, NufftOptions(opts.oversamp, opts.width, opts.beta, opts.guard, fast_path=False),
                  translation_coords)
    base = m.as_array()
    grad = np.zeros_like(base)
    steps = (FD_STEP_THETA, FD_STEP_T, FD_STEP_T)

    def misfit(arr):
        r = ys - enc.forward(x, MotionParams.from_array(arr), maps)
        return 0.5 * float(np.vdot(r, r).real) / sigma**2

    for j in range(base.shape[0]):
        for k in range(3):
            hi, lo = base.copy(), base.copy()
            hi[j, k] += steps[k]
            lo[j, k] -= steps[k]
            grad[j, k] = -(misfit(hi) - misfit(lo)) / (2 * steps[k])
    return grad


def phi_score(enc: Encoder, ys, x, m, maps, order: int, basis: str, sigma: float) -> np.ndarray:
    r = ys - enc.forward(x, m, maps)
    z = enc.adjoint(r, m)
    return project_csm(z * np.conj(x)[None], order, basis) / sigma**2


def grad_phi_data(y, x, m, phi: PolyCoeffs, plan, sigma: float, opts=DEFAULT_OPTIONS,
                  translation_coords: str = "nominal") -> np.ndarray:
    """Gradient of ``-||y - A_phi x||**2 / (2 sigma**2)`` wrt the real coefficients, shaped like ``phi.coeffs``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    ys = _check_y(y, plan, phi.num_coils)
    enc = Encoder(plan, opts, translation_coords)
    x = np.asarray(x, dtype=np.complex128)
    return phi_score(enc, ys, x, m, _maps(phi, plan), phi.order, phi.basis, sigma)


def phi_gauss_newton(x, order: int, basis: str, sampling_fraction: float, sigma: float) -> np.ndarray:
    """Approximate curvature ``rho * B^T diag(|x|^2) B / sigma**2`` shared by every coil and part.

    Exact for full sampling without motion (unitary encoding); ``rho`` scales it
    for undersampled plans.
    """
    h, w = x.shape
    b = csm_basis(h, w, order, basis)
    wts = (np.abs(x) ** 2).ravel()
    return sampling_fraction * (b.T * wts) @ b / sigma**2


def phi_gauss_newton_exact(enc: Encoder, x, m, order: int, basis: str, sigma: float) -> np.ndarray:
    """Exact Gauss-Newton curvature over one coil's ``(re, im)`` coefficients, ``(2K, 2K)``.

    The Jacobian ``A_m(b_k x)`` does not depend on the coil, so one matrix serves all coils.
    """
    h, w = x.shape
    b = csm_basis(h, w, order, basis)
    jac = enc.apply(b.T.reshape(-1, h, w) * x[None], m)
    g = (jac.conj() @ jac.T) / sigma**2
    return np.block([[g.real, -g.imag], [g.imag, g.real]])
