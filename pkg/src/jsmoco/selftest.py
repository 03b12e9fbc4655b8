"""Built-in numerical self checks (adjointness, NUFFT accuracy, gradients)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import complex_normal, make_rng
from .csm import PolyCoeffs, eval_csm, fit_csm
from .forward import Encoder, data_misfit, grad_m_data, grad_phi_data, grad_x_data
from .geometry import MotionParams, cartesian_coords, make_plan, rotate_coords
from .nufft import dft_direct, fft2_centered, ifft2_centered, nufft_adjoint, nufft_forward

FD_STEP = 1e-5


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tol)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<18} rel_err={self.error:.3e}  tol={self.tol:.0e}"


def fd_gradient(fun, v, step):
    """Central differences of a scalar ``fun`` over a real vector ``v``."""
    v = np.asarray(v, dtype=float)
    steps = np.broadcast_to(np.asarray(step, dtype=float), v.shape)
    g = np.zeros_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e.flat[i] = steps.flat[i]
        g.flat[i] = (fun(v + e) - fun(v - e)) / (2 * steps.flat[i])
    return g


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(float).tiny))


def adjoint_gap(enc: Encoder, m, rng, c: int, perturb: float = 0.0) -> float:
    """``|<Ax, y> - <x, A^H y>| / (||Ax|| ||y||)`` for random coil images and samples."""
    h, w = enc.h, enc.w
    x = complex_normal(rng, (c, h, w))
    y = complex_normal(rng, (c, enc.plan.num_samples))
    ax = enc.apply(x, m)
    ahy = enc.adjoint(y, m)
    if perturb:
        ahy = ahy * (1.0 + perturb)
    return float(abs(np.vdot(y, ax) - np.vdot(ahy, x)) / (np.linalg.norm(ax) * np.linalg.norm(y)))


def random_instance(size: int, coils: int, order: int, shots: int, seed: int, accel: float = 1.0):
    """Random ``(x, m, phi, plan)`` with small nonzero motion, for gradient and adjoint checks."""
    rng = make_rng(seed, 0x5E1F)
    plan = make_plan(size, size, accel, 2 if accel > 1 else 0, num_shots=shots, ordering="interleaved", seed=seed)
    x = complex_normal(rng, (size, size))
    arr = np.column_stack([rng.uniform(-0.05, 0.05, shots), rng.uniform(-1.0, 1.0, (shots, 2))])
    arr[0] = 0.0
    phi = PolyCoeffs(rng.normal(0.0, 0.5, (coils, 2, order + 1, order + 1)))
    return x, MotionParams.from_array(arr), phi, plan


def check_fft_unitary(seed=0) -> CheckResult:
    x = complex_normal(make_rng(seed, 1), (32, 32))
    k = fft2_centered(x)
    err = max(abs(np.linalg.norm(k) - np.linalg.norm(x)) / np.linalg.norm(x), rel_err(ifft2_centered(k), x))
    return CheckResult("fft_unitary", err, 1e-12)


def check_nufft_oracle(seed=0, trials: int = 5) -> CheckResult:
    rng = make_rng(seed, 2)
    worst = 0.0
    for _ in range(trials):
        x = complex_normal(rng, (32, 32))
        coords = rotate_coords(cartesian_coords(32, 32), rng.uniform(-np.pi, np.pi))
        worst = max(worst, rel_err(nufft_forward(x, coords), dft_direct(x, coords)))
    return CheckResult("nufft_vs_dft", worst, 1e-5)


def check_nufft_adjoint(seed=0) -> CheckResult:
    rng = make_rng(seed, 3)
    coords = rotate_coords(cartesian_coords(32, 32), 0.3)
    x = complex_normal(rng, (32, 32))
    y = complex_normal(rng, (coords.shape[0],))
    ax = nufft_forward(x, coords)
    gap = abs(np.vdot(y, ax) - np.vdot(nufft_adjoint(y, coords, 32, 32), x))
    return CheckResult("nufft_adjoint", float(gap / (np.linalg.norm(ax) * np.linalg.norm(y))), 1e-6)


def check_forward_adjoint(seed=0, perturb: float = 0.0) -> CheckResult:
    _, m, _, plan = random_instance(32, 4, 2, 4, seed)
    enc = Encoder(plan)
    gap = adjoint_gap(enc, m, make_rng(seed, 4), 4, perturb)
    return CheckResult("forward_adjoint", gap, 1e-6)


def _grad_instance(seed):
    x, m, phi, plan = random_instance(16, 2, 2, 2, seed)
    enc = Encoder(plan)
    rng = make_rng(seed, 5)
    # measurements from a nearby state so the residual is nonzero
    y = enc.forward(x + 0.1 * complex_normal(rng, x.shape), m, eval_csm(phi, 16, 16))
    return x, m, phi, plan, y


def check_grad_x(seed=0) -> CheckResult:
    x, m, phi, plan, y = _grad_instance(seed)
    g = grad_x_data(y, x, m, phi, plan, 0.5, 0.1)
    var = 0.5**2 + 0.1**2

    def f(v):
        z = v[: x.size].reshape(x.shape) + 1j * v[x.size:].reshape(x.shape)
        return -data_misfit(y, z, m, phi, plan, np.sqrt(var))

    v = np.concatenate([x.real.ravel(), x.imag.ravel()])
    fd = fd_gradient(f, v, FD_STEP)
    return CheckResult("grad_x", rel_err(np.concatenate([g.real.ravel(), g.imag.ravel()]), fd), 1e-4)


def check_grad_m(seed=0) -> CheckResult:
    x, m, phi, plan, y = _grad_instance(seed)
    ga = grad_m_data(y, x, m, phi, plan, 1.0, mode="analytic")
    gf = grad_m_data(y, x, m, phi, plan, 1.0, mode="fd")
    return CheckResult("grad_m", rel_err(ga, gf), 1e-4)


def check_grad_phi(seed=0) -> CheckResult:
    x, m, phi, plan, y = _grad_instance(seed)
    g = grad_phi_data(y, x, m, phi, plan, 1.0)

    def f(v):
        return -data_misfit(y, x, m, PolyCoeffs(v.reshape(phi.coeffs.shape)), plan, 1.0)

    fd = fd_gradient(f, phi.coeffs.ravel(), FD_STEP)
    return CheckResult("grad_phi", rel_err(g.ravel(), fd), 1e-4)


def check_csm_roundtrip(seed=0) -> CheckResult:
    phi = PolyCoeffs(make_rng(seed, 6).normal(size=(3, 2, 4, 4)))
    back = fit_csm(eval_csm(phi, 24, 24), 3)
    return CheckResult("csm_fit_roundtrip", rel_err(back.coeffs, phi.coeffs), 1e-9)


def run_selftest(seed: int = 0, perturb_adjoint: float = 0.0) -> list[CheckResult]:
    """Run every check; ``perturb_adjoint`` scales the encoder adjoint as a negative control."""
    return [
        check_fft_unitary(seed),
        check_nufft_oracle(seed),
        check_nufft_adjoint(seed),
        check_forward_adjoint(seed, perturb_adjoint),
        check_grad_x(seed),
        check_grad_m(seed),
        check_grad_phi(seed),
        check_csm_roundtrip(seed),
    ]


__all__ = [
    "CheckResult",
    "FD_STEP",
    "adjoint_gap",
    "fd_gradient",
    "random_instance",
    "rel_err",
    "run_selftest",
]
