"""Joint posterior sampling of image, rigid motion and coil polynomials.

Each noise level of a geometric (variance-exploding) schedule runs a few Gibbs
sweeps. A sweep takes one Langevin step on the image, then on the motion
parameters, then on the coil coefficients, each conditioned on the latest
values of the other two. The likelihood uses the annealed variance
``gamma_t**2 + sigma**2`` with ``gamma_t = gamma_scale * sigma_t`` for all three
blocks.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import scipy.linalg

from .core import complex_normal, make_rng, samples_of
from .csm import DEFAULT_POLY_ORDER, PolyCoeffs, eval_csm, normalize_csm_gauge
from .forward import Encoder, motion_score_terms, phi_gauss_newton, phi_gauss_newton_exact, phi_score
from .geometry import AcquisitionPlan, MotionParams, wrap_angle
from .nufft import DEFAULT_OPTIONS, NufftOptions
from .priors import NoiseSchedule, ve_schedule
from .sim import zero_fill_recon

log = logging.getLogger(__name__)

# RNG sub-streams, one per parameter block
_INIT, _X, _M, _PHI = 1, 2, 3, 4


class SamplerDivergence(RuntimeError):
    """Raised when the data residual blows up; carries the trace so far."""

    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass
class SamplerConfig:
    """Sampler settings.

    Step policies:

    ``"annealed"``
        scalar steps ``lambda_x = eps_x sigma_t**2 / sigma_min**2``,
        ``lambda_m = eps_m sigma_t / sigma_max``, ``lambda_phi = eps_phi sigma_t / sigma_max``.
    ``"gauss-newton"``
        the image keeps the annealed step; motion and coil blocks use Langevin
        preconditioned by their Gauss-Newton curvature with dimensionless steps
        ``gn_step_m`` and ``gn_step_phi`` (1 = full Newton step). The coil
        curvature is either ``"exact"`` (recomputed at the first inner loop of
        every timestep) or the cheap ``"diagonal"`` sampling-fraction model.

    ``eps_x=None`` means ``2e-5 * dynamic_range**2`` with the dynamic range taken
    from the zero-filled reconstruction.
    """

    sigma_min: float = 0.01
    sigma_max: float = 1.0
    T: int = 200
    inner_loops: int = 3
    poly_order: int = DEFAULT_POLY_ORDER
    csm_basis: str = "monomial"
    step_policy: str = "annealed"
    eps_x: float | None = None
    eps_m: float = 1e-4
    eps_phi: float = 1e-5
    gn_step_m: float = 0.5
    gn_step_phi: float = 0.5
    phi_curvature: str = "exact"
    max_step_theta: float = math.radians(0.5)
    max_step_t: float = 0.5
    sigma_m_init: float = 0.1
    sigma_phi_init: float = 0.01
    phi_prior_sigma: float | None = None
    noise_sigma: float = 0.0
    gamma_scale: float = 1.0
    seed: int = 0
    gauge_fix: bool = True
    update_x: bool = True
    update_m: bool = True
    update_phi: bool = True
    langevin_noise: bool = True
    translation_phase_coords: str = "nominal"
    trace_every: int = 1
    divergence_factor: float = 1e6
    deterministic: bool = True
    nufft_width: int = DEFAULT_OPTIONS.width
    nufft_oversamp: float = DEFAULT_OPTIONS.oversamp

    def __post_init__(self):
        if self.inner_loops < 1:
            raise ValueError("inner_loops must be >= 1")
        if self.step_policy not in ("annealed", "gauss-newton"):
            raise ValueError(f"unknown step policy {self.step_policy!r}")
        if self.phi_curvature not in ("exact", "diagonal"):
            raise ValueError(f"unknown coil curvature {self.phi_curvature!r}")
        for name in ("eps_m", "eps_phi", "gn_step_m", "gn_step_phi"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eps_x is not None and not self.eps_x > 0:
            raise ValueError("eps_x must be positive")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")
        ve_schedule(self.sigma_min, self.sigma_max, self.T)

    @property
    def schedule(self) -> NoiseSchedule:
        return ve_schedule(self.sigma_min, self.sigma_max, self.T)

    @property
    def nufft_options(self) -> NufftOptions:
        return NufftOptions(oversamp=self.nufft_oversamp, width=self.nufft_width)

    @property
    def total_updates(self) -> int:
        """Parameter-update counter ``K`` after a full run: one per inner loop of every sampled level."""
        return (self.T - 1) * self.inner_loops

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sampler config fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SamplerTrace:
    rows: list = field(default_factory=list)

    def append(self, **row):
        self.rows.append(row)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r["residual"] for r in self.rows])

    def write_csv(self, path) -> None:
        if not self.rows:
            header = ["t", "n", "sigma", "residual", "phi_norm"]
            rows = []
        else:
            J = len(self.rows[0]["theta"])
            header = ["t", "n", "sigma", "residual"]
            header += [f"theta_{j}" for j in range(J)] + [f"tx_{j}" for j in range(J)]
            header += [f"ty_{j}" for j in range(J)] + ["phi_norm"]
            rows = [
                [r["t"], r["n"], repr(r["sigma"]), repr(r["residual"])]
                + [repr(v) for v in r["theta"]]
                + [repr(v) for v in r["tx"]]
                + [repr(v) for v in r["ty"]]
                + [repr(r["phi_norm"])]
                for r in self.rows
            ]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


def langevin_step(value, score, step: float, rng=None, noise: bool = True):
    """``value + step * score + sqrt(2 step) * g`` with ``g`` standard normal per (real) component."""
    if not step > 0:
        raise ValueError("step must be positive")
    value = np.asarray(value)
    out = value + step * np.asarray(score)
    if noise:
        if np.iscomplexobj(value):
            out = out + complex_normal(rng, value.shape, math.sqrt(2 * step))
        else:
            out = out + math.sqrt(2 * step) * rng.standard_normal(value.shape)
    return out


def _precond_step(value, score, curvature, step, rng, noise):
    """Langevin step preconditioned by ``curvature^-1``; ``value`` is ``(..., k)`` batched over leading axes."""
    chol = scipy.linalg.cho_factor(curvature, lower=True)
    drift = scipy.linalg.cho_solve(chol, score.reshape(-1, score.shape[-1]).T).T.reshape(score.shape)
    out = value + step * drift
    if noise:
        z = rng.standard_normal(value.shape).reshape(-1, value.shape[-1]).T
        lower = np.tril(chol[0])
        out = out + math.sqrt(2 * step) * scipy.linalg.solve_triangular(lower, z, lower=True, trans="T").T.reshape(
            value.shape
        )
    return out


def _regularize(mat, floor):
    k = mat.shape[-1]
    tr = np.trace(mat) / k
    return mat + (1e-9 * tr + floor) * np.eye(k)


def sample_joint(
    y,
    plan: AcquisitionPlan,
    prior,
    config: SamplerConfig,
    x_init=None,
    m_init: MotionParams | None = None,
    phi_init: PolyCoeffs | None = None,
    callback=None,
):
    """Run the joint sampler; returns ``(x0, m, phi, trace)``.

    ``x_init``/``m_init``/``phi_init`` replace the random initial draws; a block
    whose ``update_*`` flag is off stays at its initial value throughout.
    """
    cfg = config
    ys = samples_of(y)
    ncoil = ys.shape[0]
    if ys.shape[1] != plan.num_samples:
        raise ValueError(f"measurements have {ys.shape[1]} samples, plan has {plan.num_samples}")
    if phi_init is not None and phi_init.num_coils != ncoil:
        raise ValueError("initial coil model and measurements disagree on coil count")
    J = plan.num_shots
    h, w = plan.height, plan.width
    sched = cfg.schedule
    sig = sched.sigmas
    enc = Encoder(plan, cfg.nufft_options, cfg.translation_phase_coords)

    rng_init = make_rng(cfg.seed, _INIT)
    rng_x, rng_m, rng_phi = (make_rng(cfg.seed, k) for k in (_X, _M, _PHI))

    # x first, then m, then phi, so fixing one block does not shift the others' draws
    x = complex_normal(rng_init, (h, w), sched.sigma_max)
    if x_init is not None:
        x = np.array(x_init, dtype=np.complex128)
    m_arr = rng_init.normal(0.0, cfg.sigma_m_init, (J, 3))
    if m_init is not None:
        if m_init.num_shots != J:
            raise ValueError("initial motion and plan disagree on shot count")
        m_arr = m_init.as_array().copy()
    if cfg.gauge_fix:
        m_arr[0] = 0.0
    order, basis = cfg.poly_order, cfg.csm_basis
    phi_c = rng_init.normal(0.0, cfg.sigma_phi_init, (ncoil, 2, order + 1, order + 1))
    if phi_init is not None:
        if phi_init.order != order or phi_init.basis != basis:
            raise ValueError("initial coil model does not match the configured order/basis")
        phi_c = phi_init.coeffs.copy()
    if cfg.gauge_fix and cfg.update_phi:
        phi, scale = normalize_csm_gauge(PolyCoeffs(phi_c, basis), h, w)
        phi_c = phi.coeffs.copy()
        x = x / scale

    eps_x = cfg.eps_x
    if eps_x is None:
        dr = float(np.max(np.abs(zero_fill_recon(ys, plan))))
        eps_x = 2e-5 * dr**2
    rho = plan.num_samples / (h * w)
    first_resid = None
    trace = SamplerTrace()
    m = MotionParams.from_array(m_arr)
    theta_lim = np.array([cfg.max_step_theta, cfg.max_step_t, cfg.max_step_t])
    k_counter = 0

    for ti in range(1, sched.T):
        s_t = float(sig[ti])
        var = (cfg.gamma_scale * s_t) ** 2 + cfg.noise_sigma**2
        lam_x = eps_x * s_t**2 / sched.sigma_min**2
        frac = s_t / sched.sigma_max
        phi_curv = None
        for n in range(cfg.inner_loops):
            phi = PolyCoeffs(phi_c, basis)
            maps = eval_csm(phi, h, w)
            shots = enc.shots(m)

            if cfg.update_x:
                r = ys - enc.apply(maps * x, m, shots)
                score = prior.score(x, s_t) + np.sum(maps.conj() * enc.adjoint(r, m, shots), axis=0) / var
                x = langevin_step(x, score, lam_x, rng_x, cfg.langevin_noise)

            if cfg.update_m:
                grad, gn = motion_score_terms(enc, ys, x, m, maps, math.sqrt(var))
                new = m_arr.copy()
                if cfg.step_policy == "annealed":
                    new = langevin_step(m_arr, grad, cfg.eps_m * frac, rng_m, cfg.langevin_noise)
                else:
                    for j in range(J):
                        new[j] = _precond_step(m_arr[j], grad[j], _regularize(gn[j], 1e-12), cfg.gn_step_m,
                                               rng_m, cfg.langevin_noise)
                delta = np.clip(new - m_arr, -theta_lim, theta_lim)
                m_arr = m_arr + delta
                if cfg.gauge_fix:
                    m_arr[0] = 0.0
                m_arr[:, 0] = wrap_angle(m_arr[:, 0])
                m = MotionParams.from_array(m_arr)

            r = ys - enc.apply(maps * x, m)
            resid = float(np.vdot(r, r).real)
            if not np.isfinite(resid) or (first_resid is not None and resid > cfg.divergence_factor * first_resid):
                raise SamplerDivergence(f"residual diverged at t={ti} n={n}: {resid:.3e}", trace)
            if first_resid is None:
                first_resid = max(resid, np.finfo(float).tiny)

            if cfg.update_phi:
                score = phi_score(enc, ys, x, m, maps, order, basis, math.sqrt(var))
                prior_prec = 0.0
                if cfg.phi_prior_sigma:
                    prior_prec = 1.0 / cfg.phi_prior_sigma**2
                    score = score - phi_c * prior_prec
                if cfg.step_policy == "annealed":
                    phi_c = langevin_step(phi_c, score, cfg.eps_phi * frac, rng_phi, cfg.langevin_noise)
                else:
                    kk = (order + 1) ** 2
                    if cfg.phi_curvature == "exact":
                        if phi_curv is None or n == 0:
                            curv = phi_gauss_newton_exact(enc, x, m, order, basis, math.sqrt(var))
                            phi_curv = _regularize(curv, prior_prec)
                        shape = (ncoil, 2 * kk)
                    else:
                        if phi_curv is None:
                            curv = phi_gauss_newton(x, order, basis, rho, math.sqrt(var))
                            phi_curv = _regularize(curv, prior_prec)
                        shape = (ncoil, 2, kk)
                    phi_c = _precond_step(phi_c.reshape(shape), score.reshape(shape), phi_curv,
                                          cfg.gn_step_phi, rng_phi, cfg.langevin_noise).reshape(phi_c.shape)

            if cfg.gauge_fix and cfg.update_phi:
                phi, scale = normalize_csm_gauge(PolyCoeffs(phi_c, basis), h, w)
                phi_c = phi.coeffs.copy()
                x = x / scale
            k_counter += 1

            if k_counter % cfg.trace_every == 0 or (ti == sched.T - 1 and n == cfg.inner_loops - 1):
                trace.append(
                    t=sched.T - ti,
                    n=n + 1,
                    sigma=s_t,
                    residual=resid,
                    theta=m_arr[:, 0].tolist(),
                    tx=m_arr[:, 1].tolist(),
                    ty=m_arr[:, 2].tolist(),
                    phi_norm=float(np.linalg.norm(phi_c)),
                )
            if callback is not None:
                callback(ti, n, x, m, phi_c)
        log.debug("t=%d sigma=%.3g residual=%.4g", sched.T - ti, s_t, resid)

    return x, MotionParams.from_array(m_arr), PolyCoeffs(phi_c, basis), trace
