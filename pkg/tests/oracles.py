"""Independent reference computations used by the tests."""

from __future__ import annotations

import numpy as np

from jsmoco.forward import Encoder
from jsmoco.geometry import MotionParams


def _shot_scores(enc: Encoder, ys, coil_images, j, m_arr, thetas, txs, tys):
    """Residual over a (theta, tx, ty) grid for shot ``j``; other shots are irrelevant to it."""
    sl = enc.plan.shot_slices[j]
    y = ys[:, sl]
    p = enc.plan.shot_coords(j)
    # e^{-j p.t} factorises over the two translation axes
    ex = np.exp(-1j * np.outer(p[:, 0], txs))
    ey = np.exp(-1j * np.outer(p[:, 1], tys))
    out = np.empty((len(thetas), len(txs), len(tys)))
    for a, th in enumerate(thetas):
        arr = m_arr.copy()
        arr[j] = (th, 0.0, 0.0)
        raw = enc.apply(coil_images, MotionParams.from_array(arr))[:, sl]
        g = np.sum(np.conj(y) * raw, axis=0)
        cross = np.einsum("s,sx,sy->xy", g, ex, ey)
        out[a] = np.vdot(y, y).real + np.vdot(raw, raw).real - 2 * cross.real
    return out


def grid_search_motion(ys, x, maps, plan, m_true: MotionParams, step_deg=0.05, step_px=0.05,
                       span_deg=3.0, span_px=3.0, coarse=(0.5, 0.25), window=0.6):
    """Brute-force per-shot motion with true image and coil maps.

    A coarse grid locates the basin, then a grid at ``step_deg``/``step_px``
    around it gives the estimate. Shot 0 is the reference and stays at zero.
    """
    enc = Encoder(plan)
    coil_images = maps * x
    est = np.zeros((plan.num_shots, 3))
    m_arr = m_true.as_array() * 0.0
    for j in range(1, plan.num_shots):
        th = np.radians(np.arange(-span_deg, span_deg + 1e-9, coarse[0]))
        tt = np.arange(-span_px, span_px + 1e-9, coarse[1])
        sc = _shot_scores(enc, ys, coil_images, j, m_arr, th, tt, tt)
        a, b, c = np.unravel_index(np.argmin(sc), sc.shape)
        c_th, c_tx, c_ty = np.degrees(th[a]), tt[b], tt[c]
        fth = np.radians(np.round((c_th + np.arange(-window, window + 1e-9, step_deg)) / step_deg) * step_deg)
        ftx = np.round((c_tx + np.arange(-window, window + 1e-9, step_px)) / step_px) * step_px
        fty = np.round((c_ty + np.arange(-window, window + 1e-9, step_px)) / step_px) * step_px
        sc = _shot_scores(enc, ys, coil_images, j, m_arr, fth, ftx, fty)
        a, b, c = np.unravel_index(np.argmin(sc), sc.shape)
        est[j] = (fth[a], ftx[b], fty[c])
    return MotionParams.from_array(est)


def gaussian_posterior_mean(enc: Encoder, m, maps, y, x_star, prior_var, like_var):
    """Dense solve of ``(I/prior_var + A^H A/like_var) mu = x_star/prior_var + A^H y/like_var``."""
    h, w = x_star.shape
    n = h * w
    cols = []
    for k in range(n):
        e = np.zeros(n, dtype=np.complex128)
        e[k] = 1.0
        cols.append(enc.adjoint_x(enc.forward(e.reshape(h, w), m, maps), m, maps).ravel())
    gram = np.array(cols).T
    lhs = np.eye(n) / prior_var + gram / like_var
    rhs = x_star.ravel() / prior_var + enc.adjoint_x(y, m, maps).ravel() / like_var
    return np.linalg.solve(lhs, rhs).reshape(h, w)


def forward_dft(x, m: MotionParams, maps, plan):
    """Forward model by direct summation, shot by shot, sharing no code with the gridding path."""
    from jsmoco.nufft import dft_direct

    out = np.empty((maps.shape[0], plan.num_samples), dtype=np.complex128)
    for j, sl in enumerate(plan.shot_slices):
        p = plan.shot_coords(j)
        th = m.rotations[j]
        c, s = np.cos(th), np.sin(th)
        q = p @ np.array([[c, -s], [s, c]]).T
        phase = np.exp(-1j * (p @ m.translations[j]))
        for i in range(maps.shape[0]):
            out[i, sl] = dft_direct(maps[i] * x, q) * phase
    return out
