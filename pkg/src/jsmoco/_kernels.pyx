# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled gridding kernels: tensor-product interpolation, its transpose, and direct DFT.

Accumulation order is fixed (sample-major, then taps), so results are bitwise
reproducible. Index arrays must already be wrapped into the grid.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

ctypedef double complex cplx


def interp(const cplx[:, :, ::1] grid,
           const cnp.int64_t[:, ::1] iy, const double[:, ::1] wy,
           const cnp.int64_t[:, ::1] ix, const double[:, ::1] wx):
    cdef Py_ssize_t nc = grid.shape[0], m = iy.shape[0]
    cdef Py_ssize_t wdy = iy.shape[1], wdx = ix.shape[1]
    cdef Py_ssize_t c, s, a, b, r, q
    cdef double ar, ai, rr, ri, wt
    # interleaved (re, im) view of the grid
    cdef const double[:, :, ::1] g = np.asarray(grid).view(np.float64)
    out = np.empty((nc, m), dtype=np.complex128)
    cdef double[:, ::1] o = out.view(np.float64)
    with nogil:
        for c in range(nc):
            for s in range(m):
                ar = 0.0
                ai = 0.0
                for a in range(wdy):
                    r = iy[s, a]
                    rr = 0.0
                    ri = 0.0
                    for b in range(wdx):
                        q = 2 * ix[s, b]
                        wt = wx[s, b]
                        rr = rr + wt * g[c, r, q]
                        ri = ri + wt * g[c, r, q + 1]
                    ar = ar + wy[s, a] * rr
                    ai = ai + wy[s, a] * ri
                o[c, 2 * s] = ar
                o[c, 2 * s + 1] = ai
    return out


def spread(const cplx[:, ::1] samples,
           const cnp.int64_t[:, ::1] iy, const double[:, ::1] wy,
           const cnp.int64_t[:, ::1] ix, const double[:, ::1] wx,
           cplx[:, :, ::1] out):
    """Accumulate ``samples`` onto ``out`` (in place) with the interpolation weights."""
    cdef Py_ssize_t nc = samples.shape[0], m = iy.shape[0]
    cdef Py_ssize_t wdy = iy.shape[1], wdx = ix.shape[1]
    cdef Py_ssize_t c, s, a, b, r, q
    cdef double vr, vi, wt
    cdef const double[:, ::1] sv = np.asarray(samples).view(np.float64)
    cdef double[:, :, ::1] g = np.asarray(out).view(np.float64)
    with nogil:
        for c in range(nc):
            for s in range(m):
                for a in range(wdy):
                    r = iy[s, a]
                    vr = wy[s, a] * sv[c, 2 * s]
                    vi = wy[s, a] * sv[c, 2 * s + 1]
                    for b in range(wdx):
                        q = 2 * ix[s, b]
                        wt = wx[s, b]
                        g[c, r, q] = g[c, r, q] + wt * vr
                        g[c, r, q + 1] = g[c, r, q + 1] + wt * vi
    return out


def dft(const cplx[:, ::1] image, const double[:, ::1] coords):
    """Unnormalized ``sum_r image[r] exp(-j (kx x_r + ky y_r))`` with centered pixel coordinates."""
    cdef Py_ssize_t h = image.shape[0], w = image.shape[1], m = coords.shape[0]
    cdef Py_ssize_t s, yy, xx
    cdef double kx, ky, rr, ri, ar, ai, pr, pi_
    out = np.empty(m, dtype=np.complex128)
    cdef cplx[::1] o = out
    re_arr = np.ascontiguousarray(np.real(image))
    im_arr = np.ascontiguousarray(np.imag(image))
    cdef const double[:, ::1] zr = re_arr
    cdef const double[:, ::1] zi = im_arr
    cx_arr = np.empty(w)
    sx_arr = np.empty(w)
    cdef double[::1] cxv = cx_arr
    cdef double[::1] sxv = sx_arr
    cdef Py_ssize_t cx = w // 2, cy = h // 2
    with nogil:
        for s in range(m):
            kx = coords[s, 0]
            ky = coords[s, 1]
            for xx in range(w):
                cxv[xx] = cos(kx * (xx - cx))
                sxv[xx] = sin(kx * (xx - cx))
            ar = 0.0
            ai = 0.0
            for yy in range(h):
                rr = 0.0
                ri = 0.0
                # row sum of image * exp(-j kx x)
                for xx in range(w):
                    rr = rr + zr[yy, xx] * cxv[xx] + zi[yy, xx] * sxv[xx]
                    ri = ri + zi[yy, xx] * cxv[xx] - zr[yy, xx] * sxv[xx]
                pr = cos(ky * (yy - cy))
                pi_ = sin(ky * (yy - cy))
                ar = ar + rr * pr + ri * pi_
                ai = ai + ri * pr - rr * pi_
            o[s] = ar + 1j * ai
    return out


def dft_adjoint(const cplx[::1] samples, const double[:, ::1] coords, Py_ssize_t h, Py_ssize_t w):
    """Transpose-conjugate of :func:`dft` (unnormalized)."""
    cdef Py_ssize_t m = coords.shape[0]
    cdef Py_ssize_t s, yy, xx
    cdef double kx, ky, vr, vi, pr, pi_, br, bi
    out_r = np.zeros((h, w))
    out_i = np.zeros((h, w))
    cdef double[:, ::1] orr = out_r
    cdef double[:, ::1] oi = out_i
    cx_arr = np.empty(w)
    sx_arr = np.empty(w)
    cdef double[::1] cxv = cx_arr
    cdef double[::1] sxv = sx_arr
    cdef Py_ssize_t cx = w // 2, cy = h // 2
    with nogil:
        for s in range(m):
            kx = coords[s, 0]
            ky = coords[s, 1]
            vr = samples[s].real
            vi = samples[s].imag
            for xx in range(w):
                cxv[xx] = cos(kx * (xx - cx))
                sxv[xx] = sin(kx * (xx - cx))
            for yy in range(h):
                pr = cos(ky * (yy - cy))
                pi_ = sin(ky * (yy - cy))
                br = vr * pr - vi * pi_
                bi = vr * pi_ + vi * pr
                for xx in range(w):
                    orr[yy, xx] = orr[yy, xx] + br * cxv[xx] - bi * sxv[xx]
                    oi[yy, xx] = oi[yy, xx] + br * sxv[xx] + bi * cxv[xx]
    return out_r + 1j * out_i
