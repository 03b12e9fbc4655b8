"""Pure-numpy versions of the compiled gridding kernels (same signatures and semantics)."""
import numpy as np


def interp(grid, iy, wy, ix, wx):
    # (c, M, Wy, Wx) gather, contracted against the separable weights
    vals = grid[:, iy[:, :, None], ix[:, None, :]]
    return np.einsum("cmab,ma,mb->cm", vals, wy, wx, optimize=True)


def spread(samples, iy, wy, ix, wx, out):
    nc, k1, k2 = out.shape
    flat = (iy[:, :, None] * k2 + ix[:, None, :]).ravel()
    w = (wy[:, :, None] * wx[:, None, :]).reshape(iy.shape[0], -1)
    for c in range(nc):
        v = (w * samples[c][:, None]).ravel()
        out[c] += (np.bincount(flat, weights=v.real, minlength=k1 * k2)
                   + 1j * np.bincount(flat, weights=v.imag, minlength=k1 * k2)).reshape(k1, k2)
    return out


def _axes(coords, h, w):
    xs = np.arange(w) - w // 2
    ys = np.arange(h) - h // 2
    ex = np.exp(-1j * np.outer(coords[:, 0], xs))
    ey = np.exp(-1j * np.outer(coords[:, 1], ys))
    return ex, ey


def dft(image, coords):
    h, w = image.shape
    ex, ey = _axes(coords, h, w)
    return np.einsum("my,yx,mx->m", ey, image, ex, optimize=True)


def dft_adjoint(samples, coords, h, w):
    ex, ey = _axes(coords, h, w)
    return np.einsum("m,my,mx->yx", samples, ey.conj(), ex.conj(), optimize=True)
