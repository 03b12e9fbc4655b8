"""Kernel backend selection.

The compiled Cython extension is used when it imports; otherwise (or when
``JSMOCO_PURE_PYTHON=1``) the numpy implementations are used. ``BACKEND``
names the active one.
"""
import os

from . import _kernels_py

if os.environ.get("JSMOCO_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

interp = _impl.interp
spread = _impl.spread
dft = _impl.dft
dft_adjoint = _impl.dft_adjoint


def backends():
    """Map of available backend name to kernel module."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
