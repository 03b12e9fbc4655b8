import os
import subprocess
import sys

import numpy as np
import pytest

from jsmoco import _kernels_py, kernels
from jsmoco.geometry import cartesian_coords, rotate_coords
from jsmoco.nufft import get_gridder

compiled = pytest.mark.skipif("cython" not in kernels.backends(), reason="extension not built")


def workload(seed=0):
    rng = np.random.default_rng(seed)
    g = get_gridder(12, 10)
    coords = rotate_coords(cartesian_coords(12, 10), 0.3)
    tab = g.table(coords)
    grid = rng.normal(size=(2, g.k1, g.k2)) + 1j * rng.normal(size=(2, g.k1, g.k2))
    samples = rng.normal(size=(2, coords.shape[0])) + 1j * rng.normal(size=(2, coords.shape[0]))
    image = rng.normal(size=(12, 10)) + 1j * rng.normal(size=(12, 10))
    return g, tab, grid, samples, image, coords


@compiled
def test_backends_agree():
    cy = kernels.backends()["cython"]
    g, tab, grid, samples, image, coords = workload()
    args = (tab.iy, tab.wy, tab.ix, tab.wx)
    pairs = [
        (cy.interp(grid, *args), _kernels_py.interp(grid, *args)),
        (cy.spread(samples, *args, np.zeros_like(grid)), _kernels_py.spread(samples, *args, np.zeros_like(grid))),
        (cy.dft(image, coords), _kernels_py.dft(image, coords)),
        (cy.dft_adjoint(samples[0], coords, 12, 10), _kernels_py.dft_adjoint(samples[0], coords, 12, 10)),
    ]
    for a, b in pairs:
        assert np.linalg.norm(a - b) <= 1e-13 * np.linalg.norm(b)


@pytest.mark.parametrize("name", sorted(kernels.backends()))
def test_spread_is_transpose_of_interp(name):
    mod = kernels.backends()[name]
    g, tab, grid, samples, *_ = workload(1)
    args = (tab.iy, tab.wy, tab.ix, tab.wx)
    lhs = np.vdot(samples, mod.interp(grid, *args))
    rhs = np.vdot(mod.spread(samples, *args, np.zeros_like(grid)), grid)
    assert abs(lhs - rhs) < 1e-10 * abs(lhs)


def test_pure_python_selected_by_env():
    env = dict(os.environ, JSMOCO_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from jsmoco import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pure_python_pipeline_matches_default():
    code = (
        "import numpy as np\n"
        "from jsmoco.selftest import random_instance\n"
        "from jsmoco.forward import forward\n"
        "x, m, phi, plan = random_instance(16, 2, 2, 2, 0)\n"
        "np.save('out.npy', forward(x, m, phi, plan).predicted.samples)\n"
    )
    results = []
    for flag in ("1", "0"):
        cwd = os.path.join(os.environ.get("TMPDIR", "/tmp"), f"jsmoco_kernel_{flag}_{os.getpid()}")
        os.makedirs(cwd, exist_ok=True)
        env = dict(os.environ, JSMOCO_PURE_PYTHON=flag)
        subprocess.run([sys.executable, "-c", code], env=env, cwd=cwd, check=True)
        results.append(np.load(os.path.join(cwd, "out.npy")))
    assert np.allclose(results[0], results[1], rtol=0, atol=1e-12 * np.abs(results[1]).max())
