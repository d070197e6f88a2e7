import os
import subprocess
import sys

import numpy as np
import pytest

from edgepriv import kernels


def _backends():
    return [b for b in ("cython", "python") if b in kernels.BACKENDS]


def test_python_backend_always_available():
    assert "python" in kernels.BACKENDS
    assert kernels.BACKEND in kernels.BACKENDS


@pytest.mark.parametrize("name", _backends())
def test_rk4_solves_scalar_decay(name):
    rk4 = kernels.get_backend(name).rk4_affine
    M = np.array([[-1.0]])
    out = rk4(M, np.zeros((21, 1)), np.array([1.0]), 0.1, 10)
    assert out.shape == (11, 1)
    assert abs(out[-1, 0] - np.exp(-1.0)) < 1e-6


@pytest.mark.parametrize("name", _backends())
def test_rk4_is_exact_for_cubic_forcing(name):
    # z' = t^3 integrates exactly under classical RK4
    rk4 = kernels.get_backend(name).rk4_affine
    h, n = 0.1, 10
    t = np.linspace(0, 1, 2 * n + 1)
    out = rk4(np.zeros((1, 1)), (t**3)[:, None], np.zeros(1), h, n)
    assert abs(out[-1, 0] - 0.25) < 1e-14


def test_backends_agree():
    if len(_backends()) < 2:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(0)
    a, b = (kernels.get_backend(x) for x in ("cython", "python"))
    for d in (1, 3, 8, 20):
        M = rng.normal(size=(d, d))
        G = rng.normal(size=(41, d))
        z0 = rng.normal(size=d)
        assert np.allclose(a.rk4_affine(M, G, z0, 0.01, 20), b.rk4_affine(M, G, z0, 0.01, 20), rtol=1e-13, atol=1e-13)
        W = rng.normal(size=(d, d)) / d
        assert np.allclose(a.iterate_linear(W, z0, 30), b.iterate_linear(W, z0, 30), rtol=1e-12, atol=1e-13)


def test_shape_errors():
    with pytest.raises(ValueError):
        kernels.get_backend("python").rk4_affine(np.eye(2), np.zeros((3, 2)), np.zeros(2), 0.1, 5)
    with pytest.raises(ValueError, match="not available"):
        kernels.get_backend("fortran")


def test_env_var_forces_fallback():
    code = "from edgepriv import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, EDGEPRIV_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
