import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from ddr_poincare import _kernels_py, kernels
from ddr_poincare.polyspace import exponents


def compiled():
    try:
        return importlib.import_module("ddr_poincare._kernels")
    except ImportError:
        pytest.skip("compiled extension not built")


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_vandermonde_agrees(rng):
    K = compiled()
    xi = rng.uniform(-1, 1, (50, 3))
    ex = np.asarray(exponents(3, 4))
    assert np.allclose(K.vandermonde(xi, ex), _kernels_py.vandermonde(xi, ex), rtol=1e-14, atol=0)


def test_vandermonde_accepts_readonly(rng):
    K = compiled()
    xi = rng.uniform(-1, 1, (5, 2))
    xi.setflags(write=False)
    ex = np.asarray(exponents(2, 2))
    ex.setflags(write=False)
    assert K.vandermonde(xi, ex).shape == (5, 6)


def test_whitney_local_agrees(rng):
    K = compiled()
    x = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
    coords = x[None] + 0.2 * rng.uniform(-1, 1, (20, 4, 3))
    for a, b in zip(K.whitney_local(coords), _kernels_py.whitney_local(coords)):
        assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()


def test_fallback_selected_by_env():
    out = subprocess.run([sys.executable, "-c", "from ddr_poincare import kernels; print(kernels.BACKEND)"],
                         env={**os.environ, "DDR_PURE_PYTHON": "1"}, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
