import numpy as np
import pytest
import scipy.linalg as sla

from ddr_poincare.mesh import gen_hex_mesh, gen_voided_cube_mesh, single_tet_mesh
from ddr_poincare.ddr import DDRComplex

_MESHES = {}
_COMPLEXES = {}


def mesh(name):
    if name not in _MESHES:
        kind, _, n = name.partition(":")
        _MESHES[name] = {"tet": lambda: single_tet_mesh(),
                         "hex": lambda: gen_hex_mesh(int(n)),
                         "voided": lambda: gen_voided_cube_mesh(int(n))}[kind]()
    return _MESHES[name]


def ddr(name, k):
    key = (name, k)
    if key not in _COMPLEXES:
        _COMPLEXES[key] = DDRComplex(mesh(name), k)
    return _COMPLEXES[key]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def quotient_constant(A, GX, GY):
    """Independent oracle: 1/sqrt of the smallest positive eigenvalue of (A^T GY A, GX)."""
    w = sla.eigh(A.T @ GY @ A, GX, eigvals_only=True)
    pos = w[w > 1e-9 * w.max()]
    return 1 / np.sqrt(pos.min()), len(w) - len(pos)
