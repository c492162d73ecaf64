"""Collapsed (Duffy) Gauss rules on segments, triangles and tetrahedra.

Polytopes are integrated through their simplicial fans, so every rule here is
exact for polynomials of the requested total degree on each simplex.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEGREE = 14


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))

    @property
    def measure(self):
        return float(self.weights.sum())


def _check(degree, max_degree):
    if degree < 0:
        degree = 0
    limit = MAX_DEGREE if max_degree is None else max_degree
    if degree > limit:
        raise QuadratureError(f"unsupported quadrature degree {degree} (max {limit})")
    return degree


@lru_cache(maxsize=None)
def gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def reference_segment(degree):
    n = max(1, (degree + 2) // 2)
    x, w = gauss01(n)
    lam = np.stack([1.0 - x, x], axis=1)
    return lam, w


@lru_cache(maxsize=None)
def reference_triangle(degree):
    # barycentric points with weights normalized to sum 1
    n = max(1, -(-(degree + 2) // 2))
    x, w = gauss01(n)
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    u, v, wu, wv = u.ravel(), v.ravel(), wu.ravel(), wv.ravel()
    l1 = u
    l2 = v * (1.0 - u)
    lam = np.stack([1.0 - l1 - l2, l1, l2], axis=1)
    return lam, 2.0 * wu * wv * (1.0 - u)


@lru_cache(maxsize=None)
def reference_tetrahedron(degree):
    n = max(1, -(-(degree + 3) // 2))
    x, w = gauss01(n)
    u, v, s = (a.ravel() for a in np.meshgrid(x, x, x, indexing="ij"))
    wu, wv, ws = (a.ravel() for a in np.meshgrid(w, w, w, indexing="ij"))
    l1 = u
    l2 = v * (1.0 - u)
    l3 = s * (1.0 - u) * (1.0 - v)
    lam = np.stack([1.0 - l1 - l2 - l3, l1, l2, l3], axis=1)
    return lam, 6.0 * wu * wv * ws * (1.0 - u) ** 2 * (1.0 - v)


def segment_rule(a, b, degree, max_degree=None):
    degree = _check(degree, max_degree)
    lam, w = reference_segment(degree)
    a, b = np.asarray(a, float), np.asarray(b, float)
    return Rule(lam @ np.stack([a, b]), w * np.linalg.norm(b - a))


def simplex_rule(simplices, degree, max_degree=None):
    """Rule on a union of triangles (m, 3, 3) or tetrahedra (m, 4, 3)."""
    degree = _check(degree, max_degree)
    simplices = np.asarray(simplices, float)
    if simplices.ndim == 2:
        simplices = simplices[None]
    nv = simplices.shape[1]
    if nv == 3:
        lam, w = reference_triangle(degree)
        e1 = simplices[:, 1] - simplices[:, 0]
        e2 = simplices[:, 2] - simplices[:, 0]
        meas = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
    elif nv == 4:
        lam, w = reference_tetrahedron(degree)
        jac = simplices[:, 1:] - simplices[:, :1]
        meas = np.abs(np.linalg.det(jac)) / 6.0
    else:
        raise QuadratureError("simplices must have 3 or 4 vertices")
    pts = np.einsum("qa,mad->mqd", lam, simplices).reshape(-1, 3)
    wts = (meas[:, None] * w[None, :]).ravel()
    return Rule(pts, wts)
