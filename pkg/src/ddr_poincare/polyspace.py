"""Scaled-monomial polynomial spaces on edges, faces and elements.

A polynomial on an entity Y is stored by its coefficients against the scaled
monomials xi^a, xi = A (x - x_Y) / h_Y, where the rows of A are an orthonormal
frame of the entity (tangent on edges, in-plane (a1, a2) with a1 x a2 = n_F on
faces, the canonical basis on elements).  Monomials are ordered by total degree,
so the basis of P^l is a prefix of the basis of P^(l+1).

Vector-valued polynomials store one block of coefficients per frame
component.  A Basis is a coefficient matrix whose columns span a (sub)space;
the Roly/cRoly/Goly/cGoly bases are universal in xi-coordinates and are cached
per (dimension, degree).
"""
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
import scipy.linalg as sla

from .kernels import vandermonde
from .quadrature import MAX_DEGREE, QuadratureError, Rule, segment_rule, simplex_rule

__all__ = [
    "Basis", "Frame", "Rule", "QuadratureError", "MAX_DEGREE",
    "dim_poly", "exponents", "scalar_basis", "vector_basis", "build_decomp",
    "l2_project", "inner", "gram", "segment_rule", "simplex_rule",
]


def dim_poly(dim, deg):
    return comb(deg + dim, dim) if deg >= 0 else 0


@lru_cache(maxsize=None)
def exponents(dim, deg):
    out = []
    for d in range(deg + 1):
        if dim == 1:
            out.append((d,))
        elif dim == 2:
            out.extend((d - j, j) for j in range(d + 1))
        else:
            for a in range(d, -1, -1):
                out.extend((a, d - a - c, c) for c in range(d - a + 1))
    arr = np.array(out, dtype=np.int64).reshape(-1, dim)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def _index(dim, deg):
    return {tuple(e): i for i, e in enumerate(exponents(dim, deg))}


@lru_cache(maxsize=None)
def diff_matrix(dim, deg, axis):
    """d/dxi_axis from P^deg to P^(deg-1) coefficients."""
    ex = exponents(dim, deg)
    idx = _index(dim, deg - 1)
    D = np.zeros((dim_poly(dim, deg - 1), len(ex)))
    for j, e in enumerate(ex):
        if e[axis] > 0:
            f = list(e)
            f[axis] -= 1
            D[idx[tuple(f)], j] = e[axis]
    D.setflags(write=False)
    return D


@lru_cache(maxsize=None)
def mul_matrix(dim, deg, axis):
    """Multiplication by xi_axis from P^deg to P^(deg+1) coefficients."""
    ex = exponents(dim, deg)
    idx = _index(dim, deg + 1)
    M = np.zeros((dim_poly(dim, deg + 1), len(ex)))
    for j, e in enumerate(ex):
        f = list(e)
        f[axis] += 1
        M[idx[tuple(f)], j] = 1.0
    M.setflags(write=False)
    return M


def _pad(coef, dim, deg_from, deg_to, ncomp):
    """Embed coefficients of ncomp-vector P^deg_from into P^deg_to."""
    n0, n1 = dim_poly(dim, deg_from), dim_poly(dim, deg_to)
    out = np.zeros((ncomp * n1, coef.shape[1]))
    for c in range(ncomp):
        out[c * n1:c * n1 + n0] = coef[c * n0:(c + 1) * n0]
    return out


@dataclass(frozen=True, eq=False)
class Frame:
    center: np.ndarray
    h: float
    axes: np.ndarray

    @property
    def dim(self):
        return self.axes.shape[0]

    def local(self, x):
        return (np.asarray(x, float) - self.center) @ self.axes.T / self.h


@dataclass(frozen=True, eq=False)
class Basis:
    """Columns of coef span a space of ncomp-vector polynomials of degree <= degree."""

    frame: Frame
    degree: int
    ncomp: int
    coef: np.ndarray

    @property
    def size(self):
        return self.coef.shape[1]

    @property
    def dim(self):
        return self.frame.dim

    @property
    def nmon(self):
        return dim_poly(self.dim, self.degree)

    def blocks(self):
        n = self.nmon
        return [self.coef[c * n:(c + 1) * n] for c in range(self.ncomp)]

    def values(self, x):
        """Scalar: (npts, m); vector: (npts, ncomp, m) in frame components."""
        x = np.atleast_2d(x)
        if self.size == 0 or self.degree < 0:
            shape = (x.shape[0], self.size) if self.ncomp == 1 else (x.shape[0], self.ncomp, self.size)
            return np.zeros(shape)
        V = vandermonde(self.frame.local(x), exponents(self.dim, self.degree))
        if self.ncomp == 1:
            return V @ self.coef
        C = self.coef.reshape(self.ncomp, self.nmon, self.size)
        return np.matmul(V, C).transpose(1, 0, 2)

    def values3d(self, x):
        """Vector values in global coordinates, (npts, 3, m)."""
        v = self.values(x)
        return np.matmul(self.frame.axes.T, v)

    def with_coef(self, coef, degree=None, ncomp=None):
        return Basis(self.frame, self.degree if degree is None else degree,
                     self.ncomp if ncomp is None else ncomp, np.asarray(coef, float))

    def take(self, cols):
        return self.with_coef(self.coef[:, cols])

    def raised(self, deg):
        if deg == self.degree:
            return self
        return self.with_coef(_pad(self.coef, self.dim, self.degree, deg, self.ncomp), degree=deg)

    def combine(self, c):
        """The single polynomial sum_j c_j b_j as a one-column basis."""
        return self.with_coef(self.coef @ np.asarray(c, float).reshape(-1, 1))


def scalar_basis(frame, deg):
    n = dim_poly(frame.dim, deg)
    return Basis(frame, max(deg, 0), 1, np.eye(max(n, dim_poly(frame.dim, 0)))[:, :n])


def vector_basis(frame, deg):
    n = dim_poly(frame.dim, deg)
    d = frame.dim
    N = dim_poly(d, max(deg, 0))
    return Basis(frame, max(deg, 0), d, np.eye(d * N)[:, : d * n] if n else np.zeros((d * N, 0)))


# ---------------------------------------------------------------- operators

def _d(B, axis, comp=0):
    n0 = B.nmon
    block = B.coef[comp * n0:(comp + 1) * n0]
    if B.degree == 0:
        return np.zeros((1, B.size))
    return diff_matrix(B.dim, B.degree, axis) @ block / B.frame.h


def _lower(B):
    return max(B.degree - 1, 0)


def _fix(coef, dim, deg_have, deg_want, ncomp):
    if deg_have == deg_want:
        return coef
    return _pad(coef, dim, deg_have, deg_want, ncomp)


def grad(B):
    dg = _lower(B)
    parts = [_fix(_d(B, a), B.dim, B.degree - 1 if B.degree else 0, dg, 1) for a in range(B.dim)]
    return B.with_coef(np.vstack(parts), degree=dg, ncomp=B.dim)


def div(B):
    dg = _lower(B)
    c = sum(_d(B, a, a) for a in range(B.dim))
    return B.with_coef(c, degree=dg, ncomp=1)


def curl(B):
    assert B.dim == 3 and B.ncomp == 3
    dg = _lower(B)
    c = np.vstack([_d(B, 1, 2) - _d(B, 2, 1), _d(B, 2, 0) - _d(B, 0, 2), _d(B, 0, 1) - _d(B, 1, 0)])
    return B.with_coef(c, degree=dg, ncomp=3)


def vrot(B):
    """Vector rotor on a face: (d2 r, -d1 r), the rotated gradient."""
    assert B.dim == 2 and B.ncomp == 1
    return B.with_coef(np.vstack([_d(B, 1), -_d(B, 0)]), degree=_lower(B), ncomp=2)


def rot(B):
    """Scalar rotor on a face: d1 z2 - d2 z1."""
    assert B.dim == 2 and B.ncomp == 2
    return B.with_coef(_d(B, 0, 1) - _d(B, 1, 0), degree=_lower(B), ncomp=1)


def xmul(B):
    """(x - x_Y) p for a scalar basis, as a vector basis of one degree higher."""
    assert B.ncomp == 1
    c = np.vstack([B.frame.h * mul_matrix(B.dim, B.degree, a) @ B.coef for a in range(B.dim)])
    return B.with_coef(c, degree=B.degree + 1, ncomp=B.dim)


def xcross(B):
    """(x - x_T) x v for a 3D vector basis."""
    assert B.dim == 3 and B.ncomp == 3
    v = B.blocks()
    m = [lambda a, blk: B.frame.h * mul_matrix(3, B.degree, a) @ blk][0]
    c = np.vstack([m(1, v[2]) - m(2, v[1]), m(2, v[0]) - m(0, v[2]), m(0, v[1]) - m(1, v[0])])
    return B.with_coef(c, degree=B.degree + 1, ncomp=3)


# ---------------------------------------------------------------- integrals

def _vals(B, x):
    return B.values(x) if B.ncomp == 1 else B.values3d(x)


def inner(A, B, rule):
    """Matrix of int_Y a_i . b_j over the rule."""
    va, vb = _vals(A, rule.points), _vals(B, rule.points)
    w = rule.weights
    if va.shape[-1] == 0 or vb.shape[-1] == 0:
        return np.zeros((va.shape[-1], vb.shape[-1]))
    wa = (w.reshape((-1,) + (1,) * (va.ndim - 1)) * va).reshape(-1, va.shape[-1])
    return wa.T @ vb.reshape(-1, vb.shape[-1])


def gram(B, rule):
    return inner(B, B, rule)


class Projector:
    """L2 projection onto span(B) with the basis values and Gram factor kept."""

    def __init__(self, B, rule):
        self.rule = rule
        self.size = B.size
        if B.size:
            vb = _vals(B, rule.points)
            self._wv = (rule.weights[:, None] * vb.reshape(len(rule.weights), -1)).reshape(vb.shape)
            G = self._wv.reshape(-1, B.size).T @ vb.reshape(-1, B.size)
            self._chol = sla.cho_factor(G)

    def __call__(self, f):
        if self.size == 0:
            return np.zeros(0)
        fv = np.asarray(f(self.rule.points), float)
        if self._wv.ndim == 2:
            rhs = self._wv.T @ fv.reshape(-1)
        else:
            rhs = np.einsum("pdi,pd->i", self._wv, fv.reshape(len(fv), -1))
        return sla.cho_solve(self._chol, rhs)


def l2_project(B, f, rule):
    """Coefficients of the L2-orthogonal projection of f onto span(B)."""
    return Projector(B, rule)(f)


def orthonormalize(B, rule):
    L = np.linalg.cholesky(gram(B, rule))
    return B.with_coef(sla.solve_triangular(L, B.coef.T, lower=True).T)


# ---------------------------------------------------------------- decompositions

def _rank_select(G, r):
    """Pick r columns of G by pivoted QR; guards against rank above r."""
    if r == 0:
        return G[:, :0]
    _, R, piv = sla.qr(G, pivoting=True, mode="economic")
    d = np.abs(np.diag(R))
    if d[r - 1] < 1e-10 * d[0]:
        raise np.linalg.LinAlgError("generating set rank below analytic dimension")
    if len(d) > r and d[r] > 1e-10 * d[0]:
        raise np.linalg.LinAlgError("generating set rank above analytic dimension")
    return G[:, np.sort(piv[:r])]


_UNIT = {d: Frame(np.zeros(3), 1.0, np.eye(3)[:d]) for d in (1, 2, 3)}


@lru_cache(maxsize=None)
def _decomp_coef(dim, ell):
    """Universal xi-coefficients of the decomposition spaces of degree ell."""
    fr = _UNIT[dim]
    out = {}
    amb = max(ell, 0)
    N = dim_poly(dim, amb)
    empty = np.zeros((dim * N, 0))
    if dim == 2:
        if ell >= 0:
            R = vrot(scalar_basis(fr, ell + 1)).coef[:, 1:]
        else:
            R = empty
        Rc = xmul(scalar_basis(fr, ell - 1)).coef if ell >= 1 else empty
        out["R"], out["Rc"] = R, Rc
    else:
        G = grad(scalar_basis(fr, ell + 1)).coef[:, 1:] if ell >= 0 else empty
        if ell >= 1:
            gen = xcross(vector_basis(fr, ell - 1)).coef
            Gc = _rank_select(gen, 3 * dim_poly(3, ell) - (dim_poly(3, ell + 1) - 1))
        else:
            Gc = empty
        if ell >= 0:
            gen = curl(vector_basis(fr, ell + 1)).coef
            gen = gen[:, np.linalg.norm(gen, axis=0) > 0]
            R = _rank_select(gen, 3 * dim_poly(3, ell) - dim_poly(3, ell - 1))
        else:
            R = empty
        Rc = xmul(scalar_basis(fr, ell - 1)).coef if ell >= 1 else empty
        out.update(G=G, Gc=Gc, R=R, Rc=Rc)
    for v in out.values():
        v.setflags(write=False)
    return out


def build_decomp(frame, ell):
    """Dict of Basis for Roly/cRoly (faces) or Goly/cGoly/Roly/cRoly (elements).

    Keys "R", "Rc", and on elements also "G", "Gc". Negative degrees give
    empty spaces.
    """
    if frame.dim not in (2, 3):
        raise ValueError("decompositions exist on faces and elements only")
    coef = _decomp_coef(frame.dim, ell)
    # scale-free spans: the xi-coefficients are valid on any frame
    return {k: Basis(frame, max(ell, 0), frame.dim, c) for k, c in coef.items()}
