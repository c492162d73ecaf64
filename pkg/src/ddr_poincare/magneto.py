"""Magnetostatics on general topology with the DDR complex.

Unknowns (sigma, u, p) in X_curl x X_div x harmonic forms, with p stored as
coefficients against a div-orthonormal harmonic basis.  Rows of the system
are the test functions (tau, v, q).
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ddr import DDRComplex, CURL, DIV, BROKEN, GRAD
from .inverse import whitened, gram_factor, max_dof, RANK_TOL, _smallest_eigs


PRESETS = {
    "zero": lambda x: np.zeros_like(x),
    "constant": lambda x: np.tile([1.0, 0.5, -0.25], (len(x), 1)),
    "polynomial": lambda x: np.stack([x[:, 1] * x[:, 2], x[:, 0] ** 2, x[:, 0] * x[:, 1] + x[:, 2]], axis=1),
}


class HarmonicAmbiguity(RuntimeWarning):
    pass


@dataclass
class HarmonicDivSpace:
    basis: np.ndarray
    singular_values: np.ndarray
    ambiguous: bool
    div_residual: float
    curl_residual: float

    @property
    def dim(self):
        return self.basis.shape[1]


def harmonic_div_space(c, expected=None):
    """Div-orthonormal basis of Ker D_h orthogonal to the range of C_h."""
    BD = whitened(c, DIV)
    BC = whitened(c, CURL)
    S = sp.vstack([BD, BC.T]).tocsr()
    _, RXi = gram_factor(c, DIV)
    n = S.shape[1]
    if n <= max_dof():
        U, s, Vt = np.linalg.svd(S.toarray(), full_matrices=True)
        sv = np.zeros(n)
        sv[:len(s)] = s
        tol = RANK_TOL * sv.max()
        null = sv <= tol
        Nhat = Vt[null].T
        o = np.sort(sv)
        i = int(np.sum(null))
        near = o[max(i - 1, 0):i + 1]
    else:
        nev = (expected if expected is not None else c.mesh.b2) + 2
        w, V, scale = _smallest_eigs((S.T @ S).tocsr(), nev)
        sv = np.sqrt(np.abs(w))
        tol = RANK_TOL * np.sqrt(scale)
        null = sv <= tol
        Nhat = V[:, null]
        i = int(np.sum(null))
        near = sv[max(i - 1, 0):i + 1]
    # a gap smaller than 10x the tolerance around the threshold makes the rank ambiguous
    ambiguous = bool(len(near) == 2 and near[1] - near[0] < 10 * tol) or bool(
        len(near) == 2 and near[1] < 10 * tol)
    H = RXi @ Nhat
    G = H.T @ (c.gram[DIV] @ H)
    if H.shape[1]:
        L = np.linalg.cholesky(G)
        H = sla.solve_triangular(L, H.T, lower=True).T
    div_res = float(np.abs(c.D @ H).max(initial=0))
    curl_res = float(np.abs(c.C.T @ (c.gram[DIV] @ H)).max(initial=0))
    return HarmonicDivSpace(H, np.sort(sv)[:8], ambiguous, div_res, curl_res)


@dataclass
class MagnetoSystem:
    complex: DDRComplex
    harmonic: HarmonicDivSpace
    A: sp.csr_matrix
    rhs: np.ndarray
    graph: sp.csr_matrix
    coupling: tuple = field(repr=False, default=None)

    @property
    def sizes(self):
        c = self.complex
        return c.dim(CURL), c.dim(DIV), self.harmonic.dim

    def split(self, x):
        a, b, _ = self.sizes
        return x[:a], x[a:a + b], x[a + b:]


def assemble_magneto(c, f=None, harmonic=None):
    """Saddle system of the DDR magnetostatics scheme with component products."""
    H = harmonic_div_space(c) if harmonic is None else harmonic
    M1, M2, M3 = c.gram[CURL], c.gram[DIV], c.gram[BROKEN]
    C, D = c.C, c.D
    Hm = sp.csr_matrix(H.basis)
    B2 = (M2 @ C).tocsr()
    B1 = -B2.T
    P = (M2 @ Hm).tocsr()
    A = sp.bmat([[M1, B1, None],
                 [B2, D.T @ M3 @ D, P],
                 [None, P.T, None]], format="csr")
    nc, nd, nh = c.dim(CURL), c.dim(DIV), H.dim
    rhs = np.zeros(nc + nd + nh)
    if f is not None:
        rhs[nc:nc + nd] = M2 @ c.interpolate(DIV, f)
    graph = sp.block_diag([M1 + C.T @ M2 @ C, M2 + D.T @ M3 @ D, sp.identity(nh)], format="csr")
    return MagnetoSystem(c, H, A, rhs, graph, (B1, B2))


def bilinear_form(system, X, Y):
    """A_h(X, Y) evaluated term by term from the component products."""
    c = system.complex
    s, u, p = system.split(X)
    t, v, q = system.split(Y)
    Hb = system.harmonic.basis
    pd = c.component_product
    return (pd(CURL, s, t) - pd(DIV, u, c.C @ t) + pd(DIV, c.C @ s, v)
            + pd(BROKEN, c.D @ u, c.D @ v) + pd(DIV, Hb @ p, v) + pd(DIV, u, Hb @ q))


@dataclass
class MagnetoSolution:
    sigma: np.ndarray
    u: np.ndarray
    p: np.ndarray
    residual: float
    div_norm: float
    harmonic_orthogonality: float
    graph_norm: float
    rhs_norm: float


def solve_magnetostatics(system):
    A, b = system.A, system.rhs
    if not np.any(b):
        x = np.zeros_like(b)
    else:
        x = spla.spsolve(A.tocsc(), b)
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("singular magnetostatics system")
    res = float(np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)) if np.any(b) else float(np.linalg.norm(x))
    c = system.complex
    s, u, p = system.split(x)
    orth = np.abs(system.harmonic.basis.T @ (c.gram[DIV] @ u))
    gn = float(np.sqrt(max(x @ (system.graph @ x), 0)))
    nc, nd, _ = system.sizes
    fI = b[nc:nc + nd]
    rhs_norm = float(np.sqrt(max(fI @ spla.spsolve(c.gram[DIV].tocsc(), fI), 0))) if np.any(fI) else 0.0
    return MagnetoSolution(s, u, p, res, c.component_norm(BROKEN, c.D @ u),
                           float(orth.max(initial=0)), gn, rhs_norm)


def _graph_factor(system):
    c = system.complex
    G = system.graph.toarray()
    return np.linalg.cholesky(G)


def infsup_constant(system, dense=None):
    """Smallest singular value of the graph-norm whitened system matrix."""
    n = system.A.shape[0]
    dense = n <= max_dof() if dense is None else dense
    if dense:
        L = _graph_factor(system)
        Ah = sla.solve_triangular(L, sla.solve_triangular(L, system.A.toarray(), lower=True).T, lower=True).T
        s = np.linalg.svd(Ah, compute_uv=False)
        return float(s[-1])
    # 1/sigma_min^2 = lambda_max of N A^-T N A^-1 N relative to N
    N = system.graph.tocsc()
    luA = spla.splu(system.A.tocsc())
    luN = spla.splu(N)
    S = spla.LinearOperator((n, n), matvec=lambda x: N @ luA.solve(N @ luA.solve(N @ x), trans="T"),
                            dtype=float)
    Minv = spla.LinearOperator((n, n), matvec=luN.solve, dtype=float)
    mu = spla.eigsh(S, k=1, M=N, Minv=Minv, which="LA", return_eigenvectors=False, tol=1e-8)[0]
    return float(1 / np.sqrt(mu))
