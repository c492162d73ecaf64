"""Mimetic Poincare constructions on the tetrahedral submesh.

Sign conventions: a mesh edge is the subedge with the same endpoints and the
same direction, so its Whitney DOF is the circulation along t_E.  Stokes on a
face loop traversed counter-clockwise w.r.t. n_F gives flux = sum of +-
circulations with sign +1 when the loop runs along t_E, which is -omega_FE.
Edge values are therefore returned as minus the circulations, so that
sum_E omega_FE alpha_E = alpha_F holds with the outward omega_FE of the mesh.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .submesh import tetrahedralize, subentity_sets, INTERIOR
from .whitney import assemble_whitney

RANK_TOL = 1e-10


class PreconditionError(ValueError):
    pass


class Mimetic:
    """Submesh, Whitney complex and the mesh-to-submesh maps for one PolyMesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.sub = tetrahedralize(mesh)
        self.wc = assemble_whitney(self.sub)
        sub = self.sub
        n = sub.face_normals()
        # mesh face -> (subfaces, sign of ordered normal against n_F, area fraction)
        self.face_sub = [[] for _ in range(mesh.n_faces)]
        for f, F in enumerate(sub.face_parent_face):
            if F != INTERIOR:
                s = 1.0 if n[f] @ mesh.n_F[F] > 0 else -1.0
                self.face_sub[F].append((f, s, 0.5 * np.linalg.norm(n[f]) / mesh.area_F[F]))
        rows, cols, vals = [], [], []
        for F, lst in enumerate(self.face_sub):
            for f, s, _ in lst:
                rows.append(F)
                cols.append(f)
                vals.append(s)
        # alpha_F = R @ psi (signed sum over subtriangles)
        self.R = sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_faces, len(sub.faces)))
        self.mesh_edge_sub = np.empty(mesh.n_edges, dtype=np.int64)
        for e, E in enumerate(sub.edge_parent_edge):
            if E != INTERIOR:
                self.mesh_edge_sub[E] = e
        self.vol_sub = np.abs(sub.volumes)
        self._elem = {}

    def element_sets(self, T):
        if T not in self._elem:
            self._elem[T] = subentity_sets(self.sub, T)
        return self._elem[T]

    def shell_rows(self):
        """Sparse rows L_i(psi) = -sum over the subfaces of shell i of omega_OmegaF psi_f."""
        m = self.mesh
        rows, cols, vals = [], [], []
        for i, shell in enumerate(m.shells):
            for F in shell:
                for f, s, _ in self.face_sub[F]:
                    rows.append(i)
                    cols.append(f)
                    vals.append(-m.omega_boundary(F) * s)
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(m.shells), len(self.sub.faces)))


def context(mesh):
    c = mesh._cache.get("mimetic")
    if c is None:
        c = mesh._cache["mimetic"] = Mimetic(mesh)
    return c


# ---------------------------------------------------------------- vertex values

def vertex_poincare_check(mesh, alpha_v):
    ctx = context(mesh)
    sub = ctx.sub
    a = np.asarray(alpha_v, float)
    if a.shape != (mesh.n_vertices,):
        raise ValueError("one value per mesh vertex required")
    ext = np.empty(len(sub.points))
    ext[:mesh.n_vertices] = a
    nV, nF = mesh.n_vertices, mesh.n_faces
    for F in range(nF):
        ext[nV + F] = a[mesh.face_vertices[F].min()]
    for T in range(mesh.n_elements):
        ext[nV + nF + T] = a[mesh.element_vertices[T].min()]
    mass = np.asarray(ctx.wc.M0.sum(axis=1)).ravel()
    C = float(ext @ mass / mass.sum())
    lhs = sum(mesh.h_T[T] ** 3 * np.sum((a[mesh.element_vertices[T]] - C) ** 2) for T in range(mesh.n_elements))
    jump = a[mesh.edge_vertices[:, 1]] - a[mesh.edge_vertices[:, 0]]
    rhs = sum(mesh.h_T[T] * np.sum(jump[mesh.element_edges[T]] ** 2) for T in range(mesh.n_elements))
    return {"C": C, "lhs": float(lhs), "rhs": float(rhs), "ratio": _ratio(lhs, rhs), "phi": ext - C}


def _ratio(lhs, rhs):
    if rhs > 0:
        return float(lhs / rhs)
    return float("inf") if lhs > 0 else 0.0


# ---------------------------------------------------------------- harmonic forms

def solid_angle(tri, x0):
    """Signed solid angle of the triangle (a, b, c) seen from x0, positive when
    (b - a) x (c - a) points away from x0.  Equals the flux of (x - x0)/|x - x0|^3."""
    A, B, C = (np.asarray(tri[..., i, :], float) - x0 for i in range(3))
    a, b, c = (np.linalg.norm(v, axis=-1) for v in (A, B, C))
    num = np.einsum("...d,...d->...", A, np.cross(B, C))
    den = a * b * c + np.einsum("...d,...d->...", A, B) * c + np.einsum("...d,...d->...", A, C) * b \
        + np.einsum("...d,...d->...", B, C) * a
    return 2.0 * np.arctan2(num, den)


@dataclass
class HarmonicBasis:
    members: np.ndarray
    L: sp.csr_matrix
    pairing: np.ndarray
    div_residual: np.ndarray
    rank_dim: int
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    @property
    def dim(self):
        return len(self.members)


def harmonic_basis(mesh, points=None, check_rank=True):
    """Interpolants of (x - x_i)/|x - x_i|^3 for one interior point per void."""
    ctx = context(mesh)
    sub, wc = ctx.sub, ctx.wc
    b2 = len(mesh.shells)
    pts = mesh.void_points() if points is None else np.asarray(points, float).reshape(-1, 3)
    if len(pts) != b2:
        raise ValueError(f"need one point per shell ({b2}), got {len(pts)}")
    tri = sub.points[sub.faces]
    members = np.array([solid_angle(tri, x) for x in pts]).reshape(b2, len(sub.faces))
    L = ctx.shell_rows()
    P = np.asarray(L @ members.T).reshape(b2, b2)
    if b2 and np.linalg.matrix_rank(P) < b2:
        raise np.linalg.LinAlgError("singular pairing matrix")
    divres = np.array([np.abs(wc.D2 @ m).max() for m in members])
    rank_dim = harmonic_dimension(wc) if check_rank else -1
    return HarmonicBasis(members, L, P, divres, rank_dim, pts)


def _kernel_dim_sym(A, dense_limit=4000):
    """Dimension of the kernel of a symmetric positive semidefinite sparse matrix."""
    n = A.shape[0]
    if n <= dense_limit:
        w = np.linalg.eigvalsh(A.toarray())
        return int(np.sum(w < RANK_TOL * max(w.max(), 1.0)))
    nev = 8
    while True:
        w = spla.eigsh(A.tocsc(), k=nev, sigma=-1e-3, which="LM", return_eigenvectors=False)
        scale = spla.eigsh(A, k=1, which="LA", return_eigenvectors=False)[0]
        kdim = int(np.sum(np.abs(w) < RANK_TOL * scale))
        if kdim < nev or nev >= n - 1:
            return kdim
        nev *= 2


def harmonic_dimension(wc):
    """dim Ker D2 - rank D1 as the kernel of the combinatorial face Laplacian."""
    L = (wc.D2.T @ wc.D2 + wc.D1 @ wc.D1.T).tocsr()
    return _kernel_dim_sym(L)


def curl_range_test(mesh, psi, tol=1e-10):
    """Decide whether psi lies in D1(edge space) and return a witness if it does."""
    ctx = context(mesh)
    wc = ctx.wc
    psi = np.asarray(psi, float)
    scale = max(np.abs(psi).max(), 1e-300)
    div = float(np.abs(wc.D2 @ psi).max()) / scale
    flux = np.asarray(ctx.shell_rows() @ psi).ravel() / scale
    out = {"div_residual": div, "flux": flux.tolist(), "in_range": False}
    if div > tol:
        out["violated"] = "divergence"
        return out
    if flux.size and np.abs(flux).max() > tol:
        out["violated"] = "flux"
        out["shell"] = int(np.argmax(np.abs(flux)))
        return out
    chi = min_norm_curl_preimage(wc, psi)
    res = float(np.linalg.norm(wc.D1 @ chi - psi) / max(np.linalg.norm(psi), 1e-300))
    out.update(in_range=res < tol, witness=chi, residual=res)
    if res >= tol:
        out["violated"] = "residual"
    return out


def _factor(wc, key, build):
    cache = wc.__dict__.setdefault("_factors", {})
    if key not in cache:
        cache[key] = build()
    return cache[key]


def min_norm_curl_preimage(wc, psi):
    """chi minimizing the M1-norm subject to D1 chi = psi (for psi in the range).

    psi may carry several right-hand sides as columns.
    """
    D0, D1, M1, M2 = wc.D0, wc.D1, wc.M1, wc.M2
    nE, nV = D0.shape

    def build():
        # grounding one vertex removes the constant kernel of D0
        B = (M1 @ D0).tocsc()[:, 1:]
        K = sp.bmat([[D1.T @ M2 @ D1, B], [B.T, None]], format="csc")
        return spla.splu(K)

    lu = _factor(wc, "curl", build)
    psi = np.asarray(psi, float)
    rhs = np.concatenate([D1.T @ (M2 @ psi), np.zeros((nV - 1,) + psi.shape[1:])])
    return lu.solve(rhs)[:nE]


def min_norm_div_preimage(wc, psi, free=None):
    """phi minimizing the M2-norm subject to D2 phi = psi; free masks the unknown faces."""
    D2, M2 = wc.D2, wc.M2
    nS, nF = D2.shape
    idx = np.arange(nF) if free is None else np.flatnonzero(free)
    # with boundary faces fixed, D2 loses one rank (the total flux); drop one constraint
    rows = np.arange(nS) if free is None else np.arange(1, nS)

    def build():
        Dr = D2.tocsr()[rows][:, idx]
        Mr = M2.tocsr()[idx][:, idx]
        return spla.splu(sp.bmat([[Mr, Dr.T], [Dr, None]], format="csc"))

    lu = _factor(wc, ("div", free is None), build)
    psi = np.asarray(psi, float)
    sol = lu.solve(np.concatenate([np.zeros((len(idx),) + psi.shape[1:]), psi[rows]]))
    phi = np.zeros((nF,) + psi.shape[1:])
    phi[idx] = sol[:len(idx)]
    return phi


# ---------------------------------------------------------------- lifts

def closure_residuals(mesh, alpha_f):
    """Per-element sum_F omega_TF alpha_F and per-shell sum_F omega_OmegaF alpha_F."""
    a = np.asarray(alpha_f, float)
    el = np.array([np.dot(mesh.element_orient[T], a[mesh.element_faces[T]]) for T in range(mesh.n_elements)])
    sh = np.array([sum(mesh.omega_boundary(F) * a[F] for F in s) for s in mesh.shells])
    return el, sh


def extend_faces_to_submesh(mesh, alpha_f):
    """Face values on every subface with exact per-simplex closure."""
    ctx = context(mesh)
    sub, wc = ctx.sub, ctx.wc
    alpha_f = np.asarray(alpha_f, float)
    psi = np.zeros((len(sub.faces),) + alpha_f.shape[1:])
    for F, lst in enumerate(ctx.face_sub):
        for f, s, frac in lst:
            psi[f] = s * frac * alpha_f[F]
    D2 = wc.D2.tocsr()
    for T in range(mesh.n_elements):
        simp, subfaces, _, _ = ctx.element_sets(T)
        inner = np.array([f for f, onb in subfaces.items() if not onb])
        bnd = np.array([f for f, onb in subfaces.items() if onb])
        A = D2[simp][:, inner].toarray()
        b = -(D2[simp][:, bnd] @ psi[bnd])
        x, *_ = sla.lstsq(A, b, lapack_driver="gelsd")
        psi[inner] = x
    return psi


def lift_edge_from_face(mesh, alpha_f, tol=1e-11):
    ctx = context(mesh)
    a = np.asarray(alpha_f, float)
    scale = max(np.abs(a).max(), 1.0)
    el, sh = closure_residuals(mesh, a)
    if np.abs(el).max(initial=0) > tol * scale:
        T = int(np.argmax(np.abs(el)))
        raise PreconditionError(f"element closure fails at element {T}: {el[T]:.3e}")
    if sh.size and np.abs(sh).max() > tol * scale:
        i = int(np.argmax(np.abs(sh)))
        raise PreconditionError(f"shell closure fails at shell {i}: {sh[i]:.3e}")
    psi = extend_faces_to_submesh(mesh, a)
    simplex_res = float(np.abs(ctx.wc.D2 @ psi).max(initial=0))
    chi = min_norm_curl_preimage(ctx.wc, psi)
    res = float(np.linalg.norm(ctx.wc.D1 @ chi - psi))
    if res > 1e-10 * max(np.linalg.norm(psi), 1.0):
        raise np.linalg.LinAlgError(f"curl preimage residual {res:.3e}")
    alpha_e = -chi[ctx.mesh_edge_sub]
    closure = np.array([np.dot(mesh.face_edge_orient[F], alpha_e[mesh.face_edges[F]]) - a[F]
                        for F in range(mesh.n_faces)])
    hT = mesh.h_T
    lhs = sum(hT[T] * np.sum(alpha_e[mesh.element_edges[T]] ** 2) for T in range(mesh.n_elements))
    rhs = sum(np.sum(a[mesh.element_faces[T]] ** 2) / hT[T] for T in range(mesh.n_elements))
    return {"alpha_e": alpha_e, "lhs": float(lhs), "rhs": float(rhs), "ratio": _ratio(lhs, rhs),
            "closure_residual": float(np.abs(closure).max(initial=0)), "simplex_residual": simplex_res,
            "preimage_residual": res}


def lift_face_from_element(mesh, alpha_t, interior_only=False, tol=1e-11):
    ctx = context(mesh)
    sub, wc = ctx.sub, ctx.wc
    a = np.asarray(alpha_t, float)
    if interior_only and abs(a.sum()) > tol * max(np.abs(a).sum(), 1e-300):
        raise PreconditionError(f"sum of element values {a.sum():.3e} is not zero")
    psi = a[sub.simplex_element] * ctx.vol_sub / mesh.vol_T[sub.simplex_element]
    free = None
    if interior_only:
        on_bnd = np.zeros(len(sub.faces), bool)
        for F in mesh.boundary_faces:
            for f, _, _ in ctx.face_sub[F]:
                on_bnd[f] = True
        free = ~on_bnd
    phi = min_norm_div_preimage(wc, psi, free) if np.any(a) else np.zeros(len(sub.faces))
    res = float(np.abs(wc.D2 @ phi - psi).max(initial=0))
    alpha_f = ctx.R @ phi
    closure = np.array([np.dot(mesh.element_orient[T], alpha_f[mesh.element_faces[T]]) - a[T]
                        for T in range(mesh.n_elements)])
    hT = mesh.h_T
    lhs = sum(np.sum(alpha_f[mesh.element_faces[T]] ** 2) / hT[T] for T in range(mesh.n_elements))
    rhs = float(np.sum(a ** 2 / hT ** 3))
    return {"alpha_f": alpha_f, "lhs": float(lhs), "rhs": rhs, "ratio": _ratio(lhs, rhs),
            "closure_residual": float(np.abs(closure).max(initial=0)), "preimage_residual": res}
