"""Constructive inverses of the discrete gradient, curl and divergence, and
numerical Poincare constants.

The constructions act on the image y = op(x) and accept several images as
columns, so they define linear maps Q with op(Q y) = y on the range.

Sign notes (mesh conventions, omega_FE the outward in-plane sign):
  edge values of the curl inverse are h_E z_E = -alpha_E, so that the face
  curl with r = 1 recovers alpha_F; the rotational element moments solve
  int z_RT . curl w = int C_T v . w - sum_F omega_TF int_F gamma_t(z) . (w x n_F)
  on cGoly^k(T).
"""
import os
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import mimetic as mm
from . import polyspace as ps
from .ddr import GRAD, CURL, DIV, BROKEN
from .polyspace import scalar_basis, build_decomp

RANK_TOL = 1e-10
DEFAULT_MAX_DOF = 20000


def max_dof():
    return int(os.environ.get("DDR_MAX_DOF", DEFAULT_MAX_DOF))


class CycleError(ArithmeticError):
    pass


@dataclass
class InverseResult:
    vector: np.ndarray
    residual: float
    input_norm: float
    output_norm: float

    @property
    def C_P(self):
        if self.input_norm == 0:
            return 0.0
        return self.output_norm / self.input_norm


def _col(y):
    y = np.asarray(y, float)
    return (y[:, None], True) if y.ndim == 1 else (y, False)


def _integrals(B, rule):
    return rule.weights @ B.values(rule.points)


def _const_coef(B, rule):
    """Coefficients of the constant 1 in the basis B."""
    return sla.solve(ps.gram(B, rule), _integrals(B, rule), assume_a="pos")


def _apply(op, x):
    return op.mat @ x[op.cols]


# ---------------------------------------------------------------- gradient

def _spanning_tree(mesh):
    adj = [[] for _ in range(mesh.n_vertices)]
    for E, (a, b) in enumerate(mesh.edge_vertices):
        adj[a].append((b, E, 1.0))
        adj[b].append((a, E, -1.0))
    order, parent = [0], {0: None}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w, E, s in adj[v]:
            if w not in parent:
                parent[w] = (v, E, s)
                order.append(w)
                queue.append(w)
    return order, parent


def construct_gradient_inverse(c, y):
    """q with G_h q = y for y in the range of G_h; root vertex value 0."""
    m, k = c.mesh, c.k
    y, flat = _col(y)
    q = np.zeros((c.dim(GRAD), y.shape[1]))
    vdof = lambda V: c.dofs(GRAD, "vertex", V)[0]
    # jump_E(q_V) = int_E G_E p
    jumps = np.zeros((m.n_edges, y.shape[1]))
    for E in range(m.n_edges):
        jumps[E] = _integrals(c.basis("vE", E), c.rule("edge", E)) @ y[c.dofs(CURL, "edge", E)]
    order, parent = _spanning_tree(m)
    for v in order[1:]:
        u, E, s = parent[v]
        q[vdof(v)] = q[vdof(u)] + s * jumps[E]
    a, b = m.edge_vertices[:, 0], m.edge_vertices[:, 1]
    cyc = q[[vdof(v) for v in b]] - q[[vdof(v) for v in a]] - jumps
    scale = max(np.abs(jumps).max(initial=0), 1.0)
    if np.abs(cyc).max(initial=0) > 1e-9 * scale:
        raise CycleError(f"vertex values inconsistent around a cycle: {np.abs(cyc).max():.3e}")
    if k == 0:
        return q[:, 0] if flat else q
    # int_E q_E r' = -int_E G_E p r + [q_V r], r = s^i, i = 1..k
    for E in range(m.n_edges):
        r = c.rule("edge", E)
        fr = m.edge_frame(E)
        Rt = scalar_basis(fr, k).take(slice(1, None))
        A = ps.inner(ps.grad(Rt), c.basis("qE", E), r)
        ea, eb = m.edge_vertices[E]
        xa, xb = m.vertices[ea], m.vertices[eb]
        rhs = (-ps.inner(Rt, c.basis("vE", E), r) @ y[c.dofs(CURL, "edge", E)]
               + np.outer(Rt.values(xb)[0], q[vdof(eb)]) - np.outer(Rt.values(xa)[0], q[vdof(ea)]))
        q[c.dofs(GRAD, "edge", E)] = sla.solve(A, rhs)
    # int_F q_F div_F v = -int_F G_F p . v + sum_E omega_FE int_E gamma_E(q) v . n_FE, v in cRoly^k(F)
    for F in range(m.n_faces):
        r = c.rule("face", F)
        fr = m.face_frame(F)
        W = build_decomp(fr, k)["Rc"]
        A = ps.inner(ps.div(W), c.basis("qF", F), r)
        fd = c.dofs(CURL, "face", F)[c.split["face_curl"]:]
        rhs = -ps.inner(W, c.basis("vRcF", F), r) @ y[fd]
        for E, om, n in zip(m.face_edges[F], m.face_edge_orient[F], m.n_FE(F)):
            re = c.rule("edge", E)
            wn = np.einsum("pdi,d->pi", W.values3d(re.points), n)
            g = scalar_basis(m.edge_frame(E), k + 1).values(re.points)
            rhs += om * np.einsum("p,pi,pj->ij", re.weights, wn, g) @ _apply(c.trE[E], q)
        q[c.dofs(GRAD, "face", F)] = sla.solve(A, rhs)
    # int_T q_T div v = -int_T G_T p . v + sum_F omega_TF int_F gamma_F(q) v . n_F, v in cRoly^k(T)
    for T in range(m.n_elements):
        r = c.rule("element", T)
        fr = m.element_frame(T)
        W = build_decomp(fr, k)["Rc"]
        A = ps.inner(ps.div(W), c.basis("qT", T), r)
        td = c.dofs(CURL, "element", T)[c.split["element_curl"]:]
        rhs = -ps.inner(W, c.basis("vRcT", T), r) @ y[td]
        for F, om in zip(m.element_faces[T], m.element_orient[T]):
            rf = c.rule("face", F)
            wn = np.einsum("pdi,d->pi", W.values3d(rf.points), m.n_F[F])
            g = scalar_basis(m.face_frame(F), k + 1).values(rf.points)
            rhs += om * np.einsum("p,pi,pj->ij", rf.weights, wn, g) @ _apply(c.trF[F], q)
        q[c.dofs(GRAD, "element", T)] = sla.solve(A, rhs)
    return q[:, 0] if flat else q


# ---------------------------------------------------------------- curl

def lift_edges(mesh, alpha_f):
    """Edge values with sum_E omega_FE alpha_E = alpha_F (columns allowed)."""
    ctx = mm.context(mesh)
    psi = mm.extend_faces_to_submesh(mesh, alpha_f)
    chi = mm.min_norm_curl_preimage(ctx.wc, psi)
    return -chi[ctx.mesh_edge_sub]


def construct_curl_inverse(c, y, tol=1e-10, ref=0.0):
    """z with C_h z = y for y in the range of C_h.

    ref is the entry size of y before cancellation (|C| |v| when y = C v); the
    closure checks are relative to it.
    """
    m, k = c.mesh, c.k
    y, flat = _col(y)
    ncol = y.shape[1]
    z = np.zeros((c.dim(CURL), ncol))
    alpha = np.zeros((m.n_faces, ncol))
    for F in range(m.n_faces):
        alpha[F] = _integrals(c.basis("wF", F), c.rule("face", F)) @ y[c.dofs(DIV, "face", F)]
    el, sh = mm.closure_residuals(m, alpha)
    # face moments are at most |y| |F|; round-off in a zero curl sits at that level
    scale = max(np.abs(alpha).max(initial=0), max(np.abs(y).max(initial=0), ref) * m.area_F.max(), 1e-300)
    if np.abs(el).max(initial=0) > tol * scale:
        raise mm.PreconditionError(f"element closure residual {np.abs(el).max():.3e}")
    if sh.size and np.abs(sh).max() > tol * scale:
        raise mm.PreconditionError(f"shell closure residual {np.abs(sh).max():.3e}")
    alpha_e = lift_edges(m, alpha)
    for E in range(m.n_edges):
        z[c.dofs(CURL, "edge", E)] = np.outer(_const_coef(c.basis("vE", E), c.rule("edge", E)),
                                              -alpha_e[E] / m.h_E[E])
    if k == 0:
        return z[:, 0] if flat else z
    # int_F z_RF . VROT r = int_F C_F v r + sum_E omega_FE int_E z_E r, r of degree 1..k
    for F in range(m.n_faces):
        r = c.rule("face", F)
        fr = m.face_frame(F)
        Rt = scalar_basis(fr, k).take(slice(1, None))
        vR = c.basis("vRF", F)
        A = ps.inner(ps.vrot(Rt), vR, r)
        rhs = ps.inner(Rt, c.basis("wF", F), r) @ y[c.dofs(DIV, "face", F)]
        for E, om in zip(m.face_edges[F], m.face_edge_orient[F]):
            re = c.rule("edge", E)
            rhs += om * ps.inner(Rt, c.basis("vE", E), re) @ z[c.dofs(CURL, "edge", E)]
        z[c.dofs(CURL, "face", F)[:vR.size]] = sla.solve(A, rhs)
    # int_T z_RT . curl w = int_T C_T v . w - sum_F omega_TF int_F gamma_t(z) . (w x n_F), w in cGoly^k(T)
    for T in range(m.n_elements):
        r = c.rule("element", T)
        fr = m.element_frame(T)
        W = build_decomp(fr, k)["Gc"]
        vR = c.basis("vRT", T)
        A = ps.inner(ps.curl(W), vR, r)
        td = c.dofs(DIV, "element", T)[c.split["element_div"]:]
        rhs = ps.inner(W, c.basis("wGcT", T), r) @ y[td]
        for F, om in zip(m.element_faces[T], m.element_orient[T]):
            rf = c.rule("face", F)
            wxn = np.cross(W.values3d(rf.points), m.n_F[F][None, :, None], axisa=1, axisb=1, axisc=1)
            g = ps.vector_basis(m.face_frame(F), k).values3d(rf.points)
            rhs -= om * np.einsum("p,pdi,pdj->ij", rf.weights, wxn, g) @ _apply(c.trtF[F], z)
        z[c.dofs(CURL, "element", T)[:vR.size]] = sla.solve(A, rhs)
    return z[:, 0] if flat else z


# ---------------------------------------------------------------- divergence

def lift_faces(mesh, alpha_t):
    ctx = mm.context(mesh)
    psi = np.asarray(alpha_t, float)[ctx.sub.simplex_element]
    w = (ctx.vol_sub / mesh.vol_T[ctx.sub.simplex_element])
    psi = psi * (w if psi.ndim == 1 else w[:, None])
    return ctx.R @ mm.min_norm_div_preimage(ctx.wc, psi)


def construct_divergence_inverse(c, y):
    m, k = c.mesh, c.k
    y, flat = _col(y)
    z = np.zeros((c.dim(DIV), y.shape[1]))
    alpha_t = np.zeros((m.n_elements, y.shape[1]))
    for T in range(m.n_elements):
        alpha_t[T] = _integrals(c.basis("pT", T), c.rule("element", T)) @ y[c.dofs(BROKEN, "element", T)]
    alpha_f = lift_faces(m, alpha_t)
    for F in range(m.n_faces):
        z[c.dofs(DIV, "face", F)] = np.outer(_const_coef(c.basis("wF", F), c.rule("face", F)),
                                             alpha_f[F] / m.area_F[F])
    if k == 0:
        return z[:, 0] if flat else z
    # int_T z_GT . grad q = -int_T D_T w q + sum_F omega_TF int_F z_F q, q of degree 1..k
    for T in range(m.n_elements):
        r = c.rule("element", T)
        Qt = scalar_basis(m.element_frame(T), k).take(slice(1, None))
        wG = c.basis("wGT", T)
        A = ps.inner(ps.grad(Qt), wG, r)
        rhs = -ps.inner(Qt, c.basis("pT", T), r) @ y[c.dofs(BROKEN, "element", T)]
        for F, om in zip(m.element_faces[T], m.element_orient[T]):
            rf = c.rule("face", F)
            rhs += om * ps.inner(Qt, c.basis("wF", F), rf) @ z[c.dofs(DIV, "face", F)]
        z[c.dofs(DIV, "element", T)[:wG.size]] = sla.solve(A, rhs)
    return z[:, 0] if flat else z


# ---------------------------------------------------------------- public inverses

_CONSTRUCT = {GRAD: construct_gradient_inverse, CURL: construct_curl_inverse, DIV: construct_divergence_inverse}
_TARGET = {GRAD: CURL, CURL: DIV, DIV: BROKEN}


def _inverse(c, space, x):
    A = c.operator(space)
    x = np.asarray(x, float)
    y = A @ x
    if space == CURL:
        z = construct_curl_inverse(c, y, ref=abs(A).max() * np.abs(x).max(initial=0))
    else:
        z = _CONSTRUCT[space](c, y)
    res = np.linalg.norm(A @ z - y) / max(np.linalg.norm(y), 1e-300) if np.any(y) else float(np.linalg.norm(A @ z))
    return InverseResult(z, float(res), c.component_norm(_TARGET[space], y), c.component_norm(space, z))


def inverse_gradient(c, p):
    return _inverse(c, GRAD, p)


def inverse_curl(c, v):
    return _inverse(c, CURL, v)


def inverse_divergence(c, w):
    return _inverse(c, DIV, w)


# ---------------------------------------------------------------- Poincare constants

def gram_factor(c, space):
    """Block upper-triangular R with R^T R = Gram, and its inverse, as sparse matrices."""
    key = ("factor", space)
    cache = c.__dict__.setdefault("_factors", {})
    if key in cache:
        return cache[key]
    G = c.gram[space].tocsr()
    lay = c.layouts[space]
    R, Ri = [], []
    rows = []
    for kind in lay.ORDER:
        if not lay.sizes[kind]:
            continue
        for i in range(lay.counts[kind]):
            d = lay.dofs(kind, i)
            blk = G[d][:, d].toarray()
            U = np.linalg.cholesky(blk).T
            R.append(U)
            Ri.append(sla.solve_triangular(U, np.eye(len(d))))
            rows.append(d)
    perm = np.concatenate(rows)
    P = sp.csr_matrix((np.ones(len(perm)), (np.arange(len(perm)), perm)), shape=(len(perm), len(perm)))
    out = (P.T @ sp.block_diag(R, format="csr") @ P, P.T @ sp.block_diag(Ri, format="csr") @ P)
    cache[key] = out
    return out


def whitened(c, space):
    RX, RXi = gram_factor(c, space)
    RY, _ = gram_factor(c, _TARGET[space])
    return (RY @ c.operator(space) @ RXi).tocsr()


def expected_kernel_dim(c, space):
    """Kernel dimensions from cohomology of a domain with b0 = 1 and b1 = 0."""
    if space == GRAD:
        return 1
    if space == CURL:
        return c.dim(GRAD) - 1
    return c.dim(DIV) - c.dim(BROKEN)


def _smallest_eigs(M, nev):
    n = M.shape[0]
    scale = spla.eigsh(M, k=1, which="LA", return_eigenvectors=False, tol=1e-6)[0]
    shift = -1e-8 * scale
    w, V = spla.eigsh(M.tocsc(), k=min(nev, n - 1), sigma=shift, which="LM", tol=1e-8)
    o = np.argsort(w)
    return w[o], V[:, o], scale


def poincare_constant(c, space, dense=None):
    """C_num = 1 / smallest nonzero singular value of the whitened operator."""
    B = whitened(c, space)
    n = B.shape[1]
    dense = n <= max_dof() if dense is None else dense
    if dense:
        U, s, Vt = np.linalg.svd(B.toarray(), full_matrices=False)
        rank = int(np.sum(s > RANK_TOL * s[0]))
        smin = s[rank - 1]
        out = {"C_num": float(1 / smin), "kernel_dim": n - rank, "sigma_min": float(smin),
               "sigma_max": float(s[0]), "method": "dense", "rank": rank}
        out["_range"] = U[:, :rank]
        out["_vmin"] = Vt[rank - 1]
        return out
    kdim = expected_kernel_dim(c, space)
    if space == DIV:
        # onto: the smallest eigenvalue of B B^T
        w, V, scale = _smallest_eigs((B @ B.T).tocsr(), 1)
        smin = float(np.sqrt(w[0]))
        vmin = B.T @ V[:, 0] / smin
    elif space == GRAD:
        w, V, scale = _smallest_eigs((B.T @ B).tocsr(), 2)
        smin = float(np.sqrt(max(w[1], 0)))
        vmin = V[:, 1]
    else:
        # lift the kernel range(B_G) away with a scaled B_G B_G^T
        BG = whitened(c, GRAD)
        sg = poincare_constant(c, GRAD, dense=False)["sigma_min"]
        s = 100.0
        while True:
            M = (B.T @ B + (s / sg ** 2) * (BG @ BG.T)).tocsr()
            w, V, scale = _smallest_eigs(M, 1)
            if w[0] < 0.5 * s:
                break
            s *= 100.0
        smin = float(np.sqrt(w[0]))
        vmin = V[:, 0]
    return {"C_num": 1 / smin, "kernel_dim": kdim, "sigma_min": smin, "method": "iterative", "_vmin": vmin}


def constructive_constant(c, space, pc=None, samples=20, seed=0):
    """C_P = max over the range of ||Q y||_X / ||y||_Y for the construction Q.

    Dense path: exact norm of the construction on the whitened range.  Otherwise
    sampled on random inputs plus the C_num extremal vector, so C_P >= C_num holds.
    """
    pc = poincare_constant(c, space) if pc is None else pc
    RX, RXi = gram_factor(c, space)
    RY, RYi = gram_factor(c, _TARGET[space])
    if "_range" in pc:
        Ur = pc["_range"]
        Z = _CONSTRUCT[space](c, RYi @ Ur)
        return float(np.linalg.svd(RX @ Z, compute_uv=False)[0])
    rng = np.random.default_rng(seed)
    X = RXi @ np.column_stack([pc["_vmin"], rng.standard_normal((c.dim(space), samples))])
    Y = c.operator(space) @ X
    Z = _CONSTRUCT[space](c, Y)
    num = np.linalg.norm(RX @ Z, axis=0)
    den = np.linalg.norm(RY @ Y, axis=0)
    return float(np.max(num / den))
