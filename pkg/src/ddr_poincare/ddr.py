"""Discrete de Rham spaces, local operators, global complex, norms, interpolators.

DOF vectors are flat arrays.  Each space has a Layout ordering its components
vertices, then edges, then faces, then elements; inside an entity the
components follow the basis order of polyspace, with the Roly (or Goly) block
before its complement.

Edge integrals in the face gradient use the edge trace of q: the polynomial
of P^(k+1)(E) whose P^(k-1) projection is q_E and whose endpoint values are
the vertex values.  The scalar face trace is fully determined by its moments
against cRoly^(k+2)(F), since div_F maps that space onto P^(k+1)(F).
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import polyspace as ps
from .polyspace import dim_poly, scalar_basis, vector_basis, build_decomp

GRAD, CURL, DIV, BROKEN = "grad", "curl", "div", "broken"
COND_LIMIT = 1e8


@dataclass(frozen=True)
class LocalOp:
    mat: np.ndarray
    cols: np.ndarray


def combine(terms, nrows):
    """Sum of A @ op over (A, op) pairs on the union of their columns."""
    cols = np.unique(np.concatenate([op.cols for _, op in terms])) if terms else np.zeros(0, int)
    out = np.zeros((nrows, len(cols)))
    for A, op in terms:
        out[:, np.searchsorted(cols, op.cols)] += A @ op.mat
    return LocalOp(out, cols)


class Layout:
    ORDER = ("vertex", "edge", "face", "element")

    def __init__(self, counts, sizes):
        self.sizes = {kind: sizes.get(kind, 0) for kind in self.ORDER}
        self.counts = counts
        self.offsets = {}
        off = 0
        for kind in self.ORDER:
            self.offsets[kind] = off
            off += counts[kind] * self.sizes[kind]
        self.size = off

    def dofs(self, kind, i):
        s = self.sizes[kind]
        o = self.offsets[kind] + i * s
        return np.arange(o, o + s)

    def descriptor(self):
        return {kind: {"count": self.counts[kind], "size": self.sizes[kind], "offset": self.offsets[kind]}
                for kind in self.ORDER if self.sizes[kind]}


def _edge_inner(w, a, b):
    return np.einsum("p,pi,pj->ij", w, a, b)


class DDRComplex:
    """All DDR data of degree k on a PolyMesh."""

    def __init__(self, mesh, k, interp_degree=None):
        if k < 0:
            raise ValueError("k must be >= 0")
        self.mesh, self.k = mesh, k
        self.qdeg = 2 * k + 3
        self.interp_degree = min(ps.MAX_DEGREE, 2 * k + 8) if interp_degree is None else interp_degree
        self._rules = {}
        self._bases = {}
        self._projectors = {}
        self.conditions = {}
        self._layouts()
        self.trE, self.GE = {}, {}
        for E in range(mesh.n_edges):
            self._edge_ops(E)
        self.GF, self.trF, self.CF, self.trtF = {}, {}, {}, {}
        for F in range(mesh.n_faces):
            self._face_ops(F)
        self.GT, self.CT, self.DT = {}, {}, {}
        for T in range(mesh.n_elements):
            self._element_ops(T)
        self._assemble()
        self._assemble_grams()

    # ------------------------------------------------------------ rules and bases
    def rule(self, kind, i, degree=None):
        degree = self.qdeg if degree is None else degree
        key = (kind, i, degree)
        if key not in self._rules:
            m = self.mesh
            if kind == "edge":
                a, b = m.edge_vertices[i]
                r = ps.segment_rule(m.vertices[a], m.vertices[b], degree)
            elif kind == "face":
                r = ps.simplex_rule(m.face_triangles(i), degree)
            else:
                r = ps.simplex_rule(m.element_tets(i), degree)
            self._rules[key] = r
        return self._rules[key]

    def frame(self, kind, i):
        m = self.mesh
        return {"edge": m.edge_frame, "face": m.face_frame, "element": m.element_frame}[kind](i)

    def basis(self, name, i):
        """Component basis by name (see COMPONENTS), possibly orthonormalized."""
        key = (name, i)
        if key in self._bases:
            return self._bases[key]
        kind, build = COMPONENTS[name]
        B = build(self.frame(kind, i), self.k)
        if B.size:
            G = ps.gram(B, self.rule(kind, i))
            cond = np.linalg.cond(G)
            self.conditions[key] = cond
            if cond > COND_LIMIT:
                B = ps.orthonormalize(B, self.rule(kind, i))
        self._bases[key] = B
        return B

    def _layouts(self):
        m, k = self.mesh, self.k
        counts = {"vertex": m.n_vertices, "edge": m.n_edges, "face": m.n_faces, "element": m.n_elements}
        sz = lambda *names: sum(self.basis(n, 0).size for n in names)
        self.layouts = {
            GRAD: Layout(counts, {"vertex": 1, "edge": k, "face": dim_poly(2, k - 1), "element": dim_poly(3, k - 1)}),
            CURL: Layout(counts, {"edge": k + 1, "face": sz("vRF", "vRcF"), "element": sz("vRT", "vRcT")}),
            DIV: Layout(counts, {"face": dim_poly(2, k), "element": sz("wGT", "wGcT")}),
            BROKEN: Layout(counts, {"element": dim_poly(3, k)}),
        }
        # within-entity split of paired components
        self.split = {
            "face_curl": self.basis("vRF", 0).size,
            "element_curl": self.basis("vRT", 0).size,
            "element_div": self.basis("wGT", 0).size,
        }

    def dofs(self, space, kind, i):
        return self.layouts[space].dofs(kind, i)

    def dim(self, space):
        return self.layouts[space].size

    # ------------------------------------------------------------ edges
    def _edge_ops(self, E):
        m, k = self.mesh, self.k
        fr = m.edge_frame(E)
        r = self.rule("edge", E)
        a, b = m.edge_vertices[E]
        xa, xb = m.vertices[a], m.vertices[b]
        cols = np.concatenate([self.dofs(GRAD, "edge", E), self.dofs(GRAD, "vertex", a),
                               self.dofs(GRAD, "vertex", b)])
        Pk = scalar_basis(fr, k)
        qE = self.basis("qE", E)
        dPk = ps.grad(Pk).values(r.points)
        B = _edge_inner(r.weights, dPk, qE.values(r.points))
        rhs = np.hstack([-B, -Pk.values(xa).T, Pk.values(xb).T])
        self.GE[E] = LocalOp(sla.solve(ps.gram(Pk, r), rhs, assume_a="pos"), cols)
        Pk1 = scalar_basis(fr, k + 1)
        A = np.vstack([ps.inner(qE, Pk1, r), Pk1.values(xa), Pk1.values(xb)])
        R = sla.block_diag(ps.gram(qE, r), 1.0, 1.0) if k else np.eye(2)
        self.trE[E] = LocalOp(sla.solve(A, R), cols)

    # ------------------------------------------------------------ faces
    def _face_edge_data(self, F):
        m = self.mesh
        out = []
        nfe = m.n_FE(F)
        for E, om, n in zip(m.face_edges[F], m.face_edge_orient[F], nfe):
            out.append((int(E), int(om), n, self.rule("edge", E)))
        return out

    def _face_ops(self, F):
        m, k = self.mesh, self.k
        fr = m.face_frame(F)
        r = self.rule("face", F)
        edata = self._face_edge_data(F)
        VF = vector_basis(fr, k)
        MV = ps.gram(VF, r)

        def edge_terms(W, trace_ops, basis_of_edge):
            # sum_E omega_FE int_E (W . n_FE) g_j, with g the edge polynomial of each column
            terms = []
            for E, om, n, re in edata:
                wn = np.einsum("pdi,d->pi", W.values3d(re.points), n)
                g = basis_of_edge(E).values(re.points)
                terms.append((om * _edge_inner(re.weights, wn, g), trace_ops[E]))
            return terms

        # gradient and scalar trace
        qF = self.basis("qF", F)
        qF_op = LocalOp(np.eye(qF.size), self.dofs(GRAD, "face", F))
        Pk1E = lambda E: scalar_basis(m.edge_frame(E), k + 1)
        terms = [(-ps.inner(ps.div(VF), qF, r), qF_op)] if qF.size else []
        terms += edge_terms(VF, self.trE, Pk1E)
        rhs = combine(terms, VF.size)
        GF = LocalOp(sla.solve(MV, rhs.mat, assume_a="pos"), rhs.cols)
        self.GF[F] = GF
        W = build_decomp(fr, k + 2)["Rc"]
        Pk1 = scalar_basis(fr, k + 1)
        A = ps.inner(ps.div(W), Pk1, r)
        terms = [(-ps.inner(W, VF, r), GF)] + edge_terms(W, self.trE, Pk1E)
        rhs = combine(terms, W.size)
        self.trF[F] = LocalOp(sla.solve(A, rhs.mat), rhs.cols)

        # curl and tangential trace
        Pk = scalar_basis(fr, k)
        vR, vRc = self.basis("vRF", F), self.basis("vRcF", F)
        fd = self.dofs(CURL, "face", F)
        s = self.split["face_curl"]
        vR_op = LocalOp(np.eye(vR.size), fd[:s])
        vRc_op = LocalOp(np.eye(vRc.size), fd[s:])
        vE_ops = {E: LocalOp(np.eye(k + 1), self.dofs(CURL, "edge", E)) for E, *_ in edata}

        def scalar_edge_terms(Rb, sign):
            terms = []
            for E, om, n, re in edata:
                rv = Rb.values(re.points)
                g = self.basis("vE", E).values(re.points)
                terms.append((sign * om * _edge_inner(re.weights, rv, g), vE_ops[E]))
            return terms

        terms = [(ps.inner(ps.vrot(Pk), vR, r), vR_op)] if vR.size else []
        terms += scalar_edge_terms(Pk, -1.0)
        rhs = combine(terms, Pk.size)
        CF = LocalOp(sla.solve(ps.gram(Pk, r), rhs.mat, assume_a="pos"), rhs.cols)
        self.CF[F] = CF
        Pk1nc = scalar_basis(fr, k + 1).take(slice(1, None))
        Rtest = ps.vrot(Pk1nc)
        Rc = build_decomp(fr, k)["Rc"]
        LHS = np.vstack([ps.inner(Rtest, VF, r), ps.inner(Rc, VF, r)])
        terms = [(ps.inner(Pk1nc, Pk, r), CF)] + scalar_edge_terms(Pk1nc, 1.0)
        top = combine(terms, Pk1nc.size)
        parts = [(np.vstack([np.eye(Pk1nc.size), np.zeros((Rc.size, Pk1nc.size))]), top)]
        if Rc.size:
            parts.append((np.vstack([np.zeros((Pk1nc.size, Rc.size)), ps.inner(Rc, vRc, r)]), vRc_op))
        rhs = combine(parts, LHS.shape[0])
        self.trtF[F] = LocalOp(sla.solve(LHS, rhs.mat), rhs.cols)

    # ------------------------------------------------------------ elements
    def _element_ops(self, T):
        m, k = self.mesh, self.k
        fr = m.element_frame(T)
        r = self.rule("element", T)
        VT = vector_basis(fr, k)
        MV = ps.gram(VT, r)
        faces = m.element_faces[T]
        omegas = m.element_orient[T]

        # gradient
        qT = self.basis("qT", T)
        terms = []
        if qT.size:
            terms.append((-ps.inner(ps.div(VT), qT, r), LocalOp(np.eye(qT.size), self.dofs(GRAD, "element", T))))
        for F, om in zip(faces, omegas):
            rf = self.rule("face", F)
            vn = np.einsum("pdi,d->pi", VT.values3d(rf.points), m.n_F[F])
            g = scalar_basis(m.face_frame(F), k + 1).values(rf.points)
            terms.append((om * _edge_inner(rf.weights, vn, g), self.trF[F]))
        rhs = combine(terms, VT.size)
        self.GT[T] = LocalOp(sla.solve(MV, rhs.mat, assume_a="pos"), rhs.cols)

        # curl
        vR = self.basis("vRT", T)
        ed = self.dofs(CURL, "element", T)
        s = self.split["element_curl"]
        terms = []
        if vR.size:
            terms.append((ps.inner(ps.curl(VT), vR, r), LocalOp(np.eye(vR.size), ed[:s])))
        for F, om in zip(faces, omegas):
            rf = self.rule("face", F)
            wv = VT.values3d(rf.points)
            wxn = np.cross(wv, m.n_F[F][None, :, None], axisa=1, axisb=1, axisc=1)
            g = vector_basis(m.face_frame(F), k).values3d(rf.points)
            terms.append((om * np.einsum("p,pdi,pdj->ij", rf.weights, wxn, g), self.trtF[F]))
        rhs = combine(terms, VT.size)
        self.CT[T] = LocalOp(sla.solve(MV, rhs.mat, assume_a="pos"), rhs.cols)

        # divergence
        Pk = scalar_basis(fr, k)
        wG = self.basis("wGT", T)
        ed = self.dofs(DIV, "element", T)
        s = self.split["element_div"]
        terms = []
        if wG.size:
            terms.append((-ps.inner(ps.grad(Pk), wG, r), LocalOp(np.eye(wG.size), ed[:s])))
        for F, om in zip(faces, omegas):
            rf = self.rule("face", F)
            q = Pk.values(rf.points)
            wF = self.basis("wF", F).values(rf.points)
            terms.append((om * _edge_inner(rf.weights, q, wF), LocalOp(np.eye(wF.shape[1]), self.dofs(DIV, "face", F))))
        rhs = combine(terms, Pk.size)
        self.DT[T] = LocalOp(sla.solve(ps.gram(Pk, r), rhs.mat, assume_a="pos"), rhs.cols)

    # ------------------------------------------------------------ projections
    def projector(self, X, amb, rule):
        """Matrix mapping amb-coefficients to the L2 projection onto span(X)."""
        if X.size == 0:
            return np.zeros((0, amb.size))
        return sla.solve(ps.gram(X, rule), ps.inner(X, amb, rule), assume_a="pos")

    # ------------------------------------------------------------ assembly
    def _assemble(self):
        m, k = self.mesh, self.k
        rowsG, rowsC, rowsD = [], [], []

        def put(store, rows, op):
            store.append((rows, op))

        for E in range(m.n_edges):
            put(rowsG, self.dofs(CURL, "edge", E), self.GE[E])
        for F in range(m.n_faces):
            fr, r = m.face_frame(F), self.rule("face", F)
            VF = vector_basis(fr, k)
            P = np.vstack([self.projector(self.basis("vRF", F), VF, r), self.projector(self.basis("vRcF", F), VF, r)])
            put(rowsG, self.dofs(CURL, "face", F), LocalOp(P @ self.GF[F].mat, self.GF[F].cols))
            put(rowsC, self.dofs(DIV, "face", F), self.CF[F])
        for T in range(m.n_elements):
            fr, r = m.element_frame(T), self.rule("element", T)
            VT = vector_basis(fr, k)
            P = np.vstack([self.projector(self.basis("vRT", T), VT, r), self.projector(self.basis("vRcT", T), VT, r)])
            put(rowsG, self.dofs(CURL, "element", T), LocalOp(P @ self.GT[T].mat, self.GT[T].cols))
            P = np.vstack([self.projector(self.basis("wGT", T), VT, r), self.projector(self.basis("wGcT", T), VT, r)])
            put(rowsC, self.dofs(DIV, "element", T), LocalOp(P @ self.CT[T].mat, self.CT[T].cols))
            put(rowsD, self.dofs(BROKEN, "element", T), self.DT[T])

        def build(store, nr, nc):
            I, J, V = [], [], []
            for rows, op in store:
                I.append(np.repeat(rows, len(op.cols)))
                J.append(np.tile(op.cols, len(rows)))
                V.append(op.mat.ravel())
            A = sp.csr_matrix((np.concatenate(V), (np.concatenate(I), np.concatenate(J))), shape=(nr, nc))
            A.eliminate_zeros()
            return A

        self.G = build(rowsG, self.dim(CURL), self.dim(GRAD))
        self.C = build(rowsC, self.dim(DIV), self.dim(CURL))
        self.D = build(rowsD, self.dim(BROKEN), self.dim(DIV))

    def _assemble_grams(self):
        m = self.mesh
        hT, hF, hE = m.h_T, m.h_F, m.h_E
        wV = np.zeros(m.n_vertices)
        wE_g = np.zeros(m.n_edges)
        wF_g = np.zeros(m.n_faces)
        wE_c = np.zeros(m.n_edges)
        for T, faces in enumerate(m.element_faces):
            for F in faces:
                wF_g[F] += hT[T]
                for E in m.face_edges[F]:
                    wE_g[E] += hT[T] * hF[F]
                    wE_c[E] += hT[T] * hF[F]
                    for V in m.edge_vertices[E]:
                        wV[V] += hT[T] * hF[F] * hE[E]
        blocks = {GRAD: [], CURL: [], DIV: [], BROKEN: []}

        def add(space, kind, i, mats, w):
            blocks[space].append((self.dofs(space, kind, i), w * sla.block_diag(*mats) if mats else None))

        for V in range(m.n_vertices):
            add(GRAD, "vertex", V, [np.eye(1)], wV[V])
        for E in range(m.n_edges):
            r = self.rule("edge", E)
            if self.k:
                add(GRAD, "edge", E, [ps.gram(self.basis("qE", E), r)], wE_g[E])
            add(CURL, "edge", E, [ps.gram(self.basis("vE", E), r)], wE_c[E])
        for F in range(m.n_faces):
            r = self.rule("face", F)
            if self.k:
                add(GRAD, "face", F, [ps.gram(self.basis("qF", F), r)], wF_g[F])
            mats = [ps.gram(self.basis(n, F), r) for n in ("vRF", "vRcF") if self.basis(n, F).size]
            add(CURL, "face", F, mats, wF_g[F])
            add(DIV, "face", F, [ps.gram(self.basis("wF", F), r)], wF_g[F])
        for T in range(m.n_elements):
            r = self.rule("element", T)
            if self.k:
                add(GRAD, "element", T, [ps.gram(self.basis("qT", T), r)], 1.0)
            mats = [ps.gram(self.basis(n, T), r) for n in ("vRT", "vRcT") if self.basis(n, T).size]
            add(CURL, "element", T, mats, 1.0)
            mats = [ps.gram(self.basis(n, T), r) for n in ("wGT", "wGcT") if self.basis(n, T).size]
            add(DIV, "element", T, mats, 1.0)
            add(BROKEN, "element", T, [ps.gram(self.basis("pT", T), r)], 1.0)
        self.gram = {}
        for space, lst in blocks.items():
            n = self.dim(space)
            I, J, V = [], [], []
            for rows, M in lst:
                if M is None or len(rows) == 0:
                    continue
                I.append(np.repeat(rows, len(rows)))
                J.append(np.tile(rows, len(rows)))
                V.append(M.ravel())
            self.gram[space] = sp.csr_matrix((np.concatenate(V), (np.concatenate(I), np.concatenate(J))), shape=(n, n))

    # ------------------------------------------------------------ public operators
    def operator(self, space):
        """Global operator leaving the given space: grad -> G, curl -> C, div -> D."""
        return {GRAD: self.G, CURL: self.C, DIV: self.D}[space]

    def edge_gradient(self, q, E):
        op = self.GE[E]
        return op.mat @ q[op.cols]

    def edge_trace(self, q, E):
        op = self.trE[E]
        return op.mat @ q[op.cols]

    def face_gradient(self, q, F):
        op = self.GF[F]
        return op.mat @ q[op.cols]

    def scalar_trace(self, q, F):
        op = self.trF[F]
        return op.mat @ q[op.cols]

    def element_gradient(self, q, T):
        op = self.GT[T]
        return op.mat @ q[op.cols]

    def face_curl(self, v, F):
        op = self.CF[F]
        return op.mat @ v[op.cols]

    def tangential_trace(self, v, F):
        op = self.trtF[F]
        return op.mat @ v[op.cols]

    def element_curl(self, v, T):
        op = self.CT[T]
        return op.mat @ v[op.cols]

    def element_divergence(self, w, T):
        op = self.DT[T]
        return op.mat @ w[op.cols]

    def global_gradient(self, q):
        return self.G @ q

    def global_curl(self, v):
        return self.C @ v

    def global_divergence(self, w):
        return self.D @ w

    # ------------------------------------------------------------ norms
    def component_product(self, space, a, b):
        return float(a @ (self.gram[space] @ b))

    def component_norm(self, space, v):
        # rescale so the quadratic form neither underflows nor overflows
        s = float(np.abs(v).max(initial=0.0))
        if s == 0.0 or not np.isfinite(s):
            return s
        v = np.asarray(v, float) / s
        return s * float(np.sqrt(max(self.component_product(space, v, v), 0.0)))

    # ------------------------------------------------------------ interpolation
    def _proj(self, B, f, kind, i):
        key = (id(B), kind, i)
        P = self._projectors.get(key)
        if P is None:
            P = self._projectors[key] = (B, ps.Projector(B, self.rule(kind, i, self.interp_degree)))
        return P[1](f)

    def interpolate(self, space, f):
        """Componentwise L2 projections of f and of its traces."""
        m = self.mesh
        if space not in self.layouts:
            raise ValueError(f"unknown space {space!r}")
        out = np.zeros(self.dim(space))
        if space == GRAD:
            for V in range(m.n_vertices):
                out[self.dofs(GRAD, "vertex", V)] = np.asarray(f(m.vertices[V][None]), float).reshape(-1)[0]
            if self.k:
                for E in range(m.n_edges):
                    out[self.dofs(GRAD, "edge", E)] = self._proj(self.basis("qE", E), f, "edge", E)
                for F in range(m.n_faces):
                    out[self.dofs(GRAD, "face", F)] = self._proj(self.basis("qF", F), f, "face", F)
                for T in range(m.n_elements):
                    out[self.dofs(GRAD, "element", T)] = self._proj(self.basis("qT", T), f, "element", T)
        elif space == CURL:
            for E in range(m.n_edges):
                t = m.t_E[E]
                out[self.dofs(CURL, "edge", E)] = self._proj(self.basis("vE", E), lambda x: f(x) @ t, "edge", E)
            for F in range(m.n_faces):
                c = [self._proj(self.basis(n, F), f, "face", F) for n in ("vRF", "vRcF")]
                out[self.dofs(CURL, "face", F)] = np.concatenate(c)
            for T in range(m.n_elements):
                c = [self._proj(self.basis(n, T), f, "element", T) for n in ("vRT", "vRcT")]
                out[self.dofs(CURL, "element", T)] = np.concatenate(c)
        elif space == DIV:
            for F in range(m.n_faces):
                n = m.n_F[F]
                out[self.dofs(DIV, "face", F)] = self._proj(self.basis("wF", F), lambda x: f(x) @ n, "face", F)
            for T in range(m.n_elements):
                c = [self._proj(self.basis(n, T), f, "element", T) for n in ("wGT", "wGcT")]
                out[self.dofs(DIV, "element", T)] = np.concatenate(c)
        elif space == BROKEN:
            for T in range(m.n_elements):
                out[self.dofs(BROKEN, "element", T)] = self._proj(self.basis("pT", T), f, "element", T)
        else:
            raise ValueError(f"unknown space {space!r}")
        return out

    # ------------------------------------------------------------ io
    def dump(self, space, vec):
        return {"space": space, "k": self.k, "layout": self.layouts[space].descriptor(),
                "values": np.asarray(vec, float).tolist()}

    def restore(self, data):
        if data["k"] != self.k or data["layout"] != self.layouts[data["space"]].descriptor():
            raise ValueError("layout mismatch")
        return np.asarray(data["values"], float)


def _dec(kind, ell_shift, key):
    def build(frame, k):
        return build_decomp(frame, k + ell_shift)[key]
    return kind, build


COMPONENTS = {
    "qE": ("edge", lambda fr, k: scalar_basis(fr, k - 1)),
    "qF": ("face", lambda fr, k: scalar_basis(fr, k - 1)),
    "qT": ("element", lambda fr, k: scalar_basis(fr, k - 1)),
    "vE": ("edge", lambda fr, k: scalar_basis(fr, k)),
    "vRF": _dec("face", -1, "R"),
    "vRcF": _dec("face", 0, "Rc"),
    "vRT": _dec("element", -1, "R"),
    "vRcT": _dec("element", 0, "Rc"),
    "wF": ("face", lambda fr, k: scalar_basis(fr, k)),
    "wGT": _dec("element", -1, "G"),
    "wGcT": _dec("element", 0, "Gc"),
    "pT": ("element", lambda fr, k: scalar_basis(fr, k)),
}
