"""Lowest-order simplicial Whitney forms and their global assembly.

Local bases follow the standard simplicial closed forms for a
positively oriented simplex (V0, V1, V2, V3): hat functions, edge functions
phi_ij (tangential duals), face functions phi_ijk (normal duals) and the
volume function phi_0123.  Two printed formulas are replaced by corrected
versions: the face functions in local_basis carry omega_SF / (3|S|) instead
of the printed 2 / det scaling, and face_norm_closed_form replaces
face_norm_printed.  The printed variants are kept for comparison.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .kernels import whitney_local
from .quadrature import reference_tetrahedron

EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
# face l is the face opposite vertex l: 123, 023, 013, 012
FACES = tuple(tuple(v for v in range(4) if v != l) for l in range(4))


class DegenerateSimplexError(ValueError):
    pass


def _det(a, b, c):
    return float(np.dot(np.cross(a, b), c))


def _cross_matrix(a):
    return np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])


@dataclass
class SimplexBasis:
    """Affine closed forms: scalars g.x + c, vectors K x + b."""

    x: np.ndarray
    vol: float
    hat_g: np.ndarray
    hat_c: np.ndarray
    edge_K: np.ndarray
    edge_b: np.ndarray
    face_K: np.ndarray
    face_b: np.ndarray
    face_omega: np.ndarray
    volume_value: float
    printed_face_K: np.ndarray = field(repr=False, default=None)
    printed_face_b: np.ndarray = field(repr=False, default=None)

    def hats(self, p):
        return np.atleast_2d(p) @ self.hat_g.T + self.hat_c

    def edge_functions(self, p):
        """(npts, 6, 3) in EDGES order."""
        p = np.atleast_2d(p)
        return np.einsum("eij,pj->pei", self.edge_K, p) + self.edge_b[None]

    def face_functions(self, p, printed=False):
        """(npts, 4, 3) in FACES order."""
        K, b = (self.printed_face_K, self.printed_face_b) if printed else (self.face_K, self.face_b)
        p = np.atleast_2d(p)
        return np.einsum("fij,pj->pfi", K, p) + b[None]

    def volume_function(self, p):
        return np.full(len(np.atleast_2d(p)), self.volume_value)

    @property
    def edge_curls(self):
        K = self.edge_K
        return np.stack([K[:, 2, 1] - K[:, 1, 2], K[:, 0, 2] - K[:, 2, 0], K[:, 1, 0] - K[:, 0, 1]], axis=1)

    @property
    def face_divs(self):
        return np.trace(self.face_K, axis1=1, axis2=2)


def face_orientations(x):
    """omega_SF for the ordered normals (x_j - x_i) x (x_k - x_i) of FACES."""
    out = np.zeros(4)
    for l, (i, j, k) in enumerate(FACES):
        n = np.cross(x[j] - x[i], x[k] - x[i])
        out[l] = np.sign(n @ (x[i] - x[l]))
    return out


def local_basis(x, require_positive=True):
    x = np.asarray(x, float)
    d = x[1:] - x[0]
    det = _det(d[0], d[1], d[2])
    scale = max(np.linalg.norm(d, axis=1)) ** 3
    if abs(det) <= 1e-14 * scale:
        raise DegenerateSimplexError("degenerate simplex")
    if require_positive and det < 0:
        raise DegenerateSimplexError("simplex is not positively oriented")
    vol = abs(det) / 6.0
    x0, x1, x2, x3 = x
    # hat functions as printed
    n0 = np.cross(x2 - x1, x3 - x1)
    n1 = np.cross(x2 - x0, x3 - x0)
    n2 = np.cross(x1 - x0, x3 - x0)
    n3 = np.cross(x1 - x0, x2 - x0)
    den = [_det(x2 - x1, x3 - x1, x3 - x0), _det(x2 - x0, x3 - x0, x1 - x0),
           _det(x1 - x0, x3 - x0, x2 - x0), _det(x1 - x0, x2 - x0, x3 - x0)]
    hat_g = np.array([-n0 / den[0], n1 / den[1], n2 / den[2], n3 / den[3]])
    hat_c = np.array([n0 @ x3 / den[0], -n1 @ x0 / den[1], -n2 @ x0 / den[2], -n3 @ x0 / den[3]])
    # edge functions as printed: phi = a x (x - p) / den
    table = {
        (2, 3): (x1 - x0, x0, _det(x1 - x0, x2 - x0, x3 - x2)),
        (1, 3): (x2 - x0, x0, _det(x2 - x0, x1 - x0, x3 - x1)),
        (1, 2): (x3 - x0, x0, _det(x3 - x0, x1 - x0, x2 - x1)),
        (0, 3): (x2 - x1, x1, _det(x2 - x1, x0 - x1, x3 - x0)),
        (0, 2): (x3 - x1, x1, _det(x3 - x1, x0 - x1, x2 - x0)),
        (0, 1): (x3 - x2, x2, _det(x3 - x2, x0 - x2, x1 - x0)),
    }
    edge_K = np.zeros((6, 3, 3))
    edge_b = np.zeros((6, 3))
    for e, ij in enumerate(EDGES):
        a, p, dd = table[ij]
        edge_K[e] = _cross_matrix(a) / dd
        edge_b[e] = -np.cross(a, p) / dd
    # face functions: omega_SF (x - x_l) / (3|S|), dual to the ordered normal
    om = face_orientations(x)
    face_K = np.array([om[l] / (3 * vol) * np.eye(3) for l in range(4)])
    face_b = np.array([-om[l] / (3 * vol) * x[l] for l in range(4)])
    pden = [_det(x2 - x1, x3 - x1, x1 - x0), _det(x2 - x0, x3 - x0, x1 - x0),
            _det(x1 - x0, x3 - x0, x2 - x0), _det(x1 - x0, x2 - x0, x3 - x0)]
    printed_K = np.array([2.0 / pden[l] * np.eye(3) for l in range(4)])
    printed_b = np.array([-2.0 / pden[l] * x[l] for l in range(4)])
    return SimplexBasis(x, vol, hat_g, hat_c, edge_K, edge_b, face_K, face_b, om, 6.0 / det,
                        printed_K, printed_b)


# ---------------------------------------------------------------- identities

def dual_pairings(B, printed_faces=False):
    """Matrices of the three dual pairings (rows: functions, cols: entities)."""
    x = B.x
    P0 = B.hats(x).T
    P1 = np.zeros((6, 6))
    for c, (i, j) in enumerate(EDGES):
        mid = 0.5 * (x[i] + x[j])
        t = x[j] - x[i]  # |E| t_E
        P1[:, c] = B.edge_functions(mid)[0] @ t
    P2 = np.zeros((4, 4))
    for c, (i, j, k) in enumerate(FACES):
        cen = (x[i] + x[j] + x[k]) / 3
        n = 0.5 * np.cross(x[j] - x[i], x[k] - x[i])  # |F| n_F
        P2[:, c] = B.face_functions(cen, printed=printed_faces)[0] @ n
    return P0, P1, P2


def _face_area(x, f):
    i, j, k = f
    return 0.5 * np.linalg.norm(np.cross(x[j] - x[i], x[k] - x[i]))


def edge_norm_closed_form(x, e):
    """Squared norm of the edge function of edge e via the dihedral formula."""
    i, j = EDGES[e]
    k, l = (v for v in range(4) if v not in (i, j))
    vol = abs(_det(x[1] - x[0], x[2] - x[0], x[3] - x[0])) / 6
    A = _face_area(x, (k, l, i))
    B = _face_area(x, (k, l, j))
    ni = np.cross(x[l] - x[k], x[i] - x[k])
    nj = np.cross(x[l] - x[k], x[j] - x[k])
    c = ni @ nj / (np.linalg.norm(ni) * np.linalg.norm(nj))
    return (A ** 2 + B ** 2 + c * A * B) / (90 * vol)


def face_norm_closed_form(x, l):
    """Squared norm of the face function opposite vertex l (corrected form)."""
    vol = abs(_det(x[1] - x[0], x[2] - x[0], x[3] - x[0])) / 6
    d = [x[a] - x[l] for a in range(4) if a != l]
    s = sum(v @ v for v in d) + d[0] @ d[1] + d[0] @ d[2] + d[1] @ d[2]
    return s / (90 * vol)


def face_norm_printed(x, l):
    """The printed closed form with edge lengths and face areas."""
    vol = abs(_det(x[1] - x[0], x[2] - x[0], x[3] - x[0])) / 6
    i, j, k = FACES[l]
    E = sum(np.sum((x[a] - x[l]) ** 2) for a in (i, j, k))
    F = _face_area(x, (l, i, j)) + _face_area(x, (l, i, k)) + _face_area(x, (l, j, k))
    return (E + 2 * F) / (180 * vol)


def basis_norms(x):
    """Closed-form and quadrature squared L2 norms of all basis functions."""
    x = np.asarray(x, float)
    B = local_basis(x, require_positive=False)
    lam, w = reference_tetrahedron(2)
    pts = lam @ x
    w = w * B.vol
    quad = {
        "hat": np.einsum("p,pi->i", w, B.hats(pts) ** 2),
        "edge": np.einsum("p,pei->e", w, B.edge_functions(pts) ** 2),
        "face": np.einsum("p,pfi->f", w, B.face_functions(pts) ** 2),
        "volume": np.array([np.sum(w * B.volume_function(pts) ** 2)]),
    }
    closed = {
        "hat": np.full(4, B.vol / 10),
        "edge": np.array([edge_norm_closed_form(x, e) for e in range(6)]),
        "face": np.array([face_norm_closed_form(x, l) for l in range(4)]),
        "volume": np.array([1.0 / B.vol]),
    }
    printed_face = np.array([face_norm_printed(x, l) for l in range(4)])
    return {"closed": closed, "quadrature": quad, "printed_face": printed_face}


def local_incidence():
    """Local coboundaries in the ordered (sorted local index) orientation."""
    D0 = np.zeros((6, 4))
    for e, (i, j) in enumerate(EDGES):
        D0[e, i], D0[e, j] = -1, 1
    D1 = np.zeros((4, 6))
    eidx = {ij: e for e, ij in enumerate(EDGES)}
    for f, (a, b, c) in enumerate(FACES):
        D1[f, eidx[(a, b)]] = 1
        D1[f, eidx[(b, c)]] = 1
        D1[f, eidx[(a, c)]] = -1
    return D0, D1


def diff_identities(x, npts=10, rng=None):
    """Max residuals of the gradient, curl and divergence identities."""
    rng = np.random.default_rng(0) if rng is None else rng
    x = np.asarray(x, float)
    B = local_basis(x)
    lam = rng.dirichlet(np.ones(4), size=npts)
    pts = lam @ x
    ef = B.edge_functions(pts)
    ff = B.face_functions(pts)
    D0, D1 = local_incidence()
    r0 = 0.0
    for i in range(4):
        rhs = np.zeros((npts, 3))
        for e, (a, b) in enumerate(EDGES):
            if b == i:
                rhs += ef[:, e]
            elif a == i:
                rhs -= ef[:, e]
        r0 = max(r0, np.abs(rhs - B.hat_g[i]).max())
    curls = B.edge_curls
    rhs1 = np.einsum("fe,pfi->pei", D1, ff)
    r1 = np.abs(rhs1 - curls[None]).max()
    r2 = np.abs(B.face_divs - B.face_omega * B.volume_value).max()
    scale0 = np.abs(B.hat_g).max()
    scale1 = np.abs(curls).max()
    scale2 = abs(B.volume_value)
    return {"grad": r0 / scale0, "curl": r1 / scale1, "div": r2 / scale2}


def printed_curl_residual(x):
    """Residual of the curl identity written with omega_SF * omega_FE signs.

    omega_FE is +1 when t_E runs clockwise around the ordered normal of F.
    """
    B = local_basis(x)
    curls = B.edge_curls
    cen = x.mean(0)
    ff = B.face_functions(cen)[0]
    _, D1 = local_incidence()
    res = 0.0
    for e in range(6):
        rhs = np.zeros(3)
        for f in range(4):
            if D1[f, e] != 0:
                omega_fe = -D1[f, e]
                rhs += B.face_omega[f] * omega_fe * ff[f]
        res = max(res, np.abs(rhs - curls[e]).max() / np.abs(curls).max())
    return res


# ---------------------------------------------------------------- global

@dataclass(eq=False)
class WhitneyComplex:
    sub: object
    D0: sp.csr_matrix
    D1: sp.csr_matrix
    D2: sp.csr_matrix
    M0: sp.csr_matrix
    M1: sp.csr_matrix
    M2: sp.csr_matrix
    M3: sp.csr_matrix
    simplex_face_ids: np.ndarray
    simplex_edge_ids: np.ndarray
    simplex_face_omega: np.ndarray

    @property
    def dims(self):
        return (self.D0.shape[1], self.D0.shape[0], self.D1.shape[0], self.D2.shape[0])

    def edge_field(self, coef, s, pts):
        """Value of the global edge field sum coef_E psi_E restricted to simplex s."""
        x = self.sub.points[np.sort(self.sub.simplices[s])]
        B = local_basis(x, require_positive=False)
        return np.einsum("pei,e->pi", B.edge_functions(pts), coef[self.simplex_edge_ids[s]])

    def face_field(self, coef, s, pts):
        x = self.sub.points[np.sort(self.sub.simplices[s])]
        B = local_basis(x, require_positive=False)
        # local_basis signs are w.r.t. the sorted ordered normals, i.e. global ones
        return np.einsum("pfi,f->pi", B.face_functions(pts), coef[self.simplex_face_ids[s]])


def assemble_whitney(sub):
    nV, nE, nF, nS = len(sub.points), len(sub.edges), len(sub.faces), sub.n_simplices
    eidx = {tuple(e): i for i, e in enumerate(sub.edges.tolist())}
    fidx = {tuple(f): i for i, f in enumerate(sub.faces.tolist())}
    e = np.arange(nE)
    D0 = sp.csr_matrix((np.r_[-np.ones(nE), np.ones(nE)], (np.r_[e, e], np.r_[sub.edges[:, 0], sub.edges[:, 1]])),
                       shape=(nE, nV))
    rows, cols, vals = [], [], []
    for f, (a, b, c) in enumerate(sub.faces.tolist()):
        rows += [f, f, f]
        cols += [eidx[(a, b)], eidx[(b, c)], eidx[(a, c)]]
        vals += [1, 1, -1]
    D1 = sp.csr_matrix((vals, (rows, cols)), shape=(nF, nE))
    srt = np.sort(sub.simplices, axis=1)
    coords = sub.points[srt]
    s_faces = np.array([[fidx[tuple(v for m, v in enumerate(q) if m != l)] for l in range(4)] for q in srt.tolist()])
    s_edges = np.array([[eidx[(q[i], q[j])] for i, j in EDGES] for q in srt.tolist()])
    om = np.array([face_orientations(xs) for xs in coords])
    if np.any(om == 0):
        raise DegenerateSimplexError("orientation inconsistency in submesh")
    D2 = sp.csr_matrix((om.ravel(), (np.repeat(np.arange(nS), 4), s_faces.ravel())), shape=(nS, nF))
    vol, grads, m0, m1, m2 = whitney_local(coords)
    m2 = m2 * (om[:, :, None] * om[:, None, :]) / (9 * vol ** 2)[:, None, None]

    def scatter(local, ids, n):
        r = np.repeat(ids, ids.shape[1], axis=1).ravel()
        c = np.tile(ids, (1, ids.shape[1])).ravel()
        return sp.csr_matrix((local.ravel(), (r, c)), shape=(n, n))

    M0 = scatter(m0, srt, nV)
    M1 = scatter(m1, s_edges, nE)
    M2 = scatter(m2, s_faces, nF)
    M3 = sp.diags(1.0 / vol).tocsr()
    return WhitneyComplex(sub, D0, D1, D2, M0, M1, M2, M3, s_faces, s_edges, om)
