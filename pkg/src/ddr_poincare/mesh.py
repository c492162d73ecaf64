"""Polyhedral meshes: incidence, orientation signs, frames, boundary shells.

Conventions
-----------
* Edge tangents t_E run from the lower to the higher vertex index.
* Face loops are counter-clockwise with respect to n_F.  The in-plane edge
  normal is n_FE = n_F x t_E and omega_FE is chosen so that omega_FE n_FE
  points out of F; hence omega_FE = -1 when the loop traverses E along t_E.
* omega_TF n_F points out of T; omega_OmegaF n_F points out of the domain.
* Face frames (a1, a2) satisfy a1 x a2 = n_F.
"""
import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .polyspace import Frame


class MeshError(ValueError):
    """Invalid mesh data."""


class MeshParseError(MeshError):
    pass


class PlanarityError(MeshError):
    pass


class NonManifoldError(MeshError):
    pass


class OpenElementError(MeshError):
    pass


def newell_normal(pts):
    nxt = np.roll(pts, -1, axis=0)
    return np.array([
        np.sum((pts[:, 1] - nxt[:, 1]) * (pts[:, 2] + nxt[:, 2])),
        np.sum((pts[:, 2] - nxt[:, 2]) * (pts[:, 0] + nxt[:, 0])),
        np.sum((pts[:, 0] - nxt[:, 0]) * (pts[:, 1] + nxt[:, 1])),
    ])


def _diameter(pts):
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1).max()))


@dataclass(eq=False)
class PolyMesh:
    vertices: np.ndarray
    face_vertices: list
    element_faces: list
    face_normals_in: np.ndarray = None
    header: dict = field(default_factory=dict)
    rho_min: float = 0.05
    check: bool = True

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, float).reshape(-1, 3)
        self.face_vertices = [np.asarray(f, dtype=np.int64) for f in self.face_vertices]
        self.element_faces = [np.asarray(e, dtype=np.int64) for e in self.element_faces]
        self._cache = {}
        self._build_edges()
        self._build_faces()
        self._build_elements()
        self._build_boundary()

    # ------------------------------------------------------------ counts
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edge_vertices)

    @property
    def n_faces(self):
        return len(self.face_vertices)

    @property
    def n_elements(self):
        return len(self.element_faces)

    @property
    def h(self):
        return float(self.h_T.max())

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces - self.n_elements

    @property
    def b2(self):
        return len(self.shells)

    # ------------------------------------------------------------ build
    def _build_edges(self):
        nv = self.n_vertices
        pairs = set()
        for f in self.face_vertices:
            if len(f) < 3:
                raise MeshError("face with fewer than 3 vertices")
            if f.min() < 0 or f.max() >= nv:
                raise MeshParseError("face references unknown vertex")
            if len(set(f.tolist())) != len(f):
                raise MeshError("face loop repeats a vertex")
            for a, b in zip(f, np.roll(f, -1)):
                pairs.add((min(a, b), max(a, b)))
        ev = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
        self.edge_vertices = ev
        self.edge_index = {tuple(p): i for i, p in enumerate(ev.tolist())}
        x = self.vertices
        vec = x[ev[:, 1]] - x[ev[:, 0]]
        self.h_E = np.linalg.norm(vec, axis=1)
        self.t_E = vec / self.h_E[:, None]
        self.x_E = 0.5 * (x[ev[:, 0]] + x[ev[:, 1]])

    def _build_faces(self):
        x = self.vertices
        nF = self.n_faces
        self.face_edges, self.face_edge_orient = [], []
        self.n_F = np.zeros((nF, 3))
        self.x_F = np.zeros((nF, 3))
        self.area_F = np.zeros(nF)
        self.h_F = np.zeros(nF)
        self.face_axes = np.zeros((nF, 2, 3))
        self.planarity = np.zeros(nF)
        for F, loop in enumerate(self.face_vertices):
            pts = x[loop]
            nw = newell_normal(pts)
            if np.linalg.norm(nw) == 0:
                raise MeshError(f"degenerate face {F}")
            n = nw / np.linalg.norm(nw)
            if self.face_normals_in is not None:
                given = np.asarray(self.face_normals_in[F], float)
                given = given / np.linalg.norm(given)
                if given @ n <= 0:
                    raise MeshError(f"face {F} loop is not counter-clockwise w.r.t. its stored normal")
                n = given
            hF = _diameter(pts)
            # area centroid via fan from the first vertex
            tri_c, tri_a = [], []
            for i in range(1, len(loop) - 1):
                a = 0.5 * np.cross(pts[i] - pts[0], pts[i + 1] - pts[0]) @ n
                tri_a.append(a)
                tri_c.append((pts[0] + pts[i] + pts[i + 1]) / 3)
            tri_a = np.array(tri_a)
            area = tri_a.sum()
            xc = (tri_a[:, None] * np.array(tri_c)).sum(0) / area
            dev = np.abs((pts - xc) @ n).max()
            self.planarity[F] = dev / hF
            if self.check and dev > 1e-12 * hF * max(1.0, np.abs(pts).max() / hF):
                raise PlanarityError(f"face {F} is not planar (deviation {dev:.3e})")
            a1 = pts[1] - pts[0]
            a1 = a1 - (a1 @ n) * n
            a1 /= np.linalg.norm(a1)
            self.face_axes[F] = [a1, np.cross(n, a1)]
            self.n_F[F], self.x_F[F], self.area_F[F], self.h_F[F] = n, xc, area, hF
            eids, orient = [], []
            for a, b in zip(loop, np.roll(loop, -1)):
                eids.append(self.edge_index[(min(a, b), max(a, b))])
                orient.append(-1 if a < b else 1)
            self.face_edges.append(np.array(eids, dtype=np.int64))
            self.face_edge_orient.append(np.array(orient, dtype=np.int64))

    def _build_elements(self):
        nT, nF = self.n_elements, self.n_faces
        x = self.vertices
        self.face_elements = [[] for _ in range(nF)]
        self.element_orient = []
        self.element_vertices, self.element_edges = [], []
        self.x_T = np.zeros((nT, 3))
        self.vol_T = np.zeros(nT)
        self.h_T = np.zeros(nT)
        for T, faces in enumerate(self.element_faces):
            if faces.min() < 0 or faces.max() >= nF:
                raise MeshParseError("element references unknown face")
            if len(set(faces.tolist())) != len(faces):
                raise MeshError(f"element {T} repeats a face")
            # propagate a consistent orientation over the face adjacency of T
            use = {}
            for j, F in enumerate(faces):
                loop = self.face_vertices[F]
                for a, b in zip(loop, np.roll(loop, -1)):
                    use.setdefault((min(a, b), max(a, b)), []).append((j, 1 if a < b else -1))
            for e, lst in use.items():
                if len(lst) != 2:
                    raise OpenElementError(f"element {T} boundary is not closed at edge {e}")
            sign = np.zeros(len(faces), dtype=np.int64)
            sign[0] = 1
            queue = deque([0])
            adj = {}
            for lst in use.values():
                (j1, d1), (j2, d2) = lst
                adj.setdefault(j1, []).append((j2, d1, d2))
                adj.setdefault(j2, []).append((j1, d2, d1))
            while queue:
                j = queue.popleft()
                for j2, d1, d2 in adj.get(j, []):
                    want = -sign[j] * d1 * d2
                    if sign[j2] == 0:
                        sign[j2] = want
                        queue.append(j2)
                    elif sign[j2] != want:
                        raise MeshError(f"element {T} surface is not orientable")
            if np.any(sign == 0):
                raise OpenElementError(f"element {T} boundary is disconnected")
            verts = np.unique(np.concatenate([self.face_vertices[F] for F in faces]))
            apex = x[verts[0]]
            vol, mom = 0.0, np.zeros(3)
            for s, F in zip(sign, faces):
                loop = self.face_vertices[F]
                xf = self.x_F[F]
                for a, b in zip(loop, np.roll(loop, -1)):
                    p, q = (x[a], x[b]) if s > 0 else (x[b], x[a])
                    v = np.linalg.det(np.stack([xf - apex, p - apex, q - apex])) / 6
                    vol += v
                    mom += v * (apex + xf + p + q) / 4
            if vol < 0:
                sign, vol, mom = -sign, -vol, -mom
            if vol <= 0:
                raise MeshError(f"element {T} has zero volume")
            self.element_orient.append(sign)
            self.vol_T[T] = vol
            self.x_T[T] = mom / vol
            self.h_T[T] = _diameter(x[verts])
            self.element_vertices.append(verts)
            self.element_edges.append(np.unique(np.concatenate([self.face_edges[F] for F in faces])))
            for s, F in zip(sign, faces):
                self.face_elements[F].append((T, int(s)))
        for F, lst in enumerate(self.face_elements):
            if len(lst) not in (1, 2):
                raise NonManifoldError(f"face {F} has {len(lst)} incident elements")
            if len(lst) == 2 and lst[0][1] + lst[1][1] != 0 and self.check:
                raise MeshError(f"interior face {F} has inconsistent element orientations")

    def _build_boundary(self):
        bf = [F for F, lst in enumerate(self.face_elements) if len(lst) == 1]
        self.boundary_faces = np.array(bf, dtype=np.int64)
        self.boundary_orient = np.array([self.face_elements[F][0][1] for F in bf], dtype=np.int64)
        # connected components of boundary faces by shared edges
        by_edge = {}
        for F in bf:
            for E in self.face_edges[F]:
                by_edge.setdefault(int(E), []).append(F)
        comp = {}
        comps = []
        for F in bf:
            if F in comp:
                continue
            cid = len(comps)
            comps.append([])
            comp[F] = cid
            queue = deque([F])
            while queue:
                G = queue.popleft()
                comps[cid].append(G)
                for E in self.face_edges[G]:
                    for H in by_edge[int(E)]:
                        if H not in comp:
                            comp[H] = cid
                            queue.append(H)
        if comps:
            imax = int(np.argmax(self.vertices[:, 0]))
            outer = next(c for c, fs in enumerate(comps)
                         if any(imax in self.face_vertices[F] for F in fs))
        else:
            outer = None
        self.outer_shell = np.array(sorted(comps[outer]), dtype=np.int64) if comps else np.zeros(0, int)
        self.shells = [np.array(sorted(fs), dtype=np.int64) for c, fs in enumerate(comps) if c != outer]
        self.shells.sort(key=lambda a: a[0])
        self.n_boundary_components = len(comps)
        self._omega_boundary = dict(zip(bf, self.boundary_orient.tolist()))

    # ------------------------------------------------------------ accessors
    def omega_boundary(self, F):
        return self._omega_boundary[int(F)]

    def face_frame(self, F):
        key = ("fframe", F)
        if key not in self._cache:
            self._cache[key] = Frame(self.x_F[F], float(self.h_F[F]), self.face_axes[F])
        return self._cache[key]

    def edge_frame(self, E):
        key = ("eframe", E)
        if key not in self._cache:
            self._cache[key] = Frame(self.x_E[E], float(self.h_E[E]), self.t_E[E][None, :])
        return self._cache[key]

    def element_frame(self, T):
        key = ("tframe", T)
        if key not in self._cache:
            self._cache[key] = Frame(self.x_T[T], float(self.h_T[T]), np.eye(3))
        return self._cache[key]

    def n_FE(self, F):
        """In-plane edge normals n_F x t_E for the loop edges of F."""
        return np.cross(self.n_F[F], self.t_E[self.face_edges[F]])

    def face_triangles(self, F):
        """Fan triangles (x_F, v_i, v_{i+1}), counter-clockwise w.r.t. n_F."""
        loop = self.face_vertices[F]
        x = self.vertices
        return np.stack([np.stack([self.x_F[F], x[a], x[b]]) for a, b in zip(loop, np.roll(loop, -1))])

    def element_tets(self, T):
        """Tets (x_T, x_F, v_i, v_{i+1}) of the centroid fan, positively oriented."""
        key = ("tets", T)
        if key not in self._cache:
            tets = []
            for F in self.element_faces[T]:
                for tri in self.face_triangles(F):
                    tet = np.stack([self.x_T[T], tri[0], tri[1], tri[2]])
                    if np.linalg.det(tet[1:] - tet[0]) < 0:
                        tet[[2, 3]] = tet[[3, 2]]
                    tets.append(tet)
            self._cache[key] = np.stack(tets)
        return self._cache[key]

    def void_points(self):
        """A point inside each void: the volume centroid enclosed by each shell."""
        pts = []
        x = self.vertices
        for shell in self.shells:
            vol, mom = 0.0, np.zeros(3)
            ref = x[self.face_vertices[shell[0]][0]]
            for F in shell:
                # outward of the void is -omega_OmegaF n_F
                s = -self.omega_boundary(F)
                for tri in self.face_triangles(F):
                    p, q, r = tri if s > 0 else tri[[0, 2, 1]]
                    v = np.linalg.det(np.stack([p - ref, q - ref, r - ref])) / 6
                    vol += v
                    mom += v * (ref + p + q + r) / 4
            pts.append(mom / vol)
        return np.array(pts).reshape(-1, 3)

    def inscribed_ratio(self):
        """Per element: distance from x_T to the closest face plane over h_T."""
        out = np.zeros(self.n_elements)
        for T, faces in enumerate(self.element_faces):
            d = [abs((self.x_T[T] - self.x_F[F]) @ self.n_F[F]) for F in faces]
            out[T] = min(d) / self.h_T[T]
        return out

    # ------------------------------------------------------------ io
    def to_json(self, header=None):
        hdr = dict(self.header)
        hdr.update(header or {})
        hdr.update(vertices=self.n_vertices, edges=self.n_edges, faces=self.n_faces,
                   elements=self.n_elements, b2=self.b2)
        return {
            "header": hdr,
            "vertices": self.vertices.tolist(),
            "faces": [f.tolist() for f in self.face_vertices],
            "face_normals": self.n_F.tolist(),
            "elements": [e.tolist() for e in self.element_faces],
        }

    def save(self, path, header=None):
        with open(path, "w") as fh:
            json.dump(self.to_json(header), fh)


def from_dict(data, check=True):
    try:
        verts = data["vertices"]
        faces = data["faces"]
        elems = data["elements"]
        normals = data.get("face_normals")
        verts = np.asarray(verts, float)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise MeshParseError("vertices must be a list of 3-vectors")
        if normals is not None:
            normals = np.asarray(normals, float)
            if normals.shape != (len(faces), 3):
                raise MeshParseError("face_normals must match faces")
        faces = [[int(v) for v in f] for f in faces]
        elems = [[int(v) for v in e] for e in elems]
    except MeshParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MeshParseError(f"malformed mesh data: {exc}") from exc
    return PolyMesh(verts, faces, elems, normals, header=dict(data.get("header", {})), check=check)


def load_mesh(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MeshParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise MeshParseError("mesh file must hold a JSON object")
    return from_dict(data)


# ---------------------------------------------------------------- generators

def _hex_grid(n, keep):
    """Cartesian grid of [0,1]^3 keeping cells where keep(i, j, k) holds."""
    N = n + 1

    def vid(i, j, k):
        return i + N * (j + N * k)

    faces, fid = [], {}

    def face(key, loop):
        if key not in fid:
            fid[key] = len(faces)
            faces.append(loop)
        return fid[key]

    def xface(i, j, k):
        return face(("x", i, j, k), [vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)])

    def yface(i, j, k):
        return face(("y", i, j, k), [vid(i, j, k), vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j, k)])

    def zface(i, j, k):
        return face(("z", i, j, k), [vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)])

    elems = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                if keep(i, j, k):
                    elems.append([xface(i, j, k), xface(i + 1, j, k), yface(i, j, k),
                                  yface(i, j + 1, k), zface(i, j, k), zface(i, j, k + 1)])
    g = np.arange(N, dtype=float) / n
    verts = np.array([[g[i], g[j], g[k]] for k in range(N) for j in range(N) for i in range(N)])
    used = np.unique(np.concatenate([np.array(f) for f in faces]))
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    faces = [remap[np.array(f)].tolist() for f in faces]
    return verts[used], faces, elems


def gen_hex_mesh(n):
    if n < 1:
        raise ValueError("n must be >= 1")
    v, f, e = _hex_grid(n, lambda i, j, k: True)
    return PolyMesh(v, f, e, header={"generator": "hex", "n": n})


def gen_voided_cube_mesh(n):
    if n < 3 or n % 3:
        raise ValueError("n must be a positive multiple of 3")
    a, b = n // 3, 2 * n // 3

    def keep(i, j, k):
        return not (a <= i < b and a <= j < b and a <= k < b)

    v, f, e = _hex_grid(n, keep)
    m = PolyMesh(v, f, e, header={"generator": "voided", "n": n})
    m.header["void_points"] = [[0.5, 0.5, 0.5]]
    return m


def single_tet_mesh(coords=None):
    x = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float) if coords is None else np.asarray(coords, float)
    faces = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]]
    return PolyMesh(x, faces, [[0, 1, 2, 3]], header={"generator": "tet"})


def flipped(mesh, T, j):
    """Copy of mesh with omega_TF of the j-th face of element T negated (for testing)."""
    m = PolyMesh.__new__(PolyMesh)
    m.__dict__.update(mesh.__dict__)
    m._cache = {}
    m.element_orient = [s.copy() for s in mesh.element_orient]
    m.element_orient[T][j] *= -1
    return m


# ---------------------------------------------------------------- validation

def validate_mesh(mesh, rho_min=None):
    """Check every mesh invariant; returns a report dict (never raises)."""
    rho_min = mesh.rho_min if rho_min is None else rho_min
    checks = []

    def add(name, worst, tol, ok=None):
        ok = bool(worst <= tol) if ok is None else bool(ok)
        checks.append({"name": name, "status": "pass" if ok else "fail",
                       "worst": float(worst), "tolerance": float(tol)})

    add("face_planarity", float(mesh.planarity.max(initial=0.0)), 1e-12)
    # closed-surface identity sum_F omega_TF |F| n_F = 0
    worst, worst_T = 0.0, -1
    for T, faces in enumerate(mesh.element_faces):
        s = sum(w * mesh.area_F[F] * mesh.n_F[F] for w, F in zip(mesh.element_orient[T], faces))
        r = np.linalg.norm(s) / mesh.h_T[T] ** 2
        if r > worst:
            worst, worst_T = r, T
    add("element_closure", worst, 1e-12)
    checks[-1]["element"] = worst_T
    # outward element normals: omega_TF n_F . (x_F - x_T) > 0
    bad = 0
    for T, faces in enumerate(mesh.element_faces):
        for w, F in zip(mesh.element_orient[T], faces):
            bad += w * mesh.n_F[F] @ (mesh.x_F[F] - mesh.x_T[T]) <= 0
    add("element_normals_outward", bad, 0)
    # interior faces: opposite signs
    worst = 0
    for F in range(mesh.n_faces):
        lst = mesh.face_elements[F]
        if len(lst) == 2:
            w = [mesh.element_orient[T][list(mesh.element_faces[T]).index(F)] for T, _ in lst]
            worst = max(worst, abs(sum(w)))
    add("interior_face_sign_cancellation", worst, 0)
    # omega_FE n_FE points out of F
    bad = 0
    for F in range(mesh.n_faces):
        nfe = mesh.n_FE(F)
        mid = mesh.x_E[mesh.face_edges[F]]
        bad += int(np.sum(mesh.face_edge_orient[F] * np.einsum("ed,ed->e", nfe, mid - mesh.x_F[F]) <= 0))
    add("face_edge_normals_outward", bad, 0)
    # counter-clockwise loops: Newell normal agrees with n_F
    bad = sum(int(newell_normal(mesh.vertices[f]) @ mesh.n_F[F] <= 0) for F, f in enumerate(mesh.face_vertices))
    add("face_loops_ccw", bad, 0)
    rho = mesh.inscribed_ratio()
    add("inscribed_ball_ratio", -float(rho.min()), -rho_min)
    checks[-1]["value"] = float(rho.min())
    add("positive_volumes", int(np.sum(mesh.vol_T <= 0)), 0)
    ok = all(c["status"] == "pass" for c in checks)
    return {
        "valid": ok,
        "counts": {"vertices": mesh.n_vertices, "edges": mesh.n_edges,
                   "faces": mesh.n_faces, "elements": mesh.n_elements},
        "euler_characteristic": mesh.euler_characteristic,
        "boundary_components": mesh.n_boundary_components,
        "b2": mesh.b2,
        "checks": checks,
    }
