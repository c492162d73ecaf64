"""Conforming tetrahedral submesh adding only face and element centroids.

Subvertex numbering: mesh vertices first, then face centroids, then element
centroids.  Subedges and subfaces are stored as sorted index tuples; a
subedge points from its lower to its higher index and a subface carries the
ordered normal (x_j - x_i) x (x_k - x_i) for i < j < k.  Since mesh vertices
keep their indices, every mesh edge is a subedge with the same orientation.
"""
from dataclasses import dataclass

import numpy as np

ORIGINAL, FACE_CENTER, ELEMENT_CENTER = 0, 1, 2
INTERIOR = -1


class SubmeshError(ValueError):
    pass


@dataclass(eq=False)
class SubMesh:
    mesh: object
    points: np.ndarray
    kind: np.ndarray
    simplices: np.ndarray
    simplex_element: np.ndarray
    simplex_face: np.ndarray
    edges: np.ndarray
    faces: np.ndarray
    edge_parent_edge: np.ndarray
    face_parent_face: np.ndarray
    vertex_parent: np.ndarray

    @property
    def n_simplices(self):
        return len(self.simplices)

    @property
    def volumes(self):
        x = self.points[self.simplices]
        return np.linalg.det(x[:, 1:] - x[:, :1]) / 6.0

    def face_normals(self):
        x = self.points[self.faces]
        return np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])

    def regularity(self):
        """min over simplices of h_S / h_T."""
        x = self.points[self.simplices]
        d = np.sqrt(((x[:, :, None] - x[:, None, :]) ** 2).sum(-1)).max(axis=(1, 2))
        return float((d / self.mesh.h_T[self.simplex_element]).min())


def tetrahedralize(mesh):
    nV, nF, nT = mesh.n_vertices, mesh.n_faces, mesh.n_elements
    points = np.vstack([mesh.vertices, mesh.x_F, mesh.x_T])
    kind = np.concatenate([np.full(nV, ORIGINAL), np.full(nF, FACE_CENTER), np.full(nT, ELEMENT_CENTER)])
    vparent = np.concatenate([np.arange(nV), np.arange(nF), np.arange(nT)])
    simp, s_elem, s_face = [], [], []
    for T, faces in enumerate(mesh.element_faces):
        cT = nV + nF + T
        tol = 1e-14 * mesh.h_T[T] ** 3
        for F in faces:
            loop = mesh.face_vertices[F]
            cF = nV + F
            for a, b in zip(loop, np.roll(loop, -1)):
                q = [cT, cF, int(a), int(b)]
                x = points[q]
                det = np.linalg.det(x[1:] - x[0])
                if det < 0:
                    q[2], q[3] = q[3], q[2]
                if abs(det) / 6 < tol:
                    raise SubmeshError(f"degenerate simplex in element {T}")
                simp.append(q)
                s_elem.append(T)
                s_face.append(F)
    simp = np.array(simp, dtype=np.int64)
    edges = set()
    faces = set()
    for q in simp:
        s = sorted(q)
        for i in range(4):
            for j in range(i + 1, 4):
                edges.add((s[i], s[j]))
        for l in range(4):
            faces.add(tuple(v for m, v in enumerate(s) if m != l))
    edges = np.array(sorted(edges), dtype=np.int64)
    faces = np.array(sorted(faces), dtype=np.int64)
    e_parent = np.full(len(edges), INTERIOR, dtype=np.int64)
    for i, (a, b) in enumerate(edges):
        if b < nV:
            e_parent[i] = mesh.edge_index[(a, b)]
    f_parent = np.full(len(faces), INTERIOR, dtype=np.int64)
    for i, (a, b, c) in enumerate(faces):
        if c < nV + nF and b < nV and c >= nV:
            f_parent[i] = c - nV
    return SubMesh(mesh, points, kind, simp, np.array(s_elem), np.array(s_face), edges, faces,
                   e_parent, f_parent, vparent)


def subentity_sets(sub, T):
    """Simplices of T and the subfaces, subedges, subvertices of their closure.

    Each closure entity is tagged True when it lies on the boundary of T.
    """
    mesh = sub.mesh
    if not 0 <= T < mesh.n_elements:
        raise KeyError(f"unknown element {T}")
    simp = np.flatnonzero(sub.simplex_element == T)
    verts = np.unique(sub.simplices[simp])
    cT = mesh.n_vertices + mesh.n_faces + T
    on_boundary_v = {int(v): v != cT for v in verts}
    fidx = {tuple(f): i for i, f in enumerate(sub.faces.tolist())}
    eidx = {tuple(e): i for i, e in enumerate(sub.edges.tolist())}
    sf, se = set(), set()
    for q in sub.simplices[simp]:
        s = sorted(q.tolist())
        for l in range(4):
            sf.add(fidx[tuple(v for m, v in enumerate(s) if m != l)])
        for i in range(4):
            for j in range(i + 1, 4):
                se.add(eidx[(s[i], s[j])])
    subfaces = {f: cT not in sub.faces[f] for f in sorted(sf)}
    subedges = {e: cT not in sub.edges[e] for e in sorted(se)}
    return simp, subfaces, subedges, on_boundary_v
