import numpy as np
import pytest

from ddr_poincare.submesh import (ELEMENT_CENTER, FACE_CENTER, INTERIOR, ORIGINAL, subentity_sets,
                                  tetrahedralize)
from ddr_poincare.mesh import gen_hex_mesh, single_tet_mesh
from conftest import mesh


def test_single_hex():
    sub = tetrahedralize(gen_hex_mesh(1))
    assert sub.n_simplices == 24


def test_single_tet():
    assert tetrahedralize(single_tet_mesh()).n_simplices == 12


@pytest.mark.parametrize("name", ["tet", "hex:2", "voided:3"])
def test_invariants(name):
    m = mesh(name)
    sub = tetrahedralize(m)
    assert np.all(sub.volumes > 0)
    vol = np.bincount(sub.simplex_element, weights=sub.volumes, minlength=m.n_elements)
    assert np.allclose(vol, m.vol_T, rtol=1e-12, atol=0)
    nV, nF = m.n_vertices, m.n_faces
    assert np.allclose(sub.points[nV:nV + nF], m.x_F)
    assert np.allclose(sub.points[nV + nF:], m.x_T)
    assert np.all(sub.kind[:nV] == ORIGINAL) and np.all(sub.kind[nV:nV + nF] == FACE_CENTER)
    assert np.all(sub.kind[nV + nF:] == ELEMENT_CENTER)
    assert sub.regularity() >= 0.2


def test_volume_partition_hex2():
    assert tetrahedralize(gen_hex_mesh(2)).volumes.sum() == pytest.approx(1.0, abs=1e-12)


def test_conformity():
    m = mesh("voided:3")
    sub = tetrahedralize(m)
    fidx = {tuple(f): i for i, f in enumerate(sub.faces.tolist())}
    count = np.zeros(len(sub.faces), int)
    for q in np.sort(sub.simplices, axis=1).tolist():
        for l in range(4):
            count[fidx[tuple(v for j, v in enumerate(q) if j != l)]] += 1
    on_boundary = np.isin(sub.face_parent_face, m.boundary_faces)
    assert np.all(count[on_boundary] == 1)
    assert np.all(count[~on_boundary] == 2)


def test_mesh_edges_are_subedges():
    m = mesh("hex:2")
    sub = tetrahedralize(m)
    for e, E in enumerate(sub.edge_parent_edge):
        if E != INTERIOR:
            assert tuple(sub.edges[e]) == tuple(m.edge_vertices[E])
    assert np.sum(sub.edge_parent_edge != INTERIOR) == m.n_edges


def test_subentity_sets_hex():
    sub = tetrahedralize(gen_hex_mesh(1))
    simp, faces, edges, verts = subentity_sets(sub, 0)
    assert len(simp) == 24
    assert sum(not b for b in verts.values()) == 1
    assert sum(faces.values()) == 24


def test_subentity_sets_unknown():
    with pytest.raises(KeyError):
        subentity_sets(tetrahedralize(gen_hex_mesh(1)), 5)
