import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddr_poincare.polyspace import (build_decomp, dim_poly, gram, l2_project, scalar_basis, vector_basis,
                                    Frame)
from ddr_poincare.quadrature import simplex_rule
from conftest import mesh


def test_dims():
    fr3 = mesh("hex:2").element_frame(0)
    fr2 = mesh("hex:2").face_frame(0)
    fr1 = mesh("hex:2").edge_frame(0)
    for l in range(4):
        assert scalar_basis(fr1, l).size == l + 1
        assert scalar_basis(fr2, l).size == (l + 1) * (l + 2) // 2
        assert scalar_basis(fr3, l).size == (l + 1) * (l + 2) * (l + 3) // 6


def test_face_decomp_l0():
    d = build_decomp(mesh("hex:2").face_frame(3), 0)
    assert d["R"].size == 2 and d["Rc"].size == 0


def test_element_decomp_l1():
    d = build_decomp(mesh("hex:2").element_frame(0), 1)
    assert d["Gc"].size == 3 and d["G"].size == 9


def test_negative_degree_empty():
    for fr in (mesh("hex:2").face_frame(0), mesh("hex:2").element_frame(0)):
        assert all(b.size == 0 for b in build_decomp(fr, -1).values())


def _stacked(bases, pts):
    cols = [b.values(pts).reshape(-1, b.size) for b in bases if b.size]
    return np.concatenate(cols, axis=1)


def _rank_ratio(V):
    s = np.linalg.svd(V, compute_uv=False)
    return s[-1] / s[0]


@pytest.mark.parametrize("ell", range(0, 4))
def test_direct_sum_rank(ell):
    m = mesh("voided:3")
    T, F = 4, 7
    rT = simplex_rule(m.element_tets(T), 2 * ell + 2)
    rF = simplex_rule(m.face_triangles(F), 2 * ell + 2)
    d = build_decomp(m.element_frame(T), ell)
    for pair in (("G", "Gc"), ("R", "Rc")):
        V = _stacked([d[p] for p in pair], rT.points)
        assert V.shape[1] == 3 * dim_poly(3, ell)
        assert _rank_ratio(V) > 1e-8
    d = build_decomp(m.face_frame(F), ell)
    V = _stacked([d["R"], d["Rc"]], rF.points)
    assert V.shape[1] == 2 * dim_poly(2, ell)
    assert _rank_ratio(V) > 1e-8


def test_project_constant_on_unit_hex():
    m = mesh("hex:1")
    B = scalar_basis(m.element_frame(0), 0)
    r = simplex_rule(m.element_tets(0), 2)
    c = l2_project(B, lambda x: np.ones(len(x)), r)
    assert np.allclose(B.values(r.points) @ c, 1.0, atol=1e-14)


def test_project_x2_against_normal_equations():
    m = mesh("hex:2")
    T = 3
    B = scalar_basis(m.element_frame(T), 1)
    r = simplex_rule(m.element_tets(T), 4)
    c = l2_project(B, lambda x: x[:, 0] ** 2, r)
    # oracle: normal equations for plain monomials (1, x, y, z) at a high rule
    hi = simplex_rule(m.element_tets(T), 10)
    P = np.column_stack([np.ones(len(hi.points)), hi.points])
    A = P.T @ (hi.weights[:, None] * P)
    b = P.T @ (hi.weights * hi.points[:, 0] ** 2)
    a = np.linalg.solve(A, b)
    pts = simplex_rule(m.element_tets(T), 3).points
    assert np.allclose(B.values(pts) @ c, np.column_stack([np.ones(len(pts)), pts]) @ a, rtol=1e-12, atol=1e-13)


def test_galerkin_orthogonality():
    m = mesh("voided:3")
    F = 11
    r = simplex_rule(m.face_triangles(F), 8)
    B = vector_basis(m.face_frame(F), 2)
    f = lambda x: np.stack([np.sin(x[:, 0]), np.cos(x[:, 1] * x[:, 2]), x[:, 2] ** 3], axis=1)
    c = l2_project(B, f, r)
    V = B.values3d(r.points)
    resid = f(r.points) - np.einsum("pdm,m->pd", V, c)
    g = np.einsum("p,pd,pdm->m", r.weights, resid, V)
    scale = np.sqrt(np.einsum("p,pdm,pdm->m", r.weights, V, V) * r.integrate((f(r.points) ** 2).sum(1)))
    assert np.abs(g / scale).max() < 1e-11


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.lists(st.floats(-5, 5), min_size=20, max_size=20))
def test_projector_idempotent_and_contractive(deg, c0):
    m = mesh("hex:2")
    T = 5
    B = scalar_basis(m.element_frame(T), deg)
    r = simplex_rule(m.element_tets(T), 2 * deg + 4)
    coef = np.asarray(c0[:B.size])
    f = lambda x: B.values(x) @ coef
    assert np.allclose(l2_project(B, f, r), coef, rtol=1e-12, atol=1e-12 * max(1, np.abs(coef).max()))
    # contraction on a non-polynomial function
    g = lambda x: np.exp(x[:, 0] * sum(c0[:3]) / 5) + x[:, 1] ** (deg + 2)
    c = l2_project(B, g, r)
    assert c @ gram(B, r) @ c <= r.integrate(g(r.points) ** 2) * (1 + 1e-11) + 1e-11


def test_gram_spd():
    m = mesh("voided:3")
    B = vector_basis(m.element_frame(2), 3)
    G = gram(B, simplex_rule(m.element_tets(2), 6))
    assert np.allclose(G, G.T)
    assert np.linalg.eigvalsh(G).min() > 0
