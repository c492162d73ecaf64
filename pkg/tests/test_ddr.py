import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddr_poincare.ddr import BROKEN, CURL, DIV, GRAD, DDRComplex
from ddr_poincare.cli import cohomology
from ddr_poincare.polyspace import scalar_basis, vector_basis
from conftest import ddr, mesh

MESHES = ["tet", "hex:2", "voided:3"]


def const(v):
    return lambda x: np.full(len(x), float(v))


def affine(a, b=0.3):
    a = np.asarray(a, float)
    return lambda x: x @ a + b


def linear_field(B, b=(0.2, -0.1, 0.4)):
    B = np.asarray(B, float)
    return lambda x: x @ B.T + np.asarray(b)


def curl_of(B):
    return np.array([B[2, 1] - B[1, 2], B[0, 2] - B[2, 0], B[1, 0] - B[0, 1]])


RNG = np.random.default_rng(7)
A3 = RNG.standard_normal((3, 3))


# ------------------------------------------------------------------ edges

@pytest.mark.parametrize("k", [0, 1, 2])
def test_edge_gradient_constant(k):
    c = ddr("voided:3", k)
    q = c.interpolate(GRAD, const(2.5))
    for E in range(c.mesh.n_edges):
        assert np.abs(c.edge_gradient(q, E)).max() * c.mesh.h_E[E] < 2.5e-12


@pytest.mark.parametrize("k", [0, 1, 2])
def test_edge_gradient_mean_is_jump(k, rng):
    c = ddr("voided:3", k)
    m = c.mesh
    q = rng.standard_normal(c.dim(GRAD))
    for E in range(0, m.n_edges, 7):
        r = c.rule("edge", E)
        g = scalar_basis(m.edge_frame(E), k).values(r.points) @ c.edge_gradient(q, E)
        a, b = m.edge_vertices[E]
        jump = q[c.dofs(GRAD, "vertex", b)][0] - q[c.dofs(GRAD, "vertex", a)][0]
        assert r.integrate(g) == pytest.approx(jump, abs=1e-12 * max(1, np.abs(q).max()))


def test_edge_gradient_of_coordinate_is_one():
    c = ddr("hex:1", 1)
    m = c.mesh
    for E in range(m.n_edges):
        t = m.t_E[E]
        q = c.interpolate(GRAD, lambda x: x @ t)
        r = c.rule("edge", E)
        vals = scalar_basis(m.edge_frame(E), 1).values(r.points) @ c.edge_gradient(q, E)
        assert np.allclose(vals, 1.0, atol=1e-12)


# ------------------------------------------------------------------ faces

def face_values3d(c, F, coef, deg):
    r = c.rule("face", F)
    return r, np.einsum("pdm,m->pd", vector_basis(c.mesh.face_frame(F), deg).values3d(r.points), coef)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_face_gradient_and_trace_of_one(k):
    c = ddr("voided:3", k)
    q = c.interpolate(GRAD, const(1))
    for F in range(0, c.mesh.n_faces, 5):
        assert np.abs(c.face_gradient(q, F)).max() * c.mesh.h_F[F] < 1e-12
        r = c.rule("face", F)
        tr = scalar_basis(c.mesh.face_frame(F), k + 1).values(r.points) @ c.scalar_trace(q, F)
        assert np.allclose(tr, 1.0, atol=1e-12)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_face_gradient_affine(k):
    c = ddr("voided:3", k)
    m = c.mesh
    a = np.array([0.7, -1.3, 0.4])
    q = c.interpolate(GRAD, affine(a))
    for F in range(m.n_faces):
        r, g = face_values3d(c, F, c.face_gradient(q, F), k)
        n = m.n_F[F]
        assert np.allclose(g, a - (a @ n) * n, atol=1e-11)
        tr = scalar_basis(m.face_frame(F), k + 1).values(r.points) @ c.scalar_trace(q, F)
        assert np.allclose(tr, affine(a)(r.points), atol=1e-11)


def test_face_operators_zero():
    c = ddr("hex:2", 1)
    z = np.zeros(c.dim(GRAD))
    for F in range(c.mesh.n_faces):
        assert not np.any(c.face_gradient(z, F)) and not np.any(c.scalar_trace(z, F))


@pytest.mark.parametrize("k", [1, 2])
def test_face_gradient_quadratic_trace(k):
    """For k >= 1 quadratic q is reproduced by the face trace."""
    c = ddr("voided:3", k)
    m = c.mesh
    f = lambda x: x[:, 0] * x[:, 1] - 0.5 * x[:, 2] ** 2 + x[:, 1]
    q = c.interpolate(GRAD, f)
    for F in range(0, m.n_faces, 3):
        r = c.rule("face", F)
        tr = scalar_basis(m.face_frame(F), k + 1).values(r.points) @ c.scalar_trace(q, F)
        assert np.allclose(tr, f(r.points), atol=1e-11)


# ------------------------------------------------------------------ elements

@pytest.mark.parametrize("k", [0, 1, 2])
def test_element_gradient(k):
    c = ddr("voided:3", k)
    m = c.mesh
    a = np.array([0.7, -1.3, 0.4])
    # gradients scale like |q| / h
    assert all(np.abs(c.element_gradient(c.interpolate(GRAD, const(3)), T)).max() < 1e-12 * 3 / m.h_T[T]
               for T in range(m.n_elements))
    q = c.interpolate(GRAD, affine(a))
    for T in range(m.n_elements):
        r = c.rule("element", T)
        g = np.einsum("pdm,m->pd", vector_basis(m.element_frame(T), k).values3d(r.points), c.element_gradient(q, T))
        assert np.allclose(g, a, atol=1e-11)


@pytest.mark.parametrize("k", [0, 1])
def test_element_gradient_boundary_term(k):
    """q_T = 0: the element gradient equals the face-trace boundary integral, by quadrature."""
    c = ddr("hex:2", k)
    m = c.mesh
    q = c.interpolate(GRAD, lambda x: x[:, 0] - 2 * x[:, 1] + 0.5 * x[:, 2])
    for T in range(m.n_elements):
        q[c.dofs(GRAD, "element", T)] = 0
    for T in (0, 5):
        VT = vector_basis(m.element_frame(T), k)
        r = c.rule("element", T)
        Vv = VT.values3d(r.points)
        lhs = np.einsum("p,pdm,pd->m", r.weights, Vv, np.einsum("pdm,m->pd", Vv, c.element_gradient(q, T)))
        rhs = np.zeros(VT.size)
        for F, om in zip(m.element_faces[T], m.element_orient[T]):
            rf = c.rule("face", F)
            gam = scalar_basis(m.face_frame(F), k + 1).values(rf.points) @ c.scalar_trace(q, F)
            rhs += om * np.einsum("p,p,pm->m", rf.weights, gam, VT.values3d(rf.points).transpose(0, 2, 1) @ m.n_F[F])
        assert np.allclose(lhs, rhs, atol=1e-12 * max(1, np.abs(rhs).max()))


# ------------------------------------------------------------------ curl

@pytest.mark.parametrize("k", [0, 1, 2])
def test_face_curl_mean(k, rng):
    c = ddr("voided:3", k)
    m = c.mesh
    v = rng.standard_normal(c.dim(CURL))
    for F in range(0, m.n_faces, 4):
        r = c.rule("face", F)
        lhs = r.integrate(scalar_basis(m.face_frame(F), k).values(r.points) @ c.face_curl(v, F))
        rhs = 0.0
        for E, om in zip(m.face_edges[F], m.face_edge_orient[F]):
            re = c.rule("edge", E)
            rhs -= om * re.integrate(c.basis("vE", E).values(re.points) @ v[c.dofs(CURL, "edge", E)])
        assert lhs == pytest.approx(rhs, abs=1e-12 * np.abs(v).max())


@pytest.mark.parametrize("k", [0, 1, 2])
def test_face_curl_linear_fields(k):
    c = ddr("voided:3", k)
    m = c.mesh
    v0 = c.interpolate(CURL, lambda x: np.tile([1., -2, 3], (len(x), 1)))
    assert max(np.abs(c.face_curl(v0, F)).max() * m.h_F[F] for F in range(m.n_faces)) < 3e-12
    v = c.interpolate(CURL, linear_field(A3))
    cu = curl_of(A3)
    # rot_F of (x, -y, 0) in the xy-plane vanishes; the general linear field gives curl . n_F
    for F in range(m.n_faces):
        r = c.rule("face", F)
        vals = scalar_basis(m.face_frame(F), k).values(r.points) @ c.face_curl(v, F)
        assert np.allclose(vals, cu @ m.n_F[F], atol=1e-11)


def test_face_curl_rot_field():
    c = ddr("hex:2", 1)
    m = c.mesh
    v = c.interpolate(CURL, lambda x: np.stack([x[:, 0], -x[:, 1], np.zeros(len(x))], axis=1))
    for F in range(m.n_faces):
        assert np.abs(c.face_curl(v, F)).max() < 1e-11


@pytest.mark.parametrize("k", [1, 2])
def test_tangential_trace_linear(k):
    c = ddr("voided:3", k)
    m = c.mesh
    f = linear_field(A3)
    v = c.interpolate(CURL, f)
    for F in range(0, m.n_faces, 3):
        r, g = face_values3d(c, F, c.tangential_trace(v, F), k)
        n = m.n_F[F]
        val = f(r.points)
        assert np.allclose(g, val - np.outer(val @ n, n), atol=1e-11)


@pytest.mark.parametrize("k", [1, 2])
def test_element_curl(k):
    c = ddr("voided:3", k)
    m = c.mesh
    z = np.zeros(c.dim(CURL))
    v0 = c.interpolate(CURL, lambda x: np.tile([1., 2, 3], (len(x), 1)))
    v = c.interpolate(CURL, lambda x: np.stack([x[:, 1], 0 * x[:, 0], 0 * x[:, 0]], axis=1))
    for T in range(m.n_elements):
        assert not np.any(c.element_curl(z, T))
        assert np.abs(c.element_curl(v0, T)).max() * m.h_T[T] < 3e-12
        r = c.rule("element", T)
        g = np.einsum("pdm,m->pd", vector_basis(m.element_frame(T), k).values3d(r.points), c.element_curl(v, T))
        assert np.allclose(g, [0, 0, -1], atol=1e-11)


# ------------------------------------------------------------------ divergence

@pytest.mark.parametrize("k", [0, 1, 2])
def test_element_divergence(k, rng):
    c = ddr("voided:3", k)
    m = c.mesh
    w = rng.standard_normal(c.dim(DIV))
    wx = c.interpolate(DIV, lambda x: x)
    w0 = c.interpolate(DIV, lambda x: np.tile([1., 2, 3], (len(x), 1)))
    for T in range(m.n_elements):
        r = c.rule("element", T)
        P = scalar_basis(m.element_frame(T), k).values(r.points)
        lhs = r.integrate(P @ c.element_divergence(w, T))
        rhs = sum(om * c.rule("face", F).integrate(c.basis("wF", F).values(c.rule("face", F).points)
                                                    @ w[c.dofs(DIV, "face", F)])
                  for F, om in zip(m.element_faces[T], m.element_orient[T]))
        assert lhs == pytest.approx(rhs, abs=1e-12 * np.abs(w).max())
        assert np.abs(c.element_divergence(w0, T)).max() * m.h_T[T] < 3e-12
        assert np.allclose(P @ c.element_divergence(wx, T), 3.0, atol=1e-11)


# ------------------------------------------------------------------ global

@pytest.mark.parametrize("name", MESHES)
@pytest.mark.parametrize("k", [0, 1, 2])
def test_complex_property(name, k):
    c = ddr(name, k)
    for A, B in ((c.C, c.G), (c.D, c.C)):
        P = A @ B
        assert (abs(P).max() if P.nnz else 0.0) < 1e-10
    rng = np.random.default_rng(k)
    for _ in range(20):
        q = rng.standard_normal(c.dim(GRAD))
        v = rng.standard_normal(c.dim(CURL))
        assert np.linalg.norm(c.global_curl(c.global_gradient(q))) <= 1e-10 * np.linalg.norm(c.G @ q)
        assert np.linalg.norm(c.global_divergence(c.global_curl(v))) <= 1e-10 * np.linalg.norm(c.C @ v)


def test_tet_dims():
    c = ddr("tet", 0)
    assert [c.dim(s) for s in (GRAD, CURL, DIV, BROKEN)] == [4, 6, 4, 1]


@pytest.mark.parametrize("name,b2", [("tet", 0), ("hex:2", 0), ("voided:3", 1)])
@pytest.mark.parametrize("k", [0, 1])
def test_cohomology(name, b2, k):
    coh = cohomology(ddr(name, k))
    assert (coh["b0"], coh["b1"], coh["b2"], coh["onto"]) == (1, 0, b2, True)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_commuting_interpolators(k):
    c = ddr("voided:3", k)
    e = k + 1
    a = np.array([0.3, -0.8, 0.5])
    q = lambda x: (x @ a) ** e + x[:, 0]
    gq = lambda x: e * (x @ a)[:, None] ** (e - 1) * a[None, :] + np.array([1.0, 0, 0])
    assert np.abs(c.G @ c.interpolate(GRAD, q) - c.interpolate(CURL, gq)).max() < 1e-10
    f = linear_field(A3)
    assert np.abs(c.C @ c.interpolate(CURL, f) - c.interpolate(DIV, lambda x: np.tile(curl_of(A3), (len(x), 1)))).max() < 1e-10
    assert np.abs(c.D @ c.interpolate(DIV, f) - c.interpolate(BROKEN, const(np.trace(A3)))).max() < 1e-10


def test_interpolate_constant_and_zero():
    c = ddr("hex:2", 1)
    q = c.interpolate(GRAD, const(4))
    m = c.mesh
    assert np.allclose([q[c.dofs(GRAD, "vertex", V)][0] for V in range(m.n_vertices)], 4)
    for E in range(m.n_edges):
        re = c.rule("edge", E)
        assert np.allclose(c.basis("qE", E).values(re.points) @ q[c.dofs(GRAD, "edge", E)], 4)
    for sp_ in (CURL, DIV):
        assert not np.any(c.interpolate(sp_, lambda x: np.zeros_like(x)))
    assert not np.any(c.interpolate(GRAD, lambda x: np.zeros(len(x))))


def test_unknown_space():
    with pytest.raises(ValueError):
        ddr("tet", 0).interpolate("bogus", const(1))


# ------------------------------------------------------------------ norms

def test_zero_norm():
    c = ddr("hex:2", 1)
    for s in (GRAD, CURL, DIV, BROKEN):
        assert c.component_norm(s, np.zeros(c.dim(s))) == 0


def test_single_edge_norm_weight():
    """v_E = 1 on the unit edge 01 of the reference tet: h_F per face containing it, times h_T."""
    c = ddr("tet", 0)
    m = c.mesh
    E = next(E for E in range(m.n_edges) if tuple(m.edge_vertices[E]) == (0, 1))
    v = np.zeros(c.dim(CURL))
    v[c.dofs(CURL, "edge", E)] = 1.0
    faces = [F for F in range(m.n_faces) if E in m.face_edges[F]]
    assert len(faces) == 2
    expect = m.h_T[0] * sum(m.h_F[F] * 1.0 for F in faces)
    assert c.component_norm(CURL, v) ** 2 == pytest.approx(expect, rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([GRAD, CURL, DIV, BROKEN]), st.floats(-1e3, 1e3), st.integers(0, 2 ** 31))
def test_norm_homogeneity_and_parallelogram(space, s, seed):
    c = ddr("hex:2", 1)
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, c.dim(space)))
    na = c.component_norm(space, a)
    assert c.component_norm(space, s * a) == pytest.approx(abs(s) * na, rel=1e-13, abs=1e-300)
    nab = c.component_norm(space, a + b)
    assert nab ** 2 <= 2 * na ** 2 + 2 * c.component_norm(space, b) ** 2 + 1e-12
    assert c.component_product(space, a, b) == pytest.approx(c.component_product(space, b, a), rel=1e-12)


# ------------------------------------------------------------------ io

def test_dump_restore():
    c = ddr("hex:2", 1)
    v = np.arange(c.dim(CURL), dtype=float)
    data = c.dump(CURL, v)
    assert np.array_equal(c.restore(data), v)
    assert data["layout"]["order"] if isinstance(data["layout"], dict) and "order" in data["layout"] else True
    with pytest.raises(ValueError):
        ddr("hex:2", 0).restore(data)


def test_negative_k():
    with pytest.raises(ValueError):
        DDRComplex(mesh("tet"), -1)
