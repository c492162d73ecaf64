import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddr_poincare import whitney as wh
from ddr_poincare.cli import random_simplices
from ddr_poincare.mimetic import context, harmonic_dimension
from ddr_poincare.quadrature import simplex_rule
from conftest import mesh

REF = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
SKEW = np.array([[0.1, -0.2, 0.05], [1.3, 0.1, -0.1], [0.2, 0.9, 0.3], [-0.1, 0.2, 1.4]])


def simplices(seed, n):
    return random_simplices(np.random.default_rng(seed), n)


def test_hat_nodal():
    B = wh.local_basis(SKEW)
    assert np.allclose(B.hats(SKEW), np.eye(4), atol=1e-14)


def test_edge_tangential_duality_by_quadrature():
    # independent of dual_pairings: Gauss rule along each edge
    B = wh.local_basis(SKEW)
    g, w = np.polynomial.legendre.leggauss(3)
    s, w = (g + 1) / 2, w / 2
    for c, (i, j) in enumerate(wh.EDGES):
        pts = SKEW[i] + s[:, None] * (SKEW[j] - SKEW[i])
        vals = np.einsum("pei,i->pe", B.edge_functions(pts), SKEW[j] - SKEW[i])
        assert np.allclose(w @ vals, np.eye(6)[c], atol=1e-13)


def test_face_normal_duality_by_quadrature():
    B = wh.local_basis(SKEW)
    for c, f in enumerate(wh.FACES):
        tri = SKEW[list(f)][None]
        r = simplex_rule(tri, 2)
        i, j, k = f
        n = np.cross(SKEW[j] - SKEW[i], SKEW[k] - SKEW[i])
        n /= np.linalg.norm(n)
        vals = np.einsum("pfi,i->pf", B.face_functions(r.points), n)
        assert np.allclose(r.weights @ vals, np.eye(4)[c], atol=1e-13)


@pytest.mark.parametrize("seed", range(3))
def test_dual_pairings_random(seed):
    for x in simplices(seed, 30):
        for P in wh.dual_pairings(wh.local_basis(x, require_positive=False)):
            assert np.abs(P - np.eye(len(P))).max() < 1e-12


def test_hat_and_volume_norms():
    bn = wh.basis_norms(SKEW)
    vol = np.linalg.det(SKEW[1:] - SKEW[0]) / 6
    assert np.allclose(bn["quadrature"]["hat"], vol / 10, rtol=1e-12)
    assert bn["quadrature"]["volume"][0] == pytest.approx(1 / vol, rel=1e-12)


def test_edge_norm_dihedral_form():
    # phi_23: faces 012 and 013 with dihedral coefficient along edge 01
    x = SKEW
    A = 0.5 * np.linalg.norm(np.cross(x[1] - x[0], x[2] - x[0]))
    Bf = 0.5 * np.linalg.norm(np.cross(x[1] - x[0], x[3] - x[0]))
    n2 = np.cross(x[1] - x[0], x[2] - x[0])
    n3 = np.cross(x[1] - x[0], x[3] - x[0])
    c = n2 @ n3 / np.linalg.norm(n2) / np.linalg.norm(n3)
    vol = np.linalg.det(x[1:] - x[0]) / 6
    expect = (A ** 2 + Bf ** 2 + c * A * Bf) / (90 * vol)
    got = wh.basis_norms(x)["quadrature"]["edge"][wh.EDGES.index((2, 3))]
    assert got == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_closed_forms_match_quadrature(seed):
    for x in simplices(seed, 30):
        bn = wh.basis_norms(x)
        for key in ("hat", "edge", "face", "volume"):
            assert np.allclose(bn["closed"][key], bn["quadrature"][key], rtol=1e-12, atol=0)


@pytest.mark.xfail(strict=True, reason="printed face-norm closed form disagrees with quadrature")
def test_printed_face_norm():
    bn = wh.basis_norms(SKEW)
    assert np.allclose(bn["printed_face"], bn["quadrature"]["face"], rtol=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_diff_identities(seed):
    rng = np.random.default_rng(seed)
    for x in simplices(seed, 30):
        res = wh.diff_identities(x, rng=rng)
        assert max(res.values()) < 1e-12


def test_gradient_of_hats_pointwise():
    B = wh.local_basis(SKEW)
    p = np.array([[0.3, 0.2, 0.25]])
    ef = B.edge_functions(p)[0]
    for i in range(4):
        rhs = sum(ef[wh.EDGES.index((j, i))] for j in range(i)) - sum(ef[wh.EDGES.index((i, j))] for j in range(i + 1, 4))
        assert np.allclose(rhs, B.hat_g[i], atol=1e-13)


def test_face_divergence():
    B = wh.local_basis(SKEW)
    assert np.allclose(B.face_divs, B.face_omega * B.volume_value, rtol=1e-13)


@pytest.mark.xfail(strict=True, reason="curl identity with the printed omega_SF*omega_FE signs fails")
def test_printed_curl_signs():
    assert wh.printed_curl_residual(SKEW) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 100))
def test_scaling_laws(s):
    a = wh.basis_norms(SKEW)["quadrature"]
    b = wh.basis_norms(s * SKEW)["quadrature"]
    for key, p in (("hat", 3), ("edge", 1), ("face", -1), ("volume", -3)):
        assert np.allclose(b[key], s ** p * a[key], rtol=1e-10)


def test_degenerate():
    x = REF.copy()
    x[3] = [0.5, 0.5, 0]
    with pytest.raises(wh.DegenerateSimplexError):
        wh.local_basis(x)
    with pytest.raises(wh.DegenerateSimplexError):
        wh.local_basis(REF[[0, 2, 1, 3]])


@pytest.mark.parametrize("name", ["tet", "hex:2", "voided:3"])
def test_global_incidence_exact(name):
    wc = context(mesh(name)).wc
    assert abs(wc.D1 @ wc.D0).max() == 0
    assert abs(wc.D2 @ wc.D1).max() == 0
    for M in (wc.M0, wc.M1, wc.M2, wc.M3):
        assert abs(M - M.T).max() < 1e-12 * abs(M).max()
        assert np.linalg.eigvalsh(M.toarray()).min() > 0


def test_single_tet_counts():
    ctx = context(mesh("tet"))
    assert ctx.wc.dims == (len(ctx.sub.points), len(ctx.sub.edges), len(ctx.sub.faces), ctx.sub.n_simplices)


@pytest.mark.parametrize("name,b2", [("hex:2", 0), ("voided:3", 1)])
def test_second_betti(name, b2):
    assert harmonic_dimension(context(mesh(name)).wc) == b2


def test_global_local_consistency():
    """Global gradient of a P1 field restricts to the local hat-function gradient."""
    ctx = context(mesh("voided:3"))
    wc, sub = ctx.wc, ctx.sub
    u = np.random.default_rng(1).standard_normal(len(sub.points))
    chi = wc.D0 @ u
    for s in range(0, sub.n_simplices, 37):
        ids = np.sort(sub.simplices[s])
        B = wh.local_basis(sub.points[ids], require_positive=False)
        pts = sub.points[ids].mean(0)[None]
        assert np.allclose(wc.edge_field(chi, s, pts)[0], u[ids] @ B.hat_g, atol=1e-11)
    # face field of a curl matches the pointwise curl of the edge field
    e = np.random.default_rng(2).standard_normal(len(sub.edges))
    psi = wc.D1 @ e
    for s in range(0, sub.n_simplices, 41):
        ids = np.sort(sub.simplices[s])
        B = wh.local_basis(sub.points[ids], require_positive=False)
        pts = sub.points[ids].mean(0)[None]
        curl = B.edge_curls.T @ e[wc.simplex_edge_ids[s]]
        assert np.allclose(wc.face_field(psi, s, pts)[0], curl, atol=1e-10 * max(1, np.abs(curl).max()))
