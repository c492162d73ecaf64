import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddr_poincare.quadrature import (MAX_DEGREE, QuadratureError, reference_segment, reference_tetrahedron,
                                     reference_triangle, segment_rule, simplex_rule)
from ddr_poincare.mesh import gen_hex_mesh
from math import factorial


def test_simplex_measure_exact():
    x = np.array([[[0, 0, 0], [2, 0, 0], [0, 3, 0], [0, 0, 1.5]]], float)
    r = simplex_rule(x, 0)
    assert r.measure == pytest.approx(1.5, rel=1e-14)


def test_hexahedron_x2y2():
    m = gen_hex_mesh(1)
    r = simplex_rule(m.element_tets(0), 4)
    assert r.integrate(r.points[:, 0] ** 2 * r.points[:, 1] ** 2) == pytest.approx(1 / 9, rel=1e-13)


@pytest.mark.parametrize("p", range(0, MAX_DEGREE + 1))
def test_reference_tetrahedron_monomials(p):
    # int over the unit simplex of x^a y^b z^c = a! b! c! / (a+b+c+3)!
    lam, w = reference_tetrahedron(p)
    x = lam[:, 1:]
    for a in range(p + 1):
        for b in range(p + 1 - a):
            c = p - a - b
            exact = factorial(a) * factorial(b) * factorial(c) / factorial(p + 3)
            got = (w * x[:, 0] ** a * x[:, 1] ** b * x[:, 2] ** c).sum() / 6
            assert got == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("p", range(0, MAX_DEGREE + 1))
def test_reference_triangle_monomials(p):
    lam, w = reference_triangle(p)
    x = lam[:, 1:]
    for a in range(p + 1):
        b = p - a
        exact = factorial(a) * factorial(b) / factorial(p + 2)
        assert (w * x[:, 0] ** a * x[:, 1] ** b).sum() / 2 == pytest.approx(exact, rel=1e-12)


def test_segment_rule():
    r = segment_rule(np.zeros(3), np.array([0, 0, 2.0]), 5)
    assert r.integrate(r.points[:, 2] ** 5) == pytest.approx(2 ** 6 / 6, rel=1e-13)
    lam, w = reference_segment(3)
    assert w.sum() == pytest.approx(1.0)


def test_unsupported_degree():
    with pytest.raises(QuadratureError):
        simplex_rule(np.zeros((1, 4, 3)), MAX_DEGREE + 1)
    with pytest.raises(QuadratureError):
        segment_rule(np.zeros(3), np.ones(3), 4, max_degree=3)


def test_face_rule_against_raised_rule():
    """Degree 2k+2 rule on a face integrates products of degree k+1 members like a higher rule."""
    from ddr_poincare.polyspace import scalar_basis, gram
    m = gen_hex_mesh(2)
    F = 5
    k = 2
    B = scalar_basis(m.face_frame(F), k + 1)
    lo = gram(B, simplex_rule(m.face_triangles(F), 2 * k + 2))
    hi = gram(B, simplex_rule(m.face_triangles(F), MAX_DEGREE))
    assert np.abs(lo - hi).max() <= 1e-13 * np.abs(hi).max()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=12, max_size=12), st.integers(0, 6))
def test_simplex_rule_is_affine_invariant(coords, deg):
    x = np.array(coords).reshape(1, 4, 3)
    vol = abs(np.linalg.det(x[0, 1:] - x[0, 0])) / 6
    r = simplex_rule(x, deg)
    assert r.measure == pytest.approx(vol, rel=1e-10, abs=1e-14)
