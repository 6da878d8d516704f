import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.abc import x as sx, y as sy
from sympy.geometry import Polygon, Point
from sympy.integrals.intpoly import polytope_integrate

from hhokirchhoff.basis import (
    CellBasis,
    FaceBasis,
    cell_dim,
    interpolate,
    mass_matrix,
    monomial_exponents,
    project_cell,
    project_face,
)
from hhokirchhoff.mesh import build_topology, generate, generate_cartesian, generate_hexagonal
from hhokirchhoff.quadrature import (
    quadrature_cell,
    quadrature_face,
    reference_triangle_rule,
    triangle_rule,
)


def unit_square_cell():
    return generate_cartesian(1).cells[0]


class TestQuadrature:
    def test_unit_square_measure(self):
        q = quadrature_cell(unit_square_cell(), 0)
        assert math.isclose(q.integrate(np.ones(len(q))), 1.0, rel_tol=1e-15)

    def test_x_squared(self):
        q = quadrature_cell(unit_square_cell(), 2)
        assert abs(q.integrate(q.points[:, 0] ** 2) - 1 / 3) <= 1e-14

    @pytest.mark.parametrize("degree", range(13))
    def test_reference_triangle_monomials(self, degree):
        pts, w = reference_triangle_rule(degree)
        assert np.all(w > 0)
        for a, b in monomial_exponents(degree):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            got = w @ (pts[:, 0] ** a * pts[:, 1] ** b)
            assert abs(got - exact) <= 1e-13 * max(exact, 1e-3)

    @pytest.mark.parametrize("degree", range(9))
    def test_square_monomials(self, degree):
        q = quadrature_cell(unit_square_cell(), degree)
        for a, b in monomial_exponents(degree):
            exact = 1.0 / ((a + 1) * (b + 1))
            assert abs(q.integrate(q.points[:, 0] ** a * q.points[:, 1] ** b) - exact) <= 1e-13 * exact

    def test_weights_sum_to_measure(self):
        for family in ("triangular", "hexagonal", "kershaw"):
            m = generate(family, 4)
            for c in m.cells:
                q = quadrature_cell(c, 6)
                assert np.all(q.weights > 0)
                assert abs(q.measure - c.area) <= 1e-13 * c.area

    def test_hex_cell_against_refinement_and_exact(self):
        m = generate_hexagonal(3)
        cell = max(m.cells, key=lambda c: c.n_faces)
        assert cell.n_faces == 6
        f = lambda p: p[:, 0] ** 3 * p[:, 1] ** 2  # noqa: E731
        q = quadrature_cell(cell, 5)
        value = q.integrate(f(q.points))

        # reference: the same rule on a twice uniformly refined fan submesh
        def refine(tri):
            a, b, c = tri
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            return [np.array(t) for t in ([a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca])]

        tris = list(cell.simplices)
        for _ in range(2):
            tris = [s for t in tris for s in refine(t)]
        ref = sum(triangle_rule(t, 5).integrate(f(triangle_rule(t, 5).points)) for t in tris)
        assert abs(value - ref) <= 1e-12 * abs(ref)

        # and a symbolic polygon integral
        # sympy expects clockwise vertex order
        verts = m.vertices[list(cell.vertices)][::-1]
        poly = Polygon(*[Point(sympy.Rational(v[0]).limit_denominator(10**6), sympy.Rational(v[1]).limit_denominator(10**6)) for v in verts])
        exact = float(polytope_integrate(poly, sx**3 * sy**2))
        assert abs(value - exact) <= 1e-12 * abs(exact)

    def test_face_length(self):
        m = generate_cartesian(2)
        q = quadrature_face(m.faces[0], 0)
        assert math.isclose(q.measure, 0.5, rel_tol=1e-15)

    def test_face_cubic(self):
        m = generate_cartesian(1)
        face = next(f for f in m.faces if np.allclose(f.tangent, [1, 0]) and np.isclose(f.midpoint[1], 0))
        q = quadrature_face(face, 3)
        assert abs(q.integrate(q.points[:, 0] ** 3) - 0.25) <= 1e-15

    @pytest.mark.parametrize("k", [0, 1, 2, 3])
    def test_face_basis_products_exact(self, k):
        m = generate_hexagonal(2)
        for face in m.faces[:6]:
            fb = FaceBasis(face, k)
            q = quadrature_face(face, 2 * k + 2)
            V = fb.values(q.points)
            for a in range(k + 1):
                for b in range(k + 1):
                    p = a + b
                    # antiderivative of s^p on [-1, 1], times the Jacobian h_F / 2
                    exact = (1 - (-1) ** (p + 1)) / (p + 1) * face.h / 2
                    assert abs(q.integrate(V[:, a] * V[:, b]) - exact) <= 1e-14 * face.h


class TestBases:
    @pytest.mark.parametrize("degree", range(5))
    def test_dimension_and_constant(self, degree):
        cell = generate_hexagonal(2).cells[3]
        b = CellBasis(cell, degree)
        assert len(b) == cell_dim(degree) == (degree + 1) * (degree + 2) // 2
        pts = np.random.default_rng(0).random((5, 2))
        assert np.allclose(b.values(pts)[:, 0], 1.0)

    def test_gradient_matches_finite_differences(self):
        cell = generate_hexagonal(3).cells[5]
        b = CellBasis(cell, 3)
        p = cell.centroid[None, :] + 0.01
        e = 1e-6
        fd_x = (b.values(p + [e, 0]) - b.values(p - [e, 0])) / (2 * e)
        fd_y = (b.values(p + [0, e]) - b.values(p - [0, e])) / (2 * e)
        g = b.gradients(p)[0]
        assert np.allclose(g[:, 0], fd_x[0], atol=1e-7)
        assert np.allclose(g[:, 1], fd_y[0], atol=1e-7)

    def test_face_basis(self):
        face = generate_cartesian(2).faces[3]
        fb = FaceBasis(face, 2)
        assert len(fb) == 3
        assert np.allclose(fb.values(face.midpoint[None])[0], [1, 0, 0])

    def test_orthonormal_basis(self):
        cell = generate("kershaw", 8).cells[10]
        b = CellBasis(cell, 2, orthonormal=True)
        M = mass_matrix(b, quadrature_cell(cell, 4))
        assert np.allclose(M, np.eye(6), atol=1e-12)


class TestMass:
    def test_degree_zero(self):
        cell = unit_square_cell()
        M = mass_matrix(CellBasis(cell, 0), quadrature_cell(cell, 0))
        assert M.shape == (1, 1) and math.isclose(M[0, 0], 1.0, rel_tol=1e-15)

    def test_condition_number_k2(self):
        cell = unit_square_cell()
        M = mass_matrix(CellBasis(cell, 2), quadrature_cell(cell, 4))
        ev = np.linalg.eigvalsh(M)
        cond = ev[-1] / ev[0]
        # scaled monomials on the unit square, degree 2
        assert np.isfinite(cond) and 10 < cond < 1e4

    def test_symmetric(self):
        cell = generate_hexagonal(3).cells[4]
        M = mass_matrix(CellBasis(cell, 3), quadrature_cell(cell, 6))
        assert np.abs(M - M.T).max() <= 1e-15

    def test_rule_too_weak(self):
        cell = unit_square_cell()
        with pytest.raises(ValueError):
            mass_matrix(CellBasis(cell, 2), quadrature_cell(cell, 2))

    @pytest.mark.parametrize("family", ["triangular", "cartesian", "hexagonal", "kershaw"])
    def test_spd_all_cells(self, family):
        m = generate(family, 4)
        for c in m.cells:
            M = mass_matrix(CellBasis(c, 3), quadrature_cell(c, 6))
            assert np.linalg.eigvalsh(M)[0] > 0


def poly_from(coeffs, degree):
    exps = monomial_exponents(degree)

    def f(p):
        return sum(c * p[:, 0] ** a * p[:, 1] ** b for c, (a, b) in zip(coeffs, exps))

    return f


class TestProjectors:
    def test_x_squared_onto_p1(self):
        cell = unit_square_cell()
        b = CellBasis(cell, 1)
        coef = project_cell(lambda p: p[:, 0] ** 2, b)
        # moment system: int x^2 * {1, x} = {1/3, 1/4} against the Gram of {1, x}
        G = np.array([[1, 1 / 2], [1 / 2, 1 / 3]])
        c0, c1 = np.linalg.solve(G, [1 / 3, 1 / 4])
        assert np.isclose(c0, -1 / 6) and np.isclose(c1, 1.0)
        pts = np.random.default_rng(1).random((10, 2))
        assert np.allclose(b.evaluate(coef, pts), c0 + c1 * pts[:, 0], atol=1e-13)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=10, max_size=10), st.integers(0, 3))
    def test_range_fixed(self, coeffs, degree):
        cell = generate_hexagonal(3).cells[7]
        b = CellBasis(cell, degree)
        f = poly_from(coeffs[: cell_dim(degree)], degree)
        coef = project_cell(f, b)
        pts = quadrature_cell(cell, 2 * degree).points
        scale = 1 + np.abs(coeffs).sum()
        assert np.abs(b.evaluate(coef, pts) - f(pts)).max() <= 1e-11 * scale

    @pytest.mark.parametrize("family", ["cartesian", "hexagonal", "kershaw"])
    def test_exact_coefficient_recovery(self, family):
        cell = generate(family, 4).cells[5]
        b = CellBasis(cell, 2)
        coef = np.arange(1.0, 7.0)
        f = lambda p: b.evaluate(coef, p)  # noqa: E731
        assert np.abs(project_cell(f, b) - coef).max() <= 1e-12

    def test_idempotent(self):
        cell = generate("kershaw", 8).cells[20]
        b = CellBasis(cell, 2)
        v = lambda p: np.exp(p[:, 0]) * np.sin(3 * p[:, 1])  # noqa: E731
        c1 = project_cell(v, b)
        c2 = project_cell(lambda p: b.evaluate(c1, p), b)
        assert np.abs(c1 - c2).max() <= 1e-13 * np.abs(c1).max()

    def test_cell_orthogonality(self):
        cell = generate_hexagonal(4).cells[9]
        b = CellBasis(cell, 2)
        v = lambda p: np.cos(4 * p[:, 0] + p[:, 1])  # noqa: E731
        coef = project_cell(v, b)
        q = quadrature_cell(cell, 16)
        r = v(q.points) - b.evaluate(coef, q.points)
        moments = (b.values(q.points) * (q.weights * r)[:, None]).sum(axis=0)
        vnorm = math.sqrt(q.integrate(v(q.points) ** 2))
        assert np.abs(moments).max() <= 1e-12 * vnorm

    def test_face_constant(self):
        face = generate_cartesian(3).faces[5]
        coef = project_face(lambda p: np.full(len(p), 2.5), FaceBasis(face, 2))
        assert np.allclose(coef, [2.5, 0, 0], atol=1e-14)

    def test_face_symmetry(self):
        # bottom face of the unit square, s = 2x - 1, v = s^2 is even
        m = generate_cartesian(1)
        face = next(f for f in m.faces if np.isclose(f.midpoint[1], 0))
        fb = FaceBasis(face, 1)
        coef = project_face(lambda p: fb.coordinate(p) ** 2, fb)
        assert abs(coef[1]) <= 1e-15
        assert np.isclose(coef[0], 1 / 3)

    def test_face_orthogonality(self):
        face = generate_hexagonal(3).faces[11]
        fb = FaceBasis(face, 2)
        v = lambda p: np.exp(p[:, 0] - p[:, 1])  # noqa: E731
        coef = project_face(v, fb)
        q = quadrature_face(face, 20)
        r = v(q.points) - fb.evaluate(coef, q.points)
        assert np.abs((fb.values(q.points) * (q.weights * r)[:, None]).sum(axis=0)).max() <= 1e-13


def bubble(p):
    return p[:, 0] * (1 - p[:, 0]) * p[:, 1] * (1 - p[:, 1])


class TestInterpolate:
    def test_zero(self):
        f = interpolate(lambda p: np.zeros(len(p)), generate_hexagonal(3), 1)
        assert not f.cell.any() and not f.face.any()

    @pytest.mark.parametrize("family", ["triangular", "cartesian", "hexagonal", "kershaw"])
    def test_boundary_dofs_vanish(self, family):
        m = generate(family, 4)
        f = interpolate(bubble, m, 2)
        assert np.abs(f.face[m.boundary_faces]).max() <= 1e-13

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_projection_decay(self, k):
        v = lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])  # noqa: E731
        hs, errs = [], []
        for n in (4, 8, 16, 32):
            m = generate_cartesian(n)
            total = 0.0
            for c in m.cells:
                b = CellBasis(c, k)
                q = quadrature_cell(c, 2 * k + 8)
                coef = project_cell(v, b, q)
                total += q.integrate((v(q.points) - b.evaluate(coef, q.points)) ** 2)
            hs.append(m.h)
            errs.append(math.sqrt(total))
        slopes = np.diff(np.log(errs)) / np.diff(np.log(hs))
        assert np.all(np.abs(slopes[-3:] - (k + 1)) <= 0.1), slopes
