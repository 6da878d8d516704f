"""Scaled monomial bases, mass matrices and L2 projectors on cells and faces."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .quadrature import QuadratureRule, quadrature_cell, quadrature_face

__all__ = [
    "CellBasis",
    "FaceBasis",
    "cell_dim",
    "monomial_exponents",
    "mass_matrix",
    "project_cell",
    "project_face",
    "interpolate",
]


def cell_dim(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def monomial_exponents(degree: int) -> np.ndarray:
    """Exponents (a, b) of x^a y^b by total degree, then decreasing a."""
    return np.array([(p - b, b) for p in range(degree + 1) for b in range(p + 1)], dtype=int)


class CellBasis:
    """Scaled monomials ``((x - x_T)/h_T)^a ((y - y_T)/h_T)^b`` on a cell.

    With ``orthonormal=True`` the monomials are replaced by their
    Gram-Schmidt orthonormalisation in L2(T) (computed via a Cholesky
    factor of the monomial Gram matrix). The change of basis is upper
    triangular, so the first ``cell_dim(l)`` functions still span P^l for
    every ``l <= degree``.
    """

    def __init__(self, cell, degree: int, orthonormal: bool = False, rule: QuadratureRule | None = None):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.cell = cell
        self.degree = degree
        self.center = np.asarray(cell.centroid, dtype=float)
        self.scale = float(cell.h)
        self.exponents = monomial_exponents(degree)
        self.coeffs = None
        if orthonormal:
            rule = rule or quadrature_cell(cell, 2 * degree)
            gram = mass_matrix(self, rule)
            L = np.linalg.cholesky(gram)
            self.coeffs = sla.solve_triangular(L, np.eye(len(self)), lower=True).T

    def __len__(self):
        return len(self.exponents)

    def _scaled(self, pts):
        return (np.atleast_2d(pts) - self.center) / self.scale

    def values(self, pts) -> np.ndarray:
        """Basis values, shape ``(npts, dim)``."""
        xi = self._scaled(pts)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        vals = xi[:, 0:1] ** a * xi[:, 1:2] ** b
        return vals if self.coeffs is None else vals @ self.coeffs

    def gradients(self, pts) -> np.ndarray:
        """Basis gradients, shape ``(npts, dim, 2)``."""
        xi = self._scaled(pts)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        x, y = xi[:, 0:1], xi[:, 1:2]
        dx = a * x ** np.maximum(a - 1, 0) * y**b / self.scale
        dy = b * x**a * y ** np.maximum(b - 1, 0) / self.scale
        grad = np.stack([dx, dy], axis=-1)
        if self.coeffs is not None:
            grad = np.einsum("qjd,jk->qkd", grad, self.coeffs)
        return grad

    def evaluate(self, coeffs, pts) -> np.ndarray:
        coeffs = np.asarray(coeffs)
        return self.values(pts)[:, : coeffs.shape[0]] @ coeffs


class FaceBasis:
    """Scaled 1D monomials ``(s / (h_F/2))^a`` in the arclength coordinate.

    ``s`` is measured from the face midpoint along the face tangent
    (oriented from the lower to the higher global vertex index).
    """

    def __init__(self, face, degree: int):
        if degree < 0:
            raise ValueError("degree must be >= 0")
        self.face = face
        self.degree = degree
        self.center = np.asarray(face.midpoint, dtype=float)
        self.tangent = np.asarray(face.tangent, dtype=float)
        self.scale = 0.5 * float(face.h)

    def __len__(self):
        return self.degree + 1

    def coordinate(self, pts) -> np.ndarray:
        return ((np.atleast_2d(pts) - self.center) @ self.tangent) / self.scale

    def values(self, pts) -> np.ndarray:
        s = self.coordinate(pts)
        return s[:, None] ** np.arange(self.degree + 1)

    def evaluate(self, coeffs, pts) -> np.ndarray:
        return self.values(pts) @ np.asarray(coeffs)


def mass_matrix(basis, rule: QuadratureRule) -> np.ndarray:
    """Gram matrix ``M_ij = (phi_i, phi_j)``; ``rule`` must be exact to 2*degree."""
    if rule.degree < 2 * basis.degree:
        raise ValueError(f"quadrature degree {rule.degree} too low for basis degree {basis.degree}")
    phi = basis.values(rule.points)
    M = (phi * rule.weights[:, None]).T @ phi
    return 0.5 * (M + M.T)


def _project(v, basis, rule):
    phi = basis.values(rule.points)
    vals = np.asarray(v(rule.points), dtype=float).reshape(-1)
    M = (phi * rule.weights[:, None]).T @ phi
    rhs = phi.T @ (rule.weights * vals)
    return sla.solve(M, rhs, assume_a="pos")


def project_cell(v, basis: CellBasis, rule: QuadratureRule | None = None) -> np.ndarray:
    """Coefficients of the L2(T) projection of ``v`` onto the span of ``basis``.

    ``v`` maps an ``(npts, 2)`` array of points to values.
    """
    rule = rule or quadrature_cell(basis.cell, 2 * basis.degree + 4)
    return _project(v, basis, rule)


def project_face(v, basis: FaceBasis, rule: QuadratureRule | None = None) -> np.ndarray:
    """Coefficients of the L2(F) projection of ``v`` onto the face polynomials."""
    rule = rule or quadrature_face(basis.face, 2 * basis.degree + 4)
    return _project(v, basis, rule)


def interpolate(v, mesh, k: int, homogeneous: bool = False, quad_degree: int | None = None,
                orthonormal: bool = False):
    """Hybrid interpolant: cellwise and facewise L2 projections of ``v``.

    With ``homogeneous=True`` the boundary-face blocks are set to zero, which
    is exact whenever ``v`` vanishes on the boundary. ``orthonormal`` selects
    the cell basis in which the cell coefficients are expressed.
    """
    from .field import HybridField

    qd = quad_degree if quad_degree is not None else 2 * (k + 2)
    field = HybridField.zeros(mesh, k, homogeneous=homogeneous)
    for cell in mesh.cells:
        field.cell[cell.id] = project_cell(v, CellBasis(cell, k, orthonormal=orthonormal), quadrature_cell(cell, qd))
    skip = set(mesh.boundary_faces.tolist()) if homogeneous else set()
    for face in mesh.faces:
        if face.id in skip:
            continue
        field.face[face.id] = project_face(v, FaceBasis(face, k), quadrature_face(face, qd))
    return field
