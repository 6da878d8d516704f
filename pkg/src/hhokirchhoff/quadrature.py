"""Quadrature on segments, triangles and polygonal cells.

Triangle rules are collapsed (Duffy) tensor products of Gauss-Jacobi and
Gauss-Legendre points: positive weights, exact for every bivariate
polynomial up to the requested total degree. Cell rules are assembled on the
fan submesh stored in :class:`~hhokirchhoff.mesh.Cell`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

__all__ = [
    "QuadratureRule",
    "gauss_segment",
    "reference_triangle_rule",
    "triangle_rule",
    "quadrature_cell",
    "quadrature_face",
]


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, dim) physical coordinates
    weights: np.ndarray  # (nq,)
    degree: int

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def __len__(self):
        return self.weights.size


@lru_cache(maxsize=None)
def gauss_segment(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [0, 1], exact to ``degree``."""
    if degree < 0:
        raise ValueError("quadrature degree must be >= 0")
    m = degree // 2 + 1
    t, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (t + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def reference_triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the triangle (0,0), (1,0), (0,1); weights sum to 1/2."""
    if degree < 0:
        raise ValueError("quadrature degree must be >= 0")
    m = degree // 2 + 1
    # (1 - u) absorbs the Jacobian of the collapse x = u, y = (1 - u) v
    tu, wu = roots_jacobi(m, 1.0, 0.0)
    u = 0.5 * (tu + 1.0)
    wu = 0.25 * wu
    v, wv = gauss_segment(2 * m - 1)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    pts = np.column_stack([U.ravel(), ((1.0 - U) * V).ravel()])
    return pts, W.ravel()


def triangle_rule(tri: np.ndarray, degree: int) -> QuadratureRule:
    """Map the reference rule onto the triangle with vertex rows ``tri``."""
    ref_pts, ref_w = reference_triangle_rule(degree)
    a, b, c = tri
    jac = np.column_stack([b - a, c - a])
    det = np.linalg.det(jac)
    if det <= 0.0:
        raise ValueError(f"degenerate or inverted simplex (signed area {0.5 * det:.3e})")
    return QuadratureRule(a + ref_pts @ jac.T, ref_w * det, degree)


def quadrature_cell(cell, degree: int) -> QuadratureRule:
    """Rule exact to ``degree`` on a polygonal cell, via its fan submesh."""
    ref_pts, ref_w = reference_triangle_rule(degree)
    tris = cell.simplices
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 0.0):
        raise ValueError(f"degenerate simplex in cell {cell.id}")
    pts = (
        tris[:, None, 0, :]
        + ref_pts[None, :, 0, None] * e1[:, None, :]
        + ref_pts[None, :, 1, None] * e2[:, None, :]
    )
    w = det[:, None] * ref_w[None, :]
    return QuadratureRule(pts.reshape(-1, 2), w.ravel(), degree)


def quadrature_face(face, degree: int) -> QuadratureRule:
    """Gauss rule on a straight face, exact to ``degree``."""
    if face.h <= 0.0:
        raise ValueError(f"degenerate face {face.id}")
    s, w = gauss_segment(degree)
    p0 = face.midpoint - 0.5 * face.h * face.tangent
    pts = p0[None, :] + (s * face.h)[:, None] * face.tangent[None, :]
    return QuadratureRule(pts, w * face.h, degree)
