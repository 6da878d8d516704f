"""Hybrid high-order operators: reconstruction, stabilisation, assembly, norms.

Local operators act on the local DOF vector of a cell (cell block, then one
block per face in the cell's counterclockwise face order). Global matrices
are assembled over the *full* numbering of :class:`GlobalDofMap`; the
homogeneous Dirichlet versions are their restriction to free DOFs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .basis import CellBasis, FaceBasis, cell_dim
from .field import GlobalDofMap, HybridField, LocalDofLayout
from .quadrature import quadrature_cell, quadrature_face

__all__ = [
    "LocalOps",
    "HHOSpace",
    "reconstruct_operator",
    "stabilization_operator",
    "local_operators",
    "energy_norm",
    "one_norm",
    "grad_recon_norm",
]


@dataclass(frozen=True)
class LocalOps:
    """Per-cell operator bundle.

    ``R`` maps local DOFs to coefficients of the reconstruction in the
    degree ``k + 1`` cell basis; ``G = R^T K R`` is the consistent part,
    ``S = S_root^T S_root`` the stabilisation and ``A = G + S`` the local
    stiffness. ``N`` is the Gram matrix of the standard HHO ``1,h`` seminorm.
    """

    cell: object
    layout: LocalDofLayout
    basis: CellBasis
    R: np.ndarray
    K: np.ndarray
    G: np.ndarray
    S: np.ndarray
    S_root: np.ndarray
    A: np.ndarray
    N: np.ndarray
    cell_mass: np.ndarray
    quad_points: np.ndarray
    quad_weights: np.ndarray
    quad_phi: np.ndarray


def _cell_arrays(cell, k, quad_degree, orthonormal):
    basis = CellBasis(cell, k + 1, orthonormal=orthonormal)
    rule = quadrature_cell(cell, quad_degree)
    phi = basis.values(rule.points)
    grad = basis.gradients(rule.points)
    w = rule.weights
    K = np.einsum("q,qid,qjd->ij", w, grad, grad)
    gram = (phi * w[:, None]).T @ phi
    return basis, rule, phi, K, 0.5 * (gram + gram.T)


def reconstruct_operator(mesh, cell, k: int, quad_degree: int | None = None, orthonormal: bool = False):
    """Local potential reconstruction of degree ``k + 1``.

    Column ``j`` of the returned matrix holds the coefficients of
    ``R_T e_j`` in ``CellBasis(cell, k + 1)``, where ``R_T v`` solves the
    cell Neumann problem

        (grad R v, grad w)_T = (grad v_T, grad w)_T
                               + sum_F (v_F - v_T, grad w . n_TF)_F

    for all ``w`` of degree ``k + 1``, closed by ``(R v, 1)_T = (v_T, 1)_T``
    through a Lagrange multiplier.

    Returns
    -------
    R : ndarray, shape (dim P^{k+1}, n_local)
    """
    qd = quad_degree if quad_degree is not None else 2 * (k + 2)
    basis, _, _, K, gram = _cell_arrays(cell, k, qd, orthonormal)
    return _reconstruction(mesh, cell, k, basis, K, gram)


def _reconstruction(mesh, cell, k, basis, K, gram):
    layout = LocalDofLayout.for_cell(cell, k)
    nR, nc, nt = len(basis), layout.n_cell, layout.n_total
    B = np.zeros((nR, nt))
    B[:, :nc] = K[:, :nc]
    for i, f in enumerate(cell.faces):
        face = mesh.faces[f]
        n = face.normal(cell.id)
        fr = quadrature_face(face, 2 * k + 2)
        psi = basis.values(fr.points)
        dpsi_n = basis.gradients(fr.points) @ n
        fb = FaceBasis(face, k).values(fr.points)
        wd = dpsi_n * fr.weights[:, None]
        B[:, layout.face_slice(i)] += wd.T @ fb
        B[:, :nc] -= wd.T @ psi[:, :nc]
    # first basis function is constant, so the column of 1 in P^{k+1} is gram[:, 0] / phi_0
    mean = gram[:, 0] / basis.values(cell.centroid)[0, 0]
    lhs = np.zeros((nR + 1, nR + 1))
    lhs[:nR, :nR] = K
    lhs[:nR, nR] = mean
    lhs[nR, :nR] = mean
    rhs = np.zeros((nR + 1, nt))
    rhs[:nR] = B
    rhs[nR, :nc] = mean[:nc]
    try:
        sol = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular reconstruction system in cell {cell.id}") from exc
    return sol[:nR]


def stabilization_operator(mesh, cell, k: int, R: np.ndarray, basis: CellBasis, gram: np.ndarray,
                           return_root: bool = False):
    """Face-based stabilisation matrix of a cell.

    For every face the penalised quantity is the face projection of
    ``v_F - v_T - (R v - pi_T^k R v)``; contributions are weighted by
    ``1 / h_T``. With ``return_root=True`` a factor ``L`` with
    ``S = L^T L`` is returned as well, so that ``s_T(v, v) = |L v|^2``
    can be evaluated without cancellation.
    """
    layout = LocalDofLayout.for_cell(cell, k)
    nR, nc, nt = len(basis), layout.n_cell, layout.n_total
    # pi_T^k R v, expressed in the degree-k block of the basis
    proj = sla.solve(gram[:nc, :nc], gram[:nc, :] @ R, assume_a="pos")
    # q = v_T + (R v - pi_T^k R v) as coefficients in P^{k+1}(T)
    Q = R.copy()
    Q[:nc] += np.eye(nc, nt) - proj
    S = np.zeros((nt, nt))
    roots = []
    for i, f in enumerate(cell.faces):
        face = mesh.faces[f]
        fr = quadrature_face(face, 2 * k + 2)
        fb = FaceBasis(face, k).values(fr.points)
        psi = basis.values(fr.points)
        MF = (fb * fr.weights[:, None]).T @ fb
        trace = np.linalg.solve(MF, (fb * fr.weights[:, None]).T @ psi)
        D = -trace @ Q
        D[:, layout.face_slice(i)] += np.eye(k + 1)
        S += D.T @ MF @ D
        roots.append(np.linalg.cholesky(MF).T @ D)
    S /= cell.h
    S = 0.5 * (S + S.T)
    if return_root:
        return S, np.vstack(roots) / np.sqrt(cell.h)
    return S


def _one_norm_matrix(mesh, cell, k, basis, K):
    layout = LocalDofLayout.for_cell(cell, k)
    nc, nt = layout.n_cell, layout.n_total
    N = np.zeros((nt, nt))
    N[:nc, :nc] = K[:nc, :nc]
    for i, f in enumerate(cell.faces):
        face = mesh.faces[f]
        fr = quadrature_face(face, 2 * k + 2)
        E = np.zeros((fr.weights.size, nt))
        E[:, layout.face_slice(i)] = FaceBasis(face, k).values(fr.points)
        E[:, :nc] = -basis.values(fr.points)[:, :nc]
        N += (E * fr.weights[:, None]).T @ E / face.h
    return N


def local_operators(mesh, cell, k: int, quad_degree: int | None = None, orthonormal: bool = False) -> LocalOps:
    """Build every local operator of ``cell`` for polynomial degree ``k``."""
    qd = quad_degree if quad_degree is not None else 2 * (k + 2)
    if qd < 2 * (k + 1):
        raise ValueError("cell quadrature must be exact to at least 2(k+1)")
    basis, rule, phi, K, gram = _cell_arrays(cell, k, qd, orthonormal)
    R = _reconstruction(mesh, cell, k, basis, K, gram)
    S, S_root = stabilization_operator(mesh, cell, k, R, basis, gram, return_root=True)
    G = R.T @ K @ R
    G = 0.5 * (G + G.T)
    nc = cell_dim(k)
    return LocalOps(
        cell=cell,
        layout=LocalDofLayout.for_cell(cell, k),
        basis=basis,
        R=R,
        K=K,
        G=G,
        S=S,
        S_root=S_root,
        A=G + S,
        N=_one_norm_matrix(mesh, cell, k, basis, K),
        cell_mass=gram[:nc, :nc],
        quad_points=rule.points,
        quad_weights=rule.weights,
        quad_phi=phi[:, :nc],
    )


def _shape_key(mesh, cell):
    pts = mesh.vertices[list(cell.vertices)] - cell.centroid
    scale = cell.h
    return (
        round(scale, 13),
        tuple(np.round(pts.ravel() / scale, 11)),
        cell.orientations,
    )


class HHOSpace:
    """Discrete hybrid space of degree ``k`` on a mesh, with assembled operators.

    Local operators of congruent cells (same shape, size and face
    orientations up to translation) are computed once and shared.

    Attributes
    ----------
    dofs : GlobalDofMap
    local : list of LocalOps
    A_full, G_full, N_full : scipy.sparse.csr_matrix
        Stiffness, reconstruction-gradient Gram and ``1,h`` Gram over all DOFs.
    A, G : scipy.sparse.csr_matrix
        Restrictions to free DOFs (homogeneous Dirichlet).
    """

    def __init__(self, mesh, k: int, quad_degree: int | None = None, orthonormal: bool = False):
        if k < 0:
            raise ValueError("k must be >= 0")
        self.mesh = mesh
        self.k = k
        self.quad_degree = quad_degree if quad_degree is not None else 2 * (k + 2)
        self.face_quad_degree = 2 * k + 2
        self.orthonormal = orthonormal
        self.dofs = GlobalDofMap(mesh, k)
        self.nc = cell_dim(k)

        cache: dict = {}
        local = []
        for cell in mesh.cells:
            key = _shape_key(mesh, cell)
            tmpl = cache.get(key)
            if tmpl is None:
                ops = local_operators(mesh, cell, k, self.quad_degree, orthonormal)
                cache[key] = ops
            else:
                shift = cell.centroid - tmpl.cell.centroid
                basis = CellBasis(cell, k + 1)
                if orthonormal:
                    basis.coeffs = tmpl.basis.coeffs
                ops = replace(tmpl, cell=cell, basis=basis, quad_points=tmpl.quad_points + shift)
            local.append(ops)
        self.local = local
        self.n_templates = len(cache)
        self._assemble()
        self._build_quadrature()

    def _assemble(self):
        rows, cols, idx_list = [], [], []
        for ops in self.local:
            idx = self.dofs.local_to_full(ops.cell)
            idx_list.append(idx)
            rows.append(np.repeat(idx, idx.size))
            cols.append(np.tile(idx, idx.size))
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        n = self.dofs.n_full

        def build(attr):
            vals = np.concatenate([getattr(ops, attr).ravel() for ops in self.local])
            return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

        self.A_full = build("A")
        self.G_full = build("G")
        self.N_full = build("N")
        free = self.dofs.free_to_full
        self.A = self.A_full[free][:, free].tocsr()
        self.G = self.G_full[free][:, free].tocsr()
        self.cell_mass_blocks = np.stack([ops.cell_mass for ops in self.local])

    def _build_quadrature(self):
        counts = np.array([ops.quad_weights.size for ops in self.local])
        self.quad_cell = np.repeat(np.arange(self.mesh.n_cells), counts)
        self.quad_points = np.concatenate([ops.quad_points for ops in self.local])
        self.quad_weights = np.concatenate([ops.quad_weights for ops in self.local])
        self.quad_phi = np.concatenate([ops.quad_phi for ops in self.local])

    @property
    def N(self) -> int:
        return self.dofs.n_free

    @property
    def h(self) -> float:
        return self.mesh.h

    # -- fields ---------------------------------------------------------
    def interpolate(self, v, homogeneous: bool = False) -> HybridField:
        from .basis import interpolate

        return interpolate(v, self.mesh, self.k, homogeneous=homogeneous, quad_degree=self.quad_degree,
                           orthonormal=self.orthonormal)

    def field(self, free_vec) -> HybridField:
        return HybridField.from_free(self.dofs, free_vec)

    def cell_values(self, coeffs_free) -> np.ndarray:
        """Cell-polynomial values at the global cell quadrature points.

        ``coeffs_free`` is a free-DOF vector; only its cell block is used.
        """
        cc = np.asarray(coeffs_free)[: self.dofs.n_cells_total].reshape(self.mesh.n_cells, self.nc)
        return np.einsum("qi,qi->q", self.quad_phi, cc[self.quad_cell])

    def cell_load(self, values) -> np.ndarray:
        """Free-DOF vector of ``(g, phi_j)`` where ``g`` is given at quadrature points.

        Face rows are zero: only cell test functions see volume terms.
        """
        contrib = self.quad_phi * (self.quad_weights * values)[:, None]
        out = np.zeros(self.N)
        cells = np.zeros((self.mesh.n_cells, self.nc))
        np.add.at(cells, self.quad_cell, contrib)
        out[: self.dofs.n_cells_total] = cells.ravel()
        return out

    def cell_weighted_mass(self, values) -> np.ndarray:
        """Per-cell blocks of ``(g phi_i, phi_j)_T``, shape ``(n_cells, nc, nc)``."""
        wv = self.quad_weights * values
        prod = self.quad_phi[:, :, None] * self.quad_phi[:, None, :] * wv[:, None, None]
        blocks = np.zeros((self.mesh.n_cells, self.nc, self.nc))
        np.add.at(blocks, self.quad_cell, prod)
        return blocks

    def block_diag_cells(self, blocks) -> sp.csr_matrix:
        """Scatter cell blocks into an ``N x N`` free-DOF sparse matrix."""
        nc, nT = self.nc, self.mesh.n_cells
        base = np.arange(nT)[:, None, None] * nc
        r = np.broadcast_to(base + np.arange(nc)[None, :, None], blocks.shape)
        c = np.broadcast_to(base + np.arange(nc)[None, None, :], blocks.shape)
        return sp.csr_matrix((blocks.ravel(), (r.ravel(), c.ravel())), shape=(self.N, self.N))

    def reconstruct(self, field: HybridField, cell_id: int) -> np.ndarray:
        ops = self.local[cell_id]
        return ops.R @ field.local(ops.cell)

    # -- norms ----------------------------------------------------------
    def energy_norm(self, field: HybridField) -> float:
        x = field.full()
        return float(np.sqrt(max(x @ (self.A_full @ x), 0.0)))

    def grad_recon_norm(self, field: HybridField) -> float:
        x = field.full()
        return float(np.sqrt(max(x @ (self.G_full @ x), 0.0)))

    def one_norm(self, field: HybridField) -> float:
        x = field.full()
        return float(np.sqrt(max(x @ (self.N_full @ x), 0.0)))

    def stabilization_seminorm(self, field: HybridField) -> float:
        total = 0.0
        for ops in self.local:
            total += np.sum((ops.S_root @ field.local(ops.cell)) ** 2)
        return float(np.sqrt(total))

    def reconstruction_errors(self, u, grad_u, quad_degree: int | None = None) -> dict:
        """Errors of ``R_h I_h u`` against ``u``.

        Returns the global L2 error, the ``h_T^{1/2}``-weighted boundary L2
        error and the broken gradient error, each summed over cells.
        """
        qd = quad_degree if quad_degree is not None else self.quad_degree + 4
        Ih = self.interpolate(u)
        l2 = bnd = grad = 0.0
        for ops in self.local:
            cell = ops.cell
            coef = ops.R @ Ih.local(cell)
            rule = quadrature_cell(cell, qd)
            e = u(rule.points) - ops.basis.values(rule.points) @ coef
            ge = grad_u(rule.points) - np.einsum("qid,i->qd", ops.basis.gradients(rule.points), coef)
            l2 += rule.weights @ e**2
            grad += rule.weights @ (ge**2).sum(axis=1)
            for f in cell.faces:
                fr = quadrature_face(self.mesh.faces[f], qd)
                eb = u(fr.points) - ops.basis.values(fr.points) @ coef
                bnd += cell.h * (fr.weights @ eb**2)
        return {"l2": float(np.sqrt(l2)), "boundary": float(np.sqrt(bnd)), "grad": float(np.sqrt(grad))}


def energy_norm(space: HHOSpace, field: HybridField) -> float:
    """Discrete energy norm ``sqrt(a_h(v, v))``."""
    return space.energy_norm(field)


def one_norm(space: HHOSpace, field: HybridField) -> float:
    """Standard HHO norm: broken gradient of cell parts plus scaled face jumps."""
    return space.one_norm(field)


def grad_recon_norm(space: HHOSpace, field: HybridField) -> float:
    """L2 norm of the broken gradient of the global reconstruction."""
    return space.grad_recon_norm(field)
