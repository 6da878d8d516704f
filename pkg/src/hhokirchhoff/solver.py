"""Newton solver for the discrete nonlocal Kirchhoff problem.

The unknowns are the free hybrid coefficients ``alpha`` and the scalar
``d`` standing for ``|grad R_h u_h|^2``. The residual is

    F_j     = M(d) (A alpha)_j - (f(u_h), phi_j)        j = 1..N
    F_{N+1} = alpha^T G alpha - d

and its Jacobian is the sparse matrix ``M(d) A - (f_u(u_h) phi_i, phi_j)``
bordered by one column ``b``, one row ``c`` and the corner ``-1``. Each
Newton step eliminates the border with two solves against the sparse block,
which are themselves done by static condensation of the cell unknowns.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .field import HybridField
from .hho import HHOSpace

__all__ = [
    "SingularBorderedSystem",
    "NonFiniteLoad",
    "JacobianBlocks",
    "NewtonReport",
    "NewtonResult",
    "EigenResult",
    "residual",
    "jacobian_blocks",
    "full_jacobian",
    "bordered_solve",
    "dense_bordered_solve",
    "StaticCondensation",
    "linear_solver",
    "poisson_initial_guess",
    "newton_solve",
    "smallest_eigenvalue",
    "load_norm",
    "a_priori_bound",
]

log = logging.getLogger(__name__)


class SingularBorderedSystem(np.linalg.LinAlgError):
    pass


class NonFiniteLoad(FloatingPointError):
    pass


def _load_values(space: HHOSpace, problem, alpha, derivative=False):
    u = space.cell_values(alpha)
    fn = problem.df if derivative else problem.f
    vals = np.asarray(fn(space.quad_points, u), dtype=float)
    vals = np.broadcast_to(vals, u.shape)
    if not np.all(np.isfinite(vals)):
        q = int(np.flatnonzero(~np.isfinite(vals))[0])
        name = "f_u" if derivative else "f"
        raise NonFiniteLoad(
            f"{name} is not finite in cell {space.quad_cell[q]} at quadrature point {space.quad_points[q].tolist()}"
        )
    return vals


def residual(alpha, d: float, problem, space: HHOSpace) -> np.ndarray:
    """Residual vector of length ``N + 1``."""
    alpha = np.asarray(alpha, dtype=float)
    top = problem.M(d) * (space.A @ alpha) - space.cell_load(_load_values(space, problem, alpha))
    return np.append(top, alpha @ (space.G @ alpha) - d)


@dataclass
class JacobianBlocks:
    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    delta: float = -1.0

    def dense(self) -> np.ndarray:
        n = self.b.size
        J = np.empty((n + 1, n + 1))
        J[:n, :n] = self.A.toarray()
        J[:n, n] = self.b
        J[n, :n] = self.c
        J[n, n] = self.delta
        return J


def jacobian_blocks(alpha, d: float, problem, space: HHOSpace) -> JacobianBlocks:
    """Blocks of the bordered Jacobian at ``(alpha, d)``."""
    alpha = np.asarray(alpha, dtype=float)
    Aalpha = space.A @ alpha
    A = problem.M(d) * space.A
    fu = _load_values(space, problem, alpha, derivative=True)
    if np.any(fu != 0.0):
        A = A - space.block_diag_cells(space.cell_weighted_mass(fu))
    return JacobianBlocks(A=A.tocsr(), b=problem.dM(d) * Aalpha, c=2.0 * (space.G @ alpha), delta=-1.0)


def full_jacobian(alpha, d, problem, space) -> np.ndarray:
    return jacobian_blocks(alpha, d, problem, space).dense()


def dense_bordered_solve(A, b, c, delta, rhs) -> np.ndarray:
    """Reference solve of the bordered system by dense LU."""
    n = b.size
    J = np.empty((n + 1, n + 1))
    J[:n, :n] = A.toarray() if sp.issparse(A) else A
    J[:n, n] = b
    J[n, :n] = c
    J[n, n] = delta
    return sla.solve(J, rhs)


def bordered_solve(A, b, c, delta, rhs, tol: float = 1e-14) -> np.ndarray:
    """Solve ``[[A, b], [c, delta]] [x; y] = rhs`` by block elimination.

    Uses exactly two solves with ``A`` (one for the top of ``rhs``, one for
    ``b``), i.e. the Sherman-Morrison-Woodbury form of the rank-one border.
    ``A`` may be a matrix or any object with a ``solve`` method.
    """
    solver = A if hasattr(A, "solve") else linear_solver(A, "lu")
    rhs = np.asarray(rhs, dtype=float)
    top, bottom = rhs[:-1], rhs[-1]
    z1 = solver.solve(top)
    z2 = solver.solve(np.asarray(b, dtype=float))
    schur = c @ z2 - delta
    if abs(schur) < tol:
        raise SingularBorderedSystem(f"bordered Schur scalar {schur:.3e} is numerically zero")
    y = (c @ z1 - bottom) / schur
    return np.append(z1 - y * z2, y)


class _LU:
    def __init__(self, A):
        A = sp.csc_matrix(A)
        self.n = A.shape[0]
        self.n_solves = 0
        self._lu = spla.splu(A) if self.n else None

    def solve(self, rhs):
        self.n_solves += 1
        if not self.n:
            return np.zeros(0)
        return self._lu.solve(np.asarray(rhs, dtype=float))


class _Dense:
    def __init__(self, A):
        self.A = A.toarray() if sp.issparse(A) else np.asarray(A)
        self.n_solves = 0
        self._lu = sla.lu_factor(self.A)

    def solve(self, rhs):
        self.n_solves += 1
        return sla.lu_solve(self._lu, rhs)


class _CG:
    def __init__(self, A, rtol=1e-12):
        self.A = sp.csr_matrix(A)
        self.rtol = rtol
        self.n_solves = 0
        diag = self.A.diagonal()
        self._M = sp.diags(1.0 / np.where(diag > 0, diag, 1.0))

    def solve(self, rhs):
        self.n_solves += 1
        x, info = spla.cg(self.A, rhs, rtol=self.rtol, atol=0.0, M=self._M, maxiter=10 * self.A.shape[0])
        if info != 0:
            raise RuntimeError(f"conjugate gradient did not converge (info={info})")
        return x


class StaticCondensation:
    """Solve ``A x = r`` by eliminating the block-diagonal cell unknowns.

    The first ``n_cells * block`` unknowns must be cell DOFs that couple only
    within their own cell, so ``A_cc`` is block diagonal. The face system is
    the Schur complement ``A_ff - A_fc A_cc^{-1} A_cf`` (the sum over cells
    of the local Schur complements), factorised once and reused by every
    call to :meth:`solve`. Cell unknowns are recovered cellwise.

    If some cell block is singular or badly conditioned the object falls
    back to an uncondensed sparse LU solve and emits a warning.
    """

    def __init__(self, A, n_cells: int, block: int, cond_limit: float = 1e12):
        A = sp.csr_matrix(A)
        self.n_cells = n_cells
        self.block = block
        self.nc = nc = n_cells * block
        self.n = A.shape[0]
        self.n_solves = 0
        self.fallback = False

        Acc = A[:nc, :nc]
        base = np.arange(n_cells)[:, None, None] * block
        r = np.broadcast_to(base + np.arange(block)[None, :, None], (n_cells, block, block)).ravel()
        c = np.broadcast_to(base + np.arange(block)[None, None, :], (n_cells, block, block)).ravel()
        coo = Acc.tocoo()
        if np.any(coo.row // block != coo.col // block):
            raise ValueError("cell block of the matrix is not block diagonal")
        blocks = np.asarray(Acc[r, c]).reshape(n_cells, block, block)
        conds = np.linalg.cond(blocks)
        if not np.all(np.isfinite(conds)) or np.any(conds > cond_limit):
            bad = int(np.argmax(np.where(np.isfinite(conds), conds, np.inf)))
            warnings.warn(
                f"cell block {bad} is singular or ill-conditioned (cond={conds[bad]:.2e}); "
                "falling back to an uncondensed solve",
                RuntimeWarning,
                stacklevel=2,
            )
            self.fallback = True
            self._full = _LU(A)
            return
        inv = np.linalg.inv(blocks)
        self.cell_inverse = sp.csr_matrix((inv.ravel(), (r, c)), shape=(nc, nc))
        self.A_cf = A[:nc, nc:]
        self.A_fc = A[nc:, :nc]
        A_ff = A[nc:, nc:]
        self.schur = (A_ff - self.A_fc @ self.cell_inverse @ self.A_cf).tocsc()
        self._face = _LU(self.schur)

    @property
    def n_faces_dofs(self) -> int:
        return self.n - self.nc

    def reduced_rhs(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        return rhs[self.nc :] - self.A_fc @ (self.cell_inverse @ rhs[: self.nc])

    def recover(self, x_face, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x_cell = self.cell_inverse @ (rhs[: self.nc] - self.A_cf @ x_face)
        return np.concatenate([x_cell, x_face])

    def solve(self, rhs) -> np.ndarray:
        self.n_solves += 1
        if self.fallback:
            return self._full.solve(rhs)
        return self.recover(self._face.solve(self.reduced_rhs(rhs)), rhs)


def linear_solver(A, method: str = "condensed", space: HHOSpace | None = None):
    """Factorise ``A`` with the requested method and return an object with ``solve``."""
    if method == "lu":
        return _LU(A)
    if method == "dense":
        return _Dense(A)
    if method == "cg":
        return _CG(A)
    if method == "condensed":
        if space is None:
            raise ValueError("static condensation needs the HHO space for the cell block layout")
        return StaticCondensation(A, space.mesh.n_cells, space.nc)
    raise ValueError(f"unknown linear solver {method!r}")


@dataclass
class NewtonReport:
    iterations: int = 0
    step_norms: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    converged: bool = False
    d: float = float("nan")
    wall_time: float = 0.0
    final_residual: float = float("nan")

    def contraction_ratios(self) -> list:
        s = self.step_norms
        return [s[i + 1] / s[i] for i in range(len(s) - 1) if s[i] > 0]

    def quadratic_constants(self) -> list:
        s = self.step_norms
        return [s[i + 1] / s[i] ** 2 for i in range(len(s) - 1) if s[i] > 0]


@dataclass
class NewtonResult:
    space: HHOSpace
    alpha: np.ndarray
    d: float
    report: NewtonReport

    @property
    def field(self) -> HybridField:
        return self.space.field(self.alpha)


def poisson_initial_guess(problem, space: HHOSpace, method: str = "condensed") -> np.ndarray:
    """HHO solution of ``-Laplace u = f(., 0)`` with homogeneous Dirichlet data."""
    zero = np.zeros(space.N)
    rhs = space.cell_load(_load_values(space, problem, zero))
    return linear_solver(space.A, method, space).solve(rhs)


def newton_solve(
    problem,
    space: HHOSpace,
    tol: float = 1e-12,
    max_iter: int = 20,
    method: str = "condensed",
    on_step=None,
) -> NewtonResult:
    """Newton iteration on the bordered system.

    Starts from the Poisson solution with the same load and
    ``d = |grad R_h u^0|^2``. Stops when the step size, measured as the
    energy norm of the coefficient update plus ``|delta d|``, drops to
    ``tol``. ``method`` picks the inner solver for the sparse block
    (``condensed``, ``lu``, ``cg`` or ``dense``).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    t0 = time.perf_counter()
    report = NewtonReport()
    alpha = poisson_initial_guess(problem, space, method)
    d = float(alpha @ (space.G @ alpha))
    for it in range(1, max_iter + 1):
        F = residual(alpha, d, problem, space)
        J = jacobian_blocks(alpha, d, problem, space)
        step = bordered_solve(linear_solver(J.A, method, space), J.b, J.c, J.delta, -F)
        da, dd = step[:-1], step[-1]
        alpha = alpha + da
        d = d + dd
        snorm = float(np.sqrt(max(da @ (space.A @ da), 0.0)) + abs(dd))
        report.iterations = it
        report.step_norms.append(snorm)
        report.residual_norms.append(float(np.abs(F).max()))
        log.debug("newton %d: step %.3e residual %.3e", it, snorm, report.residual_norms[-1])
        if on_step is not None:
            on_step(it, alpha, d, J, F, step)
        if snorm <= tol:
            report.converged = True
            break
    report.d = float(d)
    report.final_residual = float(np.abs(residual(alpha, d, problem, space)).max())
    report.wall_time = time.perf_counter() - t0
    if not report.converged:
        log.warning("Newton did not converge in %d iterations (last step %.3e)", max_iter, report.step_norms[-1])
    return NewtonResult(space=space, alpha=alpha, d=float(d), report=report)


@dataclass
class EigenResult:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    converged: bool


def smallest_eigenvalue(space: HHOSpace, tol: float = 1e-9, max_iter: int = 500) -> EigenResult:
    """Smallest ``lambda`` with ``a_h(w, v) = lambda (w_T, v_T)`` on free DOFs.

    Inverse power iteration on the cell unknowns. Face unknowns are
    eliminated implicitly: solving ``A X = [B w; 0]`` and keeping the cell
    part applies the inverse of the Schur complement of ``A`` onto the cell
    block, which is the operator of the condensed generalized problem.
    Iteration stops when the Rayleigh quotient changes by less than
    ``tol`` relatively.
    """
    nc_total = space.dofs.n_cells_total
    B = space.block_diag_cells(space.cell_mass_blocks)[:nc_total, :nc_total].tocsr()
    lu = _LU(space.A)
    w = np.zeros(nc_total)
    w[:: space.nc] = 1.0
    w /= np.sqrt(w @ (B @ w))
    lam = np.inf
    converged = False
    it = 0
    X = np.zeros(space.N)
    for it in range(1, max_iter + 1):
        rhs = np.zeros(space.N)
        rhs[:nc_total] = B @ w
        X = lu.solve(rhs)
        xc = X[:nc_total]
        xBx = xc @ (B @ xc)
        lam_new = (xc @ rhs[:nc_total]) / xBx
        X /= np.sqrt(xBx)
        w = X[:nc_total]
        if abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            converged = True
            break
        lam = lam_new
    r = space.A @ X
    r[:nc_total] -= lam * (B @ X[:nc_total])
    res = float(np.linalg.norm(r) / (lam * np.linalg.norm(B @ X[:nc_total])))
    if not converged:
        log.warning("inverse iteration stagnated after %d steps (relative residual %.3e)", it, res)
    return EigenResult(value=float(lam), vector=X, iterations=it, residual=res, converged=converged)


def load_norm(problem, space: HHOSpace) -> float:
    """L2 norm of ``f(., 0)`` using the cell quadrature of ``space``."""
    vals = _load_values(space, problem, np.zeros(space.N))
    return float(np.sqrt(space.quad_weights @ vals**2))


def a_priori_bound(problem, space: HHOSpace, lam: float) -> float:
    """Radius ``|f(.,0)| / (lam^{1/2} (m0 - a / lam))`` bounding every discrete solution."""
    margin = problem.m0 - problem.a / lam
    if margin <= 0:
        return float("inf")
    return load_norm(problem, space) / (np.sqrt(lam) * margin)
