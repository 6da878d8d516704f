"""Hybrid unknowns and their local/global numbering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import cell_dim

__all__ = ["LocalDofLayout", "GlobalDofMap", "HybridField"]


@dataclass(frozen=True)
class LocalDofLayout:
    """Cell block first, then one block of ``k + 1`` per face of the cell."""

    cell: int
    n_cell: int
    face_offsets: tuple[int, ...]
    n_face: int

    @classmethod
    def for_cell(cls, cell, k: int) -> "LocalDofLayout":
        nc, nf = cell_dim(k), k + 1
        return cls(cell.id, nc, tuple(nc + i * nf for i in range(cell.n_faces)), nf)

    @property
    def n_total(self) -> int:
        return self.n_cell + len(self.face_offsets) * self.n_face

    def face_slice(self, i: int) -> slice:
        return slice(self.face_offsets[i], self.face_offsets[i] + self.n_face)


class GlobalDofMap:
    """Numbering of unknowns.

    Two numberings are kept. The *full* numbering covers every cell and
    every face (cells first, then faces by id). The *free* numbering drops
    boundary faces: all cell DOFs, then interior-face DOFs in increasing face
    id order.
    """

    def __init__(self, mesh, k: int):
        self.mesh = mesh
        self.k = k
        self.n_cell_dofs = cell_dim(k)
        self.n_face_dofs = k + 1
        nc, nf = self.n_cell_dofs, self.n_face_dofs
        self.n_cells_total = mesh.n_cells * nc
        self.n_full = self.n_cells_total + mesh.n_faces * nf

        face_slot = np.full(mesh.n_faces, -1, dtype=int)
        face_slot[mesh.interior_faces] = np.arange(mesh.interior_faces.size)
        self.face_slot = face_slot
        self.n_free = self.n_cells_total + mesh.interior_faces.size * nf

        # full index -> free index (or -1 for boundary-face DOFs)
        full_to_free = np.full(self.n_full, -1, dtype=int)
        full_to_free[: self.n_cells_total] = np.arange(self.n_cells_total)
        for f in mesh.interior_faces:
            start = self.n_cells_total + f * nf
            full_to_free[start : start + nf] = self.n_cells_total + face_slot[f] * nf + np.arange(nf)
        self.full_to_free = full_to_free
        self.free_to_full = np.flatnonzero(full_to_free >= 0)

    @property
    def N(self) -> int:
        return self.n_free

    def cell_dofs(self, c: int) -> np.ndarray:
        return c * self.n_cell_dofs + np.arange(self.n_cell_dofs)

    def face_dofs(self, f: int) -> np.ndarray:
        return self.n_cells_total + f * self.n_face_dofs + np.arange(self.n_face_dofs)

    def local_to_full(self, cell) -> np.ndarray:
        parts = [self.cell_dofs(cell.id)] + [self.face_dofs(f) for f in cell.faces]
        return np.concatenate(parts)

    def local_to_free(self, cell) -> np.ndarray:
        return self.full_to_free[self.local_to_full(cell)]


class HybridField:
    """Cell and face polynomial coefficients of a discrete hybrid function."""

    def __init__(self, mesh, k: int, cell: np.ndarray, face: np.ndarray, homogeneous: bool = False):
        nc, nf = cell_dim(k), k + 1
        cell = np.asarray(cell, dtype=float)
        face = np.asarray(face, dtype=float)
        if cell.shape != (mesh.n_cells, nc) or face.shape != (mesh.n_faces, nf):
            raise ValueError("block sizes do not match the mesh and degree")
        self.mesh = mesh
        self.k = k
        self.cell = cell
        self.face = face
        self.homogeneous = homogeneous
        if homogeneous and mesh.boundary_faces.size and np.any(face[mesh.boundary_faces] != 0.0):
            raise ValueError("homogeneous field has nonzero boundary-face coefficients")

    @classmethod
    def zeros(cls, mesh, k: int, homogeneous: bool = True) -> "HybridField":
        return cls(mesh, k, np.zeros((mesh.n_cells, cell_dim(k))), np.zeros((mesh.n_faces, k + 1)), homogeneous)

    @classmethod
    def from_full(cls, mesh, k, vec, homogeneous=False) -> "HybridField":
        ncd = mesh.n_cells * cell_dim(k)
        vec = np.asarray(vec, dtype=float)
        return cls(mesh, k, vec[:ncd].reshape(mesh.n_cells, -1), vec[ncd:].reshape(mesh.n_faces, -1), homogeneous)

    @classmethod
    def from_free(cls, dofmap: GlobalDofMap, vec) -> "HybridField":
        full = np.zeros(dofmap.n_full)
        full[dofmap.free_to_full] = vec
        return cls.from_full(dofmap.mesh, dofmap.k, full, homogeneous=True)

    def full(self) -> np.ndarray:
        return np.concatenate([self.cell.ravel(), self.face.ravel()])

    def free(self, dofmap: GlobalDofMap) -> np.ndarray:
        if not self.homogeneous:
            bf = self.mesh.boundary_faces
            if bf.size and np.any(self.face[bf] != 0.0):
                raise ValueError("field has nonzero boundary-face coefficients")
        return self.full()[dofmap.free_to_full]

    def local(self, cell) -> np.ndarray:
        return np.concatenate([self.cell[cell.id], *(self.face[f] for f in cell.faces)])

    def _combine(self, other, op):
        if other.mesh is not self.mesh or other.k != self.k:
            raise ValueError("fields live on different spaces")
        return HybridField(self.mesh, self.k, op(self.cell, other.cell), op(self.face, other.face),
                           self.homogeneous and other.homogeneous)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        return HybridField(self.mesh, self.k, scalar * self.cell, scalar * self.face, self.homogeneous)

    __rmul__ = __mul__
