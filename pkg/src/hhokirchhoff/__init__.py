"""Hybrid high-order discretisation of nonlocal Kirchhoff-type elliptic problems."""

from .basis import CellBasis, FaceBasis, interpolate, mass_matrix, project_cell, project_face
from .field import GlobalDofMap, HybridField, LocalDofLayout
from .hho import HHOSpace, LocalOps, local_operators, reconstruct_operator, stabilization_operator
from .mesh import (
    PolyMesh,
    build_topology,
    generate,
    generate_cartesian,
    generate_hexagonal,
    generate_kershaw,
    generate_triangular,
    read_mesh,
    write_mesh,
)
from .problems import ProblemSpec, builtin_problems
from .quadrature import QuadratureRule, quadrature_cell, quadrature_face
from .solver import (
    StaticCondensation,
    bordered_solve,
    jacobian_blocks,
    newton_solve,
    residual,
    smallest_eigenvalue,
)
from .study import ConvergenceReport, rate, relative_error, run_convergence

__version__ = "0.1.0"
