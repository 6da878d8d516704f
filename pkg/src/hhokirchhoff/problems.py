"""Problem data for the nonlocal Kirchhoff equation and the built-in registry.

A problem is ``-M(|grad u|^2) Laplace(u) = f(x, u)`` on the unit square
with homogeneous Dirichlet data. ``f`` and its partial derivative in ``u``
take an ``(npts, 2)`` array of points and an array of ``u`` values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["ProblemSpec", "ProblemRegistry", "builtin_problems", "bubble", "bubble_grad", "bubble_laplacian"]


def bubble(p):
    x, y = p[:, 0], p[:, 1]
    return x * (1 - x) * y * (1 - y)


def bubble_grad(p):
    x, y = p[:, 0], p[:, 1]
    return np.column_stack([(1 - 2 * x) * y * (1 - y), x * (1 - x) * (1 - 2 * y)])


def bubble_laplacian(p):
    x, y = p[:, 0], p[:, 1]
    return -2.0 * (x * (1 - x) + y * (1 - y))


# |grad bubble|^2 integrated over the unit square
BUBBLE_DIRICHLET_ENERGY = 1.0 / 45.0


@dataclass
class ProblemSpec:
    """Data of one Kirchhoff-type problem.

    ``m0`` is a lower bound of ``M`` on the nonnegative axis and ``a`` a
    Lipschitz constant of ``f`` in ``u``; both only enter diagnostics such
    as the a priori bound.
    """

    name: str
    M: Callable[[float], float]
    dM: Callable[[float], float]
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    df: Callable[[np.ndarray, np.ndarray], np.ndarray]
    m0: float
    a: float
    exact_u: Callable | None = None
    exact_grad: Callable | None = None
    L_M: float | None = None
    description: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m0 <= 0:
            raise ValueError("m0 must be positive")
        if self.a < 0:
            raise ValueError("Lipschitz constant a must be nonnegative")

    def check(self, n_samples: int = 64, s_max: float = 10.0, seed: int = 0) -> None:
        """Sample ``M >= m0`` on ``[0, s_max]`` and finiteness of ``f``, ``f_u``."""
        s = np.linspace(0.0, s_max, n_samples)
        Ms = np.array([self.M(v) for v in s])
        if np.any(Ms < self.m0 - 1e-14):
            raise ValueError(f"problem {self.name!r}: M(s) < m0 at s = {s[np.argmin(Ms)]:.3g}")
        rng = np.random.default_rng(seed)
        pts = rng.random((n_samples, 2))
        u = rng.normal(size=n_samples)
        for fn, label in ((self.f, "f"), (self.df, "f_u")):
            vals = np.asarray(fn(pts, u), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"problem {self.name!r}: {label} is not finite on sampled points")

    @property
    def has_exact(self) -> bool:
        return self.exact_u is not None


class ProblemRegistry(dict):
    """Name -> :class:`ProblemSpec` mapping that refuses silent overwrites."""

    def register(self, problem: ProblemSpec) -> ProblemSpec:
        if problem.name in self:
            raise KeyError(f"problem {problem.name!r} is already registered")
        self[problem.name] = problem
        return problem

    def get_problem(self, name: str) -> ProblemSpec:
        try:
            return self[name]
        except KeyError:
            raise KeyError(f"unknown problem {name!r}; available: {sorted(self)}") from None


def _zero(p, u):
    return np.zeros(np.shape(u))


def paper_example() -> ProblemSpec:
    # coefficient 1 + d; exact d = 1/45, so the load is (46/45) * (-Laplace u)
    scale = 1.0 + BUBBLE_DIRICHLET_ENERGY
    return ProblemSpec(
        name="paper-example",
        M=lambda s: 1.0 + s,
        dM=lambda s: 1.0,
        f=lambda p, u: -scale * bubble_laplacian(p),
        df=_zero,
        m0=1.0,
        a=0.0,
        L_M=1.0,
        exact_u=bubble,
        exact_grad=bubble_grad,
        description="u = x(1-x)y(1-y), M(d) = 1 + d, manufactured load",
        metadata={"M": "1 + d", "f": "(46/45) * 2 * (x(1-x) + y(1-y))"},
    )


def poisson() -> ProblemSpec:
    return ProblemSpec(
        name="poisson",
        M=lambda s: 1.0,
        dM=lambda s: 0.0,
        f=lambda p, u: -bubble_laplacian(p),
        df=_zero,
        m0=1.0,
        a=0.0,
        L_M=0.0,
        exact_u=bubble,
        exact_grad=bubble_grad,
        description="linear Poisson problem with u = x(1-x)y(1-y)",
        metadata={"M": "1", "f": "2 * (x(1-x) + y(1-y))"},
    )


def semilinear() -> ProblemSpec:
    def f(p, u):
        return np.sin(u) - bubble_laplacian(p) - np.sin(bubble(p))

    return ProblemSpec(
        name="semilinear",
        M=lambda s: 1.0,
        dM=lambda s: 0.0,
        f=f,
        df=lambda p, u: np.cos(u),
        m0=1.0,
        a=1.0,
        L_M=0.0,
        exact_u=bubble,
        exact_grad=bubble_grad,
        description="M = 1, f(x, u) = sin(u) + g(x), u = x(1-x)y(1-y)",
        metadata={"M": "1", "f": "sin(u) + g(x)"},
    )


def nonlinear_kirchhoff() -> ProblemSpec:
    scale = 1.0 + BUBBLE_DIRICHLET_ENERGY

    def f(p, u):
        return np.sin(u) - scale * bubble_laplacian(p) - np.sin(bubble(p))

    return ProblemSpec(
        name="nonlinear-kirchhoff",
        M=lambda s: 1.0 + s,
        dM=lambda s: 1.0,
        f=f,
        df=lambda p, u: np.cos(u),
        m0=1.0,
        a=1.0,
        L_M=1.0,
        exact_u=bubble,
        exact_grad=bubble_grad,
        description="M(d) = 1 + d and f(x, u) = sin(u) + g(x), u = x(1-x)y(1-y)",
        metadata={"M": "1 + d", "f": "sin(u) + g(x)"},
    )


def builtin_problems() -> ProblemRegistry:
    reg = ProblemRegistry()
    for make in (paper_example, poisson, semilinear, nonlinear_kirchhoff):
        reg.register(make())
    return reg
