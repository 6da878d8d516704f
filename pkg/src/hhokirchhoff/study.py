"""Manufactured-solution convergence studies."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .hho import HHOSpace
from .mesh import FAMILIES, KERSHAW_DEFAULT_DISTORTION, generate
from .solver import newton_solve

__all__ = [
    "ConvergenceRow",
    "ConvergenceReport",
    "relative_error",
    "rate",
    "level_sizes",
    "run_convergence",
    "CSV_HEADER",
]

log = logging.getLogger(__name__)

CSV_HEADER = ["level", "h", "ndof", "error", "rate", "newton_iters", "seconds"]

# subdivisions of the coarsest level; each further level doubles n
BASE_SIZE = {"triangular": 8, "cartesian": 8, "hexagonal": 8, "kershaw": 8}


def level_sizes(family: str, levels: int, base: int | None = None) -> list[int]:
    if family not in FAMILIES:
        raise ValueError(f"unknown mesh family {family!r}")
    n0 = base if base is not None else BASE_SIZE[family]
    return [n0 * 2**i for i in range(levels)]


def relative_error(u_exact, u_h, space: HHOSpace) -> float:
    """``|I_h u - u_h|_{a,h} / |I_h u|_{a,h}`` with ``u_h`` a HybridField."""
    Ih = space.interpolate(u_exact, homogeneous=True)
    denom = space.energy_norm(Ih)
    if denom == 0.0:
        raise ZeroDivisionError("exact solution has zero discrete energy")
    return space.energy_norm(Ih - u_h) / denom


def rate(e_prev: float, e_cur: float, h_prev: float, h_cur: float) -> float:
    """Empirical order ``log(e_cur / e_prev) / log(h_cur / h_prev)``."""
    if min(e_prev, e_cur, h_prev, h_cur) <= 0:
        raise ValueError("errors and mesh sizes must be positive")
    if h_cur >= h_prev:
        raise ValueError("mesh size must decrease between levels")
    return math.log(e_cur / e_prev) / math.log(h_cur / h_prev)


@dataclass
class ConvergenceRow:
    level: int
    h: float
    ndof: int
    error: float
    rate: float | None
    newton_iters: int
    seconds: float
    n: int = 0
    step_norms: list = field(default_factory=list)
    converged: bool = True


@dataclass
class ConvergenceReport:
    problem: str
    family: str
    k: int
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    complete: bool = True

    @property
    def rates(self) -> list[float]:
        return [r.rate for r in self.rows if r.rate is not None]

    @property
    def errors(self) -> list[float]:
        return [r.error for r in self.rows]

    @property
    def final_rate(self) -> float:
        return self.rates[-1]

    @property
    def converged(self) -> bool:
        return self.complete and all(r.converged for r in self.rows)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([
                r.level,
                repr(r.h),
                r.ndof,
                repr(r.error),
                "" if r.rate is None else repr(r.rate),
                r.newton_iters,
                repr(r.seconds) if timing else "0.0",
            ])
        return buf.getvalue()

    def metadata_block(self) -> dict:
        return {
            "problem": self.problem,
            "family": self.family,
            "k": self.k,
            "complete": self.complete,
            "n": [r.n for r in self.rows],
            "converged": [r.converged for r in self.rows],
            "step_norms": [r.step_norms for r in self.rows],
            **self.metadata,
        }

    def gnuplot(self) -> str:
        lines = [f"# h e_h  ({self.problem}, {self.family}, k={self.k})"]
        lines += [f"{r.h:.17g} {r.error:.17g}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, path, timing: bool = True) -> list[Path]:
        """Write ``path`` (CSV), ``path.meta.json`` and ``path.dat`` (h, e_h)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(timing))
        meta = path.with_name(path.name + ".meta.json")
        meta.write_text(json.dumps(self.metadata_block(), indent=2, sort_keys=True) + "\n")
        dat = path.with_suffix(".dat")
        dat.write_text(self.gnuplot())
        return [path, meta, dat]

    @classmethod
    def read(cls, path) -> "ConvergenceReport":
        path = Path(path)
        meta = json.loads(path.with_name(path.name + ".meta.json").read_text())
        rows = []
        with path.open() as fh:
            for i, rec in enumerate(csv.DictReader(fh)):
                rows.append(ConvergenceRow(
                    level=int(rec["level"]),
                    h=float(rec["h"]),
                    ndof=int(rec["ndof"]),
                    error=float(rec["error"]),
                    rate=float(rec["rate"]) if rec["rate"] else None,
                    newton_iters=int(rec["newton_iters"]),
                    seconds=float(rec["seconds"]),
                    n=meta["n"][i],
                    step_norms=meta["step_norms"][i],
                    converged=meta["converged"][i],
                ))
        reserved = {"problem", "family", "k", "complete", "n", "converged", "step_norms"}
        extra = {key: v for key, v in meta.items() if key not in reserved}
        return cls(meta["problem"], meta["family"], meta["k"], rows, extra, meta["complete"])

    def table(self) -> str:
        out = [f"{self.problem} | {self.family} | k={self.k}",
               f"{'lvl':>3} {'n':>4} {'h':>10} {'ndof':>8} {'e_h':>12} {'rate':>7} {'it':>3}"]
        for r in self.rows:
            rt = "--" if r.rate is None else f"{r.rate:.3f}"
            out.append(f"{r.level:>3} {r.n:>4} {r.h:>10.4e} {r.ndof:>8} {r.error:>12.4e} {rt:>7} {r.newton_iters:>3}")
        return "\n".join(out)

    def to_dict(self) -> dict:
        return asdict(self)


def run_convergence(
    problem,
    family: str,
    levels: int = 3,
    k: int = 1,
    tol: float = 1e-12,
    max_iter: int = 20,
    distortion: float = KERSHAW_DEFAULT_DISTORTION,
    base: int | None = None,
    method: str = "condensed",
    on_level=None,
) -> ConvergenceReport:
    """Solve ``problem`` on successive refinements and tabulate errors and rates.

    ``on_level(row, space, result)`` is called after every level. A Newton
    failure on some level stops the study; the report is returned with
    ``complete = False``.
    """
    if levels < 2:
        raise ValueError("a convergence study needs at least two levels")
    if not problem.has_exact:
        raise ValueError(f"problem {problem.name!r} has no exact solution")
    report = ConvergenceReport(
        problem=problem.name,
        family=family,
        k=k,
        metadata={
            "tol": tol,
            "max_iter": max_iter,
            "cell_quadrature_degree": 2 * (k + 2),
            "face_quadrature_degree": 2 * k + 2,
            "h_convention": "max cell diameter",
            "M": problem.metadata.get("M", ""),
            "f": problem.metadata.get("f", ""),
            "distortion": distortion if family == "kershaw" else None,
            "linear_solver": method,
        },
    )
    for level, n in enumerate(level_sizes(family, levels, base), start=1):
        t0 = time.perf_counter()
        mesh = generate(family, n, distortion)
        space = HHOSpace(mesh, k)
        result = newton_solve(problem, space, tol=tol, max_iter=max_iter, method=method)
        err = relative_error(problem.exact_u, result.field, space)
        seconds = time.perf_counter() - t0
        prev = report.rows[-1] if report.rows else None
        row = ConvergenceRow(
            level=level,
            h=mesh.h,
            ndof=space.N,
            error=err,
            rate=rate(prev.error, err, prev.h, mesh.h) if prev else None,
            newton_iters=result.report.iterations,
            seconds=seconds,
            n=n,
            step_norms=result.report.step_norms,
            converged=result.report.converged,
        )
        report.rows.append(row)
        if on_level is not None:
            on_level(row, space, result)
        log.info("%s %s k=%d level %d: h=%.4e e=%.4e", problem.name, family, k, level, mesh.h, err)
        if not result.report.converged:
            report.complete = False
            log.error("Newton failed on level %d; aborting study", level)
            break
    return report
