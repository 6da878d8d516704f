"""Command-line interface.

Examples
--------
    hho-kirchhoff study --family triangular --k 2 --levels 4 --out results/tri_k2.csv
    hho-kirchhoff solve --family hexagonal --n 16 --k 1
    hho-kirchhoff eig --family cartesian --n 32
    hho-kirchhoff mesh-info --family kershaw --n 8 --distortion 0.4
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .hho import HHOSpace
from .mesh import FAMILIES, KERSHAW_DEFAULT_DISTORTION, MeshError, generate, read_mesh, write_mesh
from .problems import builtin_problems
from .solver import a_priori_bound, newton_solve, smallest_eigenvalue
from .study import relative_error, run_convergence

__all__ = ["RunConfig", "parse_args", "main", "build_parser"]

COMMANDS = ("solve", "study", "eig", "mesh-info")
MAX_DEGREE = 3


@dataclass
class RunConfig:
    command: str = "study"
    problem: str = "paper-example"
    family: str = "cartesian"
    n: int = 8
    levels: int = 3
    k: int = 1
    tol: float = 1e-12
    max_iter: int = 20
    distortion: float = KERSHAW_DEFAULT_DISTORTION
    out: str | None = None
    mesh_file: str | None = None
    timing: bool = False
    verbose: bool = False


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hho-kirchhoff",
        description="Hybrid high-order solver for nonlocal Kirchhoff-type problems on polygonal meshes.",
    )
    d = RunConfig()
    p.add_argument("command", nargs="?", default=d.command, choices=COMMANDS)
    p.add_argument("--problem", default=d.problem, help="built-in problem name (default: %(default)s)")
    p.add_argument("--family", default=d.family, choices=FAMILIES)
    p.add_argument("--n", type=int, default=d.n, help="subdivisions per side for single-mesh commands")
    p.add_argument("--levels", type=int, default=d.levels, help="refinement levels for 'study'")
    p.add_argument("--k", type=int, default=d.k, help="polynomial degree (0..3)")
    p.add_argument("--tol", type=float, default=d.tol, help="Newton step tolerance")
    p.add_argument("--max-iter", type=int, default=d.max_iter)
    p.add_argument("--distortion", type=float, default=d.distortion, help="Kershaw distortion in [0, 1)")
    p.add_argument("--out", default=None, help="output path (CSV for 'study', JSON for 'solve'/'eig', mesh for 'mesh-info')")
    p.add_argument("--mesh-file", default=None, help="native mesh file to use instead of a generator")
    p.add_argument("--timing", action="store_true", help="write wall-clock seconds into the CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_args(argv=None) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if not 0 <= ns.k <= MAX_DEGREE:
        parser.error(f"--k must be in 0..{MAX_DEGREE}, got {ns.k}")
    if not (ns.tol > 0 and math.isfinite(ns.tol)):
        parser.error("--tol must be positive")
    if ns.max_iter < 1:
        parser.error("--max-iter must be >= 1")
    if ns.n < 1:
        parser.error("--n must be >= 1")
    if ns.levels < 2:
        parser.error("--levels must be >= 2")
    if not 0.0 <= ns.distortion < 1.0:
        parser.error("--distortion must lie in [0, 1)")
    if ns.problem not in builtin_problems():
        parser.error(f"unknown problem {ns.problem!r}; choose from {sorted(builtin_problems())}")
    return RunConfig(**{k.replace("-", "_"): v for k, v in vars(ns).items()})


def _mesh(cfg: RunConfig):
    if cfg.mesh_file:
        return read_mesh(cfg.mesh_file)
    return generate(cfg.family, cfg.n, cfg.distortion)


def _emit_json(cfg, payload):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if cfg.out:
        Path(cfg.out).write_text(text + "\n")
    print(text)


def cmd_solve(cfg: RunConfig) -> int:
    problem = builtin_problems()[cfg.problem]
    mesh = _mesh(cfg)
    space = HHOSpace(mesh, cfg.k)
    res = newton_solve(problem, space, tol=cfg.tol, max_iter=cfg.max_iter)
    rep = res.report
    payload = {
        "problem": problem.name,
        "cells": mesh.n_cells,
        "h": mesh.h,
        "k": cfg.k,
        "ndof": space.N,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "step_norms": rep.step_norms,
        "d": res.d,
        "energy_norm": space.energy_norm(res.field),
        "final_residual": rep.final_residual,
    }
    if problem.has_exact:
        payload["relative_error"] = relative_error(problem.exact_u, res.field, space)
    _emit_json(cfg, payload)
    return 0 if rep.converged else 1


def cmd_study(cfg: RunConfig) -> int:
    problem = builtin_problems()[cfg.problem]
    report = run_convergence(
        problem, cfg.family, levels=cfg.levels, k=cfg.k, tol=cfg.tol,
        max_iter=cfg.max_iter, distortion=cfg.distortion,
    )
    if cfg.out:
        report.write(cfg.out, timing=cfg.timing)
        print(report.table())
    else:
        sys.stdout.write(report.to_csv(timing=cfg.timing))
    return 0 if report.converged else 1


def cmd_eig(cfg: RunConfig) -> int:
    problem = builtin_problems()[cfg.problem]
    mesh = _mesh(cfg)
    space = HHOSpace(mesh, cfg.k)
    eig = smallest_eigenvalue(space)
    exact = 2 * math.pi**2
    payload = {
        "lambda_1h": eig.value,
        "reference_2pi2": exact,
        "relative_difference": (eig.value - exact) / exact,
        "iterations": eig.iterations,
        "residual": eig.residual,
        "converged": eig.converged,
        "R_1h": a_priori_bound(problem, space, eig.value),
    }
    _emit_json(cfg, payload)
    return 0 if eig.converged else 1


def cmd_mesh_info(cfg: RunConfig) -> int:
    mesh = _mesh(cfg)
    if cfg.out:
        write_mesh(mesh, cfg.out)
    print(json.dumps(mesh.summary(), indent=2))
    return 0


def main(argv=None) -> int:
    cfg = parse_args(argv)
    logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = {"solve": cmd_solve, "study": cmd_study, "eig": cmd_eig, "mesh-info": cmd_mesh_info}[cfg.command]
    try:
        return handler(cfg)
    except (MeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

