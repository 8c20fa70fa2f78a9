"""One-call pipeline: assemble, solve (linear or Newton), measure the error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import DgParameters, DgSystem, assemble_all
from .mesh import Mesh
from .nonlinear import NewtonConfig, NewtonReport, newton_solve
from .postprocess import dof_count, l2_error
from .problems import ProblemSpec
from .reference import ReferenceElement, build_reference
from .sparse import direct_solve


@dataclass
class SolveReport:
    coef: np.ndarray
    iterations: int
    l2err: float | None
    hmax: float
    dofs: int
    newton: NewtonReport | None
    system: DgSystem
    ref: ReferenceElement


def solve(
    problem: ProblemSpec,
    params: DgParameters,
    mesh: Mesh,
    quad_order: int | None = None,
    newton: NewtonConfig = NewtonConfig(),
    workers: int = 1,
) -> SolveReport:
    """Linear problems take one direct solve; nonlinear ones go through Newton."""
    ref = build_reference(params.degree, quad_order)
    system = assemble_all(mesh, ref, problem, params, workers)
    if problem.nonlinear is None:
        coef = direct_solve(system.stiffness, system.F)
        iterations, report = 1, None
    else:
        coef, report = newton_solve(system, mesh, ref, problem.nonlinear, newton)
        iterations = report.iterations
    l2err = None
    if problem.exact is not None:
        err_order = None if quad_order is None else quad_order + 1
        l2err, _ = l2_error(coef, mesh, ref, problem.exact_at, err_order)
    return SolveReport(coef, iterations, l2err, mesh.h_max, dof_count(mesh, params.degree), report, system, ref)
