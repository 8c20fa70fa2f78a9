"""Interior-penalty discontinuous Galerkin for steady diffusion-convection-reaction on triangles."""

__version__ = "0.1.0"

from .assembly import DgParameters, DgSystem, Method, assemble_all, set_parameters
from .mesh import Mesh, get_mesh, paper_unit_square_mesh, refined_paper_mesh, uniform_refine
from .nonlinear import NewtonConfig, NewtonReport, assemble_nonlinear, newton_solve
from .postprocess import dof_count, export_vtk, l2_error
from .problems import ProblemSpec, registry_get
from .reference import build_reference
from .solver import SolveReport, solve

__all__ = [
    "DgParameters",
    "DgSystem",
    "Method",
    "Mesh",
    "NewtonConfig",
    "NewtonReport",
    "ProblemSpec",
    "SolveReport",
    "assemble_all",
    "assemble_nonlinear",
    "build_reference",
    "dof_count",
    "export_vtk",
    "get_mesh",
    "l2_error",
    "newton_solve",
    "paper_unit_square_mesh",
    "refined_paper_mesh",
    "registry_get",
    "set_parameters",
    "solve",
    "uniform_refine",
]
