"""Global DG matrices D (diffusion), C (convection), R (reaction) and load F.

Degrees of freedom are element-major: global index ``K * n_local + a``.
Matrix entry ``[i, j]`` holds the bilinear form with trial function ``phi_j``
and test function ``phi_i``.

On an interior edge the two sides are the left (lower-indexed) and right
element, and the edge normal points from left to right, so

    [v] = (v_L - v_R) n,    {eps grad v} = (eps grad v_L + eps grad v_R) / 2.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import InflowOnNeumann, UnknownMethod
from .mesh import Mesh
from .problems import ProblemSpec
from .reference import ReferenceElement
from .sparse import Triplets, add, to_csr


class Method(str, enum.Enum):
    SIPG = "sipg"
    NIPG = "nipg"
    IIPG = "iipg"


# integer codes used by the original MATLAB driver
METHOD_CODES = {1: Method.NIPG, 2: Method.SIPG, 3: Method.IIPG}
KAPPA = {Method.SIPG: -1.0, Method.NIPG: 1.0, Method.IIPG: 0.0}


@dataclass(frozen=True)
class DgParameters:
    method: Method
    kappa: float
    sigma_interior: float
    sigma_boundary: float
    degree: int


def set_parameters(method, degree: int, penalty: float | None = None, kappa: float | None = None) -> DgParameters:
    """Default penalty and symmetrization parameter for an IP variant.

    ``method`` may be a :class:`Method`, its name (``"sipg"``) or the integer
    code 1/2/3 (NIPG/SIPG/IIPG).  ``penalty`` overrides the interior penalty;
    the boundary penalty is always twice the interior one.
    """
    try:
        if isinstance(method, (int, np.integer)) and not isinstance(method, bool):
            m = METHOD_CODES[int(method)]
        else:
            m = Method(str(getattr(method, "value", method)).lower())
    except (KeyError, ValueError):
        raise UnknownMethod(f"unknown method {method!r}; expected sipg, nipg or iipg") from None
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    sigma = 1.0 if m is Method.NIPG else 3.0 * degree * (degree + 1)
    if penalty is not None:
        sigma = float(penalty)
    k = KAPPA[m] if kappa is None else float(kappa)
    return DgParameters(m, k, sigma, 2.0 * sigma, degree)


@dataclass(frozen=True, eq=False)
class DgSystem:
    D: sp.csr_matrix
    C: sp.csr_matrix
    R: sp.csr_matrix
    F: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.F.shape[0]

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        return add(add(self.D, self.C), self.R)


def dof_map(n_elements: int, n_local: int) -> np.ndarray:
    return np.arange(n_elements * n_local).reshape(n_elements, n_local)


# -- batched geometry ------------------------------------------------------------


def _map_chunks(fn, indices, workers):
    """Apply ``fn`` to contiguous chunks of ``indices``; returns ``(chunk, result)`` in chunk order."""
    if workers <= 1 or len(indices) < 2 * workers:
        return [(indices, fn(indices))]
    chunks = np.array_split(indices, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(zip(chunks, pool.map(fn, chunks)))


def volume_points(mesh: Mesh, ref: ReferenceElement, elements) -> np.ndarray:
    """Physical quadrature points, shape (n_el, nq, 2)."""
    x0 = mesh.nodes[mesh.elements[elements, 0]]
    return x0[:, None, :] + np.einsum("eij,qj->eqi", mesh.jacobians[elements], ref.volume_rule.points)


def physical_gradients(mesh: Mesh, elements, ref_grads) -> np.ndarray:
    """Map reference gradients (nq, nl, 2) or (n_el, nq, nl, 2) to physical ones."""
    invT = mesh.inverse_transposes[elements]
    if ref_grads.ndim == 3:
        return np.einsum("eij,qnj->eqni", invT, ref_grads)
    return np.einsum("eij,eqnj->eqni", invT, ref_grads)


def edge_points(mesh: Mesh, ref: ReferenceElement, edges) -> tuple[np.ndarray, np.ndarray]:
    """Physical edge quadrature points (n_e, nq, 2) and weights ``h_e w_q``."""
    p = mesh.nodes[mesh.edge_endpoints[edges]]
    t = ref.edge_rule.points
    pts = p[:, None, 0, :] + t[None, :, None] * (p[:, None, 1, :] - p[:, None, 0, :])
    w = mesh.edge_lengths[edges][:, None] * ref.edge_rule.weights[None, :]
    return pts, w


def edge_traces(mesh: Mesh, ref: ReferenceElement, edges, side: int):
    """Basis traces from one side of ``edges``.

    Returns ``(element, values (n_e, nq, nl), normal_derivs (n_e, nq, nl))``
    where normal derivatives use the edge normal (left -> right / outward).
    """
    element = mesh.edge_elements[edges, side]
    local = mesh.edge_local_indices[edges, side]
    flip = mesh.edge_flips[edges].astype(int) if side == 1 else np.zeros(len(edges), dtype=int)
    vals = ref.basis_at_edges[local, flip]
    grads = physical_gradients(mesh, element, ref.grad_at_edges[local, flip])
    dn = np.einsum("eqni,ei->eqn", grads, mesh.edge_normals[edges])
    return element, vals, dn


def _mass(w, a, b):
    return np.einsum("eq,eqa,eqb->eab", w, a, b)


# -- volume kernels --------------------------------------------------------------


def _volume_kernel(mesh, ref, problem, kind):
    phi = ref.basis_at_volume
    wq = ref.volume_rule.weights

    def kernel(elements):
        pts = volume_points(mesh, ref, elements)
        x, y = pts[..., 0], pts[..., 1]
        wdet = mesh.det_jacobians[elements][:, None] * wq[None, :]
        if kind == "diffusion":
            G = physical_gradients(mesh, elements, ref.grad_at_volume)
            return np.einsum("eq,eqai,eqbi->eab", wdet * problem.diffusion_at(x, y), G, G)
        if kind == "convection":
            G = physical_gradients(mesh, elements, ref.grad_at_volume)
            bgrad = np.einsum("eqbi,eqi->eqb", G, problem.advection_at(x, y))
            return np.einsum("eq,qa,eqb->eab", wdet, phi, bgrad)
        if kind == "reaction":
            return np.einsum("eq,qa,qb->eab", wdet * problem.reaction_at(x, y), phi, phi)
        if kind == "source":
            return np.einsum("eq,qa->ea", wdet * problem.source(x, y), phi)
        raise ValueError(kind)

    return kernel


def _assemble_volume_blocks(mesh, ref, problem, kind, triplets, workers):
    dofs = dof_map(mesh.n_elements, ref.n_local)
    elements = np.arange(mesh.n_elements)
    for chunk, blocks in _map_chunks(_volume_kernel(mesh, ref, problem, kind), elements, workers):
        triplets.add_blocks(dofs[chunk], dofs[chunk], blocks)


def _volume_load(mesh, ref, problem, workers=1) -> np.ndarray:
    elements = np.arange(mesh.n_elements)
    parts = _map_chunks(_volume_kernel(mesh, ref, problem, "source"), elements, workers)
    return np.concatenate([r for _, r in parts]).ravel()


# -- diffusion -------------------------------------------------------------------


def _diffusion_interior(mesh, ref, problem, params, edges):
    pts, w = edge_points(mesh, ref, edges)
    eps = problem.diffusion_at(pts[..., 0], pts[..., 1])
    pen = params.sigma_interior * eps / mesh.edge_lengths[edges][:, None]
    kappa = params.kappa
    sides = [edge_traces(mesh, ref, edges, s) for s in (0, 1)]
    sign = (1.0, -1.0)
    out = []
    for t in (0, 1):
        el_t, v_t, n_t = sides[t]
        for s in (0, 1):
            el_s, v_s, n_s = sides[s]
            block = (
                _mass(w * pen * sign[t] * sign[s], v_t, v_s)
                - 0.5 * sign[t] * _mass(w * eps, v_t, n_s)
                + 0.5 * kappa * sign[s] * _mass(w * eps, n_t, v_s)
            )
            out.append((el_t, el_s, block))
    return out


def _diffusion_dirichlet(mesh, ref, problem, params, edges):
    pts, w = edge_points(mesh, ref, edges)
    x, y = pts[..., 0], pts[..., 1]
    eps = problem.diffusion_at(x, y)
    pen = params.sigma_boundary * eps / mesh.edge_lengths[edges][:, None]
    el, v, dn = edge_traces(mesh, ref, edges, 0)
    block = _mass(w * pen, v, v) - _mass(w * eps, v, dn) + params.kappa * _mass(w * eps, dn, v)
    g = problem.dirichlet(x, y)
    # consistency with +kappa {eps grad v}.[u] requires the kappa factor here as well
    rhs = np.einsum("eq,eqa->ea", w * pen * g, v) + params.kappa * np.einsum("eq,eqa->ea", w * eps * g, dn)
    return el, block, rhs


def assemble_diffusion(mesh: Mesh, ref: ReferenceElement, problem: ProblemSpec, params: DgParameters, workers: int = 1):
    """Diffusion matrix D and its Dirichlet load contribution F_D."""
    n = mesh.n_elements * ref.n_local
    dofs = dof_map(mesh.n_elements, ref.n_local)
    trip = Triplets(n)
    _assemble_volume_blocks(mesh, ref, problem, "diffusion", trip, workers)

    for _, part in _map_chunks(lambda e: _diffusion_interior(mesh, ref, problem, params, e), mesh.interior_edges, workers):
        for el_t, el_s, block in part:
            trip.add_blocks(dofs[el_t], dofs[el_s], block)

    F = np.zeros(n)
    for _, (el, block, rhs) in _map_chunks(
        lambda e: _diffusion_dirichlet(mesh, ref, problem, params, e), mesh.dirichlet_edges, workers
    ):
        trip.add_blocks(dofs[el], dofs[el], block)
        np.add.at(F, dofs[el], rhs)
    return to_csr(trip), F


# -- convection ------------------------------------------------------------------


def _inflow_tolerance(b):
    return 1e-12 * np.linalg.norm(b, axis=-1)


def _check_neumann_inflow(mesh, ref, problem):
    edges = mesh.neumann_edges
    if not len(edges):
        return
    pts, _ = edge_points(mesh, ref, edges)
    b = problem.advection_at(pts[..., 0], pts[..., 1])
    beta = np.einsum("eqi,ei->eq", b, mesh.edge_normals[edges])
    bad = np.flatnonzero(np.any(beta < -_inflow_tolerance(b), axis=1))
    if bad.size:
        e = int(edges[bad[0]])
        raise InflowOnNeumann(
            f"edge {e} {tuple(mesh.edges[e])} is a Neumann edge on the inflow boundary (b.n < 0)"
        )


def inflow_boundary_edges(mesh: Mesh, ref: ReferenceElement, problem: ProblemSpec) -> np.ndarray:
    """Boundary edge indices with b.n < 0 at some quadrature point."""
    edges = mesh.boundary_edges
    pts, _ = edge_points(mesh, ref, edges)
    b = problem.advection_at(pts[..., 0], pts[..., 1])
    beta = np.einsum("eqi,ei->eq", b, mesh.edge_normals[edges])
    return edges[np.any(beta < -_inflow_tolerance(b), axis=1)]


def _convection_interior(mesh, ref, problem, edges):
    pts, w = edge_points(mesh, ref, edges)
    b = problem.advection_at(pts[..., 0], pts[..., 1])
    beta = np.einsum("eqi,ei->eq", b, mesh.edge_normals[edges])
    # beta < 0: flow enters the left element, beta > 0: it enters the right one
    bm = np.minimum(beta, 0.0)
    bp = np.maximum(beta, 0.0)
    el_l, v_l, _ = edge_traces(mesh, ref, edges, 0)
    el_r, v_r, _ = edge_traces(mesh, ref, edges, 1)
    return [
        (el_l, el_l, -_mass(w * bm, v_l, v_l)),
        (el_l, el_r, _mass(w * bm, v_l, v_r)),
        (el_r, el_l, -_mass(w * bp, v_r, v_l)),
        (el_r, el_r, _mass(w * bp, v_r, v_r)),
    ]


def _convection_dirichlet(mesh, ref, problem, edges):
    pts, w = edge_points(mesh, ref, edges)
    x, y = pts[..., 0], pts[..., 1]
    b = problem.advection_at(x, y)
    bm = np.minimum(np.einsum("eqi,ei->eq", b, mesh.edge_normals[edges]), 0.0)
    el, v, _ = edge_traces(mesh, ref, edges, 0)
    block = -_mass(w * bm, v, v)
    rhs = -np.einsum("eq,eqa->ea", w * bm * problem.dirichlet(x, y), v)
    return el, block, rhs


def assemble_convection(mesh: Mesh, ref: ReferenceElement, problem: ProblemSpec, workers: int = 1):
    """Upwind convection matrix C and its inflow load contribution F_C."""
    _check_neumann_inflow(mesh, ref, problem)
    n = mesh.n_elements * ref.n_local
    dofs = dof_map(mesh.n_elements, ref.n_local)
    trip = Triplets(n)
    _assemble_volume_blocks(mesh, ref, problem, "convection", trip, workers)
    for _, part in _map_chunks(lambda e: _convection_interior(mesh, ref, problem, e), mesh.interior_edges, workers):
        for el_t, el_s, block in part:
            trip.add_blocks(dofs[el_t], dofs[el_s], block)
    F = np.zeros(n)
    for _, (el, block, rhs) in _map_chunks(lambda e: _convection_dirichlet(mesh, ref, problem, e), mesh.dirichlet_edges, workers):
        trip.add_blocks(dofs[el], dofs[el], block)
        np.add.at(F, dofs[el], rhs)
    return to_csr(trip), F


# -- reaction and load ------------------------------------------------------------


def assemble_reaction(mesh: Mesh, ref: ReferenceElement, problem: ProblemSpec, workers: int = 1) -> sp.csr_matrix:
    trip = Triplets(mesh.n_elements * ref.n_local)
    _assemble_volume_blocks(mesh, ref, problem, "reaction", trip, workers)
    return to_csr(trip)


def _neumann_load(mesh, ref, problem) -> np.ndarray:
    F = np.zeros(mesh.n_elements * ref.n_local)
    edges = mesh.neumann_edges
    if len(edges):
        pts, w = edge_points(mesh, ref, edges)
        el, v, _ = edge_traces(mesh, ref, edges, 0)
        g = problem.neumann(pts[..., 0], pts[..., 1])
        np.add.at(F, dof_map(mesh.n_elements, ref.n_local)[el], np.einsum("eq,eqa->ea", w * g, v))
    return F


def assemble_load(mesh: Mesh, ref: ReferenceElement, problem: ProblemSpec, params: DgParameters, workers: int = 1) -> np.ndarray:
    """Full right-hand side: source + Dirichlet lifting + inflow data + Neumann data."""
    _check_neumann_inflow(mesh, ref, problem)
    dofs = dof_map(mesh.n_elements, ref.n_local)
    F = _volume_load(mesh, ref, problem, workers) + _neumann_load(mesh, ref, problem)
    edges = mesh.dirichlet_edges
    if len(edges):
        el, _, rhs_d = _diffusion_dirichlet(mesh, ref, problem, params, edges)
        el, _, rhs_c = _convection_dirichlet(mesh, ref, problem, edges)
        np.add.at(F, dofs[el], rhs_d + rhs_c)
    return F


def assemble_all(mesh: Mesh, ref: ReferenceElement, problem: ProblemSpec, params: DgParameters, workers: int = 1) -> DgSystem:
    pts = volume_points(mesh, ref, np.arange(mesh.n_elements))
    problem.check_diffusion(problem.diffusion_at(pts[..., 0], pts[..., 1]))
    D, F_D = assemble_diffusion(mesh, ref, problem, params, workers)
    C, F_C = assemble_convection(mesh, ref, problem, workers)
    R = assemble_reaction(mesh, ref, problem, workers)
    F = _volume_load(mesh, ref, problem, workers) + F_D + F_C + _neumann_load(mesh, ref, problem)
    return DgSystem(D, C, R, F)
