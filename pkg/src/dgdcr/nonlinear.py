"""Nonlinear reaction vector, its Jacobian, and plain Newton iteration."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import DgSystem, dof_map
from .errors import SingularMatrix
from .mesh import Mesh
from .problems import NonlinearReaction
from .reference import ReferenceElement
from .sparse import Triplets, add, direct_solve, matvec, to_csr

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonConfig:
    max_iterations: int = 50
    residual_tolerance: float = 1e-10
    step_tolerance: float = 1e-12
    # stop when ||J w + Res|| falls below this, as the original driver did
    legacy_check: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.residual_tolerance <= 0 or self.step_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.legacy_check is not None and self.legacy_check <= 0:
            raise ValueError("legacy_check must be positive")


@dataclass
class NewtonReport:
    iterations: int = 0
    final_residual: float = np.inf
    converged: bool = False
    history: list[float] = field(default_factory=list)  # ||Res^k|| before step k


def assemble_nonlinear(coef, mesh: Mesh, ref: ReferenceElement, reaction: NonlinearReaction | None):
    """Return ``H(coef)`` and its block-diagonal Jacobian ``HJ(coef)``.

    H_i = int r(u_h) phi_i,  HJ_ij = int r'(u_h) phi_j phi_i.
    """
    n = mesh.n_elements * ref.n_local
    if reaction is None:
        return np.zeros(n), sp.csr_matrix((n, n))
    coef = np.asarray(coef, dtype=float)
    if coef.shape != (n,):
        raise ValueError(f"coefficient vector has shape {coef.shape}, expected ({n},)")
    phi = ref.basis_at_volume
    wdet = mesh.det_jacobians[:, None] * ref.volume_rule.weights[None, :]
    uq = coef.reshape(mesh.n_elements, ref.n_local) @ phi.T  # (n_el, nq)
    H = np.einsum("eq,qa->ea", wdet * reaction.r(uq), phi).ravel()
    blocks = np.einsum("eq,qa,qb->eab", wdet * reaction.dr(uq), phi, phi)
    dofs = dof_map(mesh.n_elements, ref.n_local)
    trip = Triplets(n)
    trip.add_blocks(dofs, dofs, blocks)
    return H, to_csr(trip)


def newton_solve(
    system: DgSystem,
    mesh: Mesh,
    ref: ReferenceElement,
    reaction: NonlinearReaction | None,
    config: NewtonConfig = NewtonConfig(),
    initial_guess=None,
):
    """Solve ``(D + C + R) v + H(v) = F`` with undamped Newton steps.

    Stops when ``||Res||_2`` or ``||w||_2`` drops below its tolerance, or when
    the budget runs out (``converged`` is then False).
    """
    stiff = system.stiffness
    coef = np.zeros(system.n_dofs) if initial_guess is None else np.array(initial_guess, dtype=float)
    report = NewtonReport()

    def residual(c):
        H, HJ = assemble_nonlinear(c, mesh, ref, reaction)
        return matvec(stiff, c) + H - system.F, HJ

    res, HJ = residual(coef)
    res_norm = float(np.linalg.norm(res))
    while True:
        if res_norm <= config.residual_tolerance:
            report.converged = True
            break
        if report.iterations >= config.max_iterations:
            break
        report.history.append(res_norm)
        J = add(stiff, HJ)
        try:
            w = direct_solve(J, -res)
        except SingularMatrix as exc:
            raise SingularMatrix(f"Newton iteration {report.iterations + 1}: {exc}", exc.pivot, report.iterations + 1) from exc
        coef = coef + w
        report.iterations += 1
        legacy_defect = float(np.linalg.norm(matvec(J, w) + res))
        res, HJ = residual(coef)
        res_norm = float(np.linalg.norm(res))
        log.info("newton %d: |Res|=%.3e |w|=%.3e", report.iterations, res_norm, np.linalg.norm(w))
        if config.legacy_check is not None and legacy_defect < config.legacy_check:
            report.converged = True
            break
        if np.linalg.norm(w) <= config.step_tolerance:
            report.converged = True
            break
    report.final_residual = res_norm
    return coef, report
