"""Errors, convergence tables and VTK export."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import Mesh
from .reference import REFERENCE_VERTICES, ReferenceElement, evaluate_basis, volume_rule

TABLE_HEADER = ("DoFs", "h_max", "L2-error", "#it")
CSV_COLUMNS = ("level", "dofs", "hmax", "l2err", "iters", "rate")


def dof_count(mesh_or_n_elements, degree: int) -> int:
    n_el = getattr(mesh_or_n_elements, "n_elements", mesh_or_n_elements)
    return int(n_el) * (degree + 1) * (degree + 2) // 2


def evaluate_solution(coef, mesh: Mesh, ref: ReferenceElement, ref_points) -> np.ndarray:
    """u_h at the same reference points in every element: shape (n_el, n_points)."""
    vals, _ = evaluate_basis(ref.degree, ref_points)
    return np.asarray(coef, dtype=float).reshape(mesh.n_elements, ref.n_local) @ vals.T


def l2_error(coef, mesh: Mesh, ref: ReferenceElement, exact, quad_order: int | None = None):
    """L2 norm of ``u_h - u*`` and the maximal element diameter.

    ``exact`` is a callable returning u* (or a tuple whose first entry is u*),
    typically ``problem.exact_at``.  The default rule is two degrees more
    accurate than the assembly default, exactness ``2k + 3``.
    """
    q = 2 * ref.degree + 3 if quad_order is None else quad_order
    rule = volume_rule(q)
    uh = evaluate_solution(coef, mesh, ref, rule.points)
    x0 = mesh.nodes[mesh.elements[:, 0]]
    pts = x0[:, None, :] + np.einsum("eij,qj->eqi", mesh.jacobians, rule.points)
    u = exact(pts[..., 0], pts[..., 1])
    if isinstance(u, tuple):
        u = u[0]
    wdet = mesh.det_jacobians[:, None] * rule.weights[None, :]
    err = float(np.sqrt(np.sum(wdet * (uh - u) ** 2)))
    return err, mesh.h_max


def l2_project(func, mesh: Mesh, ref: ReferenceElement) -> np.ndarray:
    """Coefficients of the L2 projection of ``func(x, y)`` (orthonormal basis, so no solve)."""
    rule = ref.volume_rule
    x0 = mesh.nodes[mesh.elements[:, 0]]
    pts = x0[:, None, :] + np.einsum("eij,qj->eqi", mesh.jacobians, rule.points)
    vals = np.broadcast_to(func(pts[..., 0], pts[..., 1]), pts.shape[:2])
    # mass block is det * I
    return np.einsum("q,eq,qa->ea", rule.weights, vals, ref.basis_at_volume).ravel()


# -- convergence tables -----------------------------------------------------------


@dataclass
class TableRow:
    level: int
    dofs: int
    hmax: float
    l2err: float
    iters: int
    rate: float | None = None


def fill_rates(rows: list[TableRow]) -> list[TableRow]:
    """rate_L = log(e_{L-1} / e_L) / log(h_{L-1} / h_L)."""
    for prev, row in zip(rows, rows[1:]):
        if prev.l2err > 0 and row.l2err > 0 and prev.hmax != row.hmax:
            row.rate = math.log(prev.l2err / row.l2err) / math.log(prev.hmax / row.hmax)
    return rows


def convergence_table(problem, params, levels, solve) -> list[TableRow]:
    """Run ``solve(problem, params, level) -> (dofs, hmax, l2err, iters)`` per level."""
    rows = [TableRow(level, *solve(problem, params, level)) for level in levels]
    return fill_rates(rows)


def format_table(rows: list[TableRow], with_rate: bool | None = None) -> str:
    if with_rate is None:
        with_rate = len(rows) > 1
    header = list(TABLE_HEADER) + (["rate"] if with_rate else [])
    lines = [" ".join(f"{h:>12}" for h in header)]
    for r in rows:
        cells = [f"{r.dofs:>12d}", f"{r.hmax:>12.4e}", f"{r.l2err:>12.4e}", f"{r.iters:>12d}"]
        if with_rate:
            cells.append(f"{r.rate:>12.4f}" if r.rate is not None else f"{'-':>12}")
        lines.append(" ".join(cells))
    return "\n".join(lines)


def table_csv(rows: list[TableRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.level, r.dofs, repr(r.hmax), repr(r.l2err), r.iters, "" if r.rate is None else repr(r.rate)])
    return buf.getvalue()


def write_csv(rows: list[TableRow], path) -> None:
    Path(path).write_text(table_csv(rows))


# -- VTK --------------------------------------------------------------------------


def _subdivision(n: int):
    """Reference points and sub-triangles of a uniform n-fold subdivision."""
    idx = {}
    pts = []
    for j in range(n + 1):
        for i in range(n + 1 - j):
            idx[i, j] = len(pts)
            pts.append((i / n, j / n))
    tris = []
    for j in range(n):
        for i in range(n - j):
            tris.append((idx[i, j], idx[i + 1, j], idx[i, j + 1]))
            if i + j < n - 1:
                tris.append((idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]))
    return np.array(pts), np.array(tris)


def export_vtk(coef, mesh: Mesh, ref: ReferenceElement, path, subdivisions: int = 1, title: str = "dg solution") -> None:
    """Write u_h as a legacy ASCII VTK unstructured grid.

    Every element gets its own copies of its points so jumps between elements
    stay visible; ``subdivisions > 1`` splits each element uniformly to show
    higher-degree variation.
    """
    if subdivisions < 1:
        raise ValueError("subdivisions must be >= 1")
    if subdivisions == 1:
        ref_pts, tris = REFERENCE_VERTICES, np.array([[0, 1, 2]])
    else:
        ref_pts, tris = _subdivision(subdivisions)
    npt = len(ref_pts)
    values = evaluate_solution(coef, mesh, ref, ref_pts).ravel()
    x0 = mesh.nodes[mesh.elements[:, 0]]
    xy = (x0[:, None, :] + np.einsum("eij,qj->eqi", mesh.jacobians, ref_pts)).reshape(-1, 2)
    cells = (np.arange(mesh.n_elements)[:, None, None] * npt + tris[None]).reshape(-1, 3)

    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {len(xy)} double")
    out += [f"{x!r} {y!r} 0.0" for x, y in xy.tolist()]
    out.append(f"CELLS {len(cells)} {4 * len(cells)}")
    out += [f"3 {a} {b} {c}" for a, b, c in cells.tolist()]
    out.append(f"CELL_TYPES {len(cells)}")
    out += ["5"] * len(cells)
    out.append(f"POINT_DATA {len(xy)}")
    out += ["SCALARS u double 1", "LOOKUP_TABLE default"]
    out += [repr(v) for v in values.tolist()]
    path = Path(path)
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc
