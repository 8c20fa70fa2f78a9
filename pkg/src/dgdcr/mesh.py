"""Array-based triangular meshes with edge topology and red refinement.

All indices are 0-based.  Local edge ``l`` of a triangle ``(v0, v1, v2)`` is
the edge opposite vertex ``l``, traversed counter-clockwise, i.e. local edge 0
runs ``v1 -> v2``, local edge 1 runs ``v2 -> v0`` and local edge 2 runs
``v0 -> v1``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateElement,
    InvalidBoundarySpec,
    InvalidTopology,
    NonManifold,
)

# local edge l runs from vertex LOCAL_EDGE_VERTICES[l][0] to [l][1]
LOCAL_EDGE_VERTICES = np.array([[1, 2], [2, 0], [0, 1]])


class EdgeKind(enum.IntEnum):
    INTERIOR = 0
    DIRICHLET = 1
    NEUMANN = 2


class ElementGeometry(NamedTuple):
    jacobian: np.ndarray
    det_jacobian: float
    inverse_transpose: np.ndarray
    area: float
    diameter: float


class EdgeGeometry(NamedTuple):
    length: float
    normal: np.ndarray
    tangent: np.ndarray
    owner_side: tuple[int, int]  # local edge index in (left, right); right is -1 on the boundary


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangular mesh.

    Attributes
    ----------
    nodes : (n_nodes, 2) float array
    elements : (n_elements, 3) int array, counter-clockwise vertex order
    edges : (n_edges, 2) int array, ``edges[e, 0] < edges[e, 1]``
    edge_kind : (n_edges,) int array of :class:`EdgeKind` values
    edge_elements : (n_edges, 2) int array ``(left, right)``; ``right == -1``
        on boundary edges and ``left < right`` on interior edges
    element_edges : (n_elements, 3) int array, aligned with local edge order
    """

    nodes: np.ndarray
    elements: np.ndarray
    edges: np.ndarray
    edge_kind: np.ndarray
    edge_elements: np.ndarray
    element_edges: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_kind == EdgeKind.INTERIOR)

    @property
    def dirichlet_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_kind == EdgeKind.DIRICHLET)

    @property
    def neumann_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_kind == EdgeKind.NEUMANN)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_kind != EdgeKind.INTERIOR)

    # -- element geometry, batched over all elements ------------------------

    @cached_property
    def jacobians(self) -> np.ndarray:
        """(n_elements, 2, 2) matrices B of the affine maps x = B xhat + v0."""
        v = self.nodes[self.elements]
        return np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)

    @cached_property
    def det_jacobians(self) -> np.ndarray:
        B = self.jacobians
        return B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]

    @cached_property
    def inverse_transposes(self) -> np.ndarray:
        B = self.jacobians
        det = self.det_jacobians
        invT = np.empty_like(B)
        invT[:, 0, 0] = B[:, 1, 1]
        invT[:, 0, 1] = -B[:, 1, 0]
        invT[:, 1, 0] = -B[:, 0, 1]
        invT[:, 1, 1] = B[:, 0, 0]
        return invT / det[:, None, None]

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * self.det_jacobians

    @cached_property
    def diameters(self) -> np.ndarray:
        v = self.nodes[self.elements]
        lengths = np.linalg.norm(v[:, [1, 2, 0]] - v, axis=2)
        return lengths.max(axis=1)

    @property
    def h_max(self) -> float:
        return float(self.diameters.max())

    # -- edge geometry, batched over all edges -------------------------------

    @cached_property
    def edge_local_indices(self) -> np.ndarray:
        """(n_edges, 2) local edge index inside the left and right element (-1 if absent)."""
        out = np.full((self.n_edges, 2), -1, dtype=np.int64)
        for side in range(2):
            el = self.edge_elements[:, side]
            has = el >= 0
            match = self.element_edges[el[has]] == np.flatnonzero(has)[:, None]
            out[has, side] = np.argmax(match, axis=1)
        return out

    @cached_property
    def edge_endpoints(self) -> np.ndarray:
        """(n_edges, 2) node indices in the left element's counter-clockwise direction."""
        left = self.edge_elements[:, 0]
        local = self.edge_local_indices[:, 0]
        verts = self.elements[left]
        rows = np.arange(self.n_edges)
        return np.stack(
            [verts[rows, LOCAL_EDGE_VERTICES[local, 0]], verts[rows, LOCAL_EDGE_VERTICES[local, 1]]],
            axis=1,
        )

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @cached_property
    def edge_tangents(self) -> np.ndarray:
        p = self.nodes[self.edge_endpoints]
        d = p[:, 1] - p[:, 0]
        return d / np.linalg.norm(d, axis=1)[:, None]

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Unit normals pointing from the left element to the right one (outward on the boundary)."""
        t = self.edge_tangents
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    @cached_property
    def edge_flips(self) -> np.ndarray:
        """True where the right element traverses the edge opposite to the left element."""
        flips = np.zeros(self.n_edges, dtype=bool)
        inner = self.interior_edges
        right = self.edge_elements[inner, 1]
        local = self.edge_local_indices[inner, 1]
        start_right = self.elements[right, LOCAL_EDGE_VERTICES[local, 0]]
        flips[inner] = start_right != self.edge_endpoints[inner, 0]
        return flips

    def boundary_pairs(self, kind: EdgeKind) -> np.ndarray:
        """Boundary edges of one kind as (start, end) pairs in outward CCW direction."""
        return self.edge_endpoints[self.edge_kind == kind]


def _signed_double_areas(nodes, elements):
    v = nodes[elements]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    return d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]


def get_mesh(
    nodes,
    elements,
    dirichlet: Sequence = (),
    neumann: Sequence = (),
) -> Mesh:
    """Build a :class:`Mesh` from raw arrays (0-based indices).

    Clockwise elements are reoriented.  Every boundary edge must appear in
    exactly one of ``dirichlet`` / ``neumann``.
    """
    nodes = np.array(nodes, dtype=float).reshape(-1, 2)
    elements = np.array(elements, dtype=np.int64).reshape(-1, 3)
    n_nodes = len(nodes)
    if elements.size and (elements.min() < 0 or elements.max() >= n_nodes):
        raise InvalidTopology(f"element references a node outside [0, {n_nodes})")

    dbl = _signed_double_areas(nodes, elements)
    scale = max(np.ptp(nodes, axis=0).max(), 1.0) if n_nodes else 1.0
    bad = np.flatnonzero(np.abs(dbl) <= 1e-14 * scale**2)
    if bad.size:
        raise DegenerateElement(f"element {bad[0]} has zero area")
    elements = elements.copy()
    cw = dbl < 0
    elements[cw] = elements[cw][:, [0, 2, 1]]

    m = len(elements)
    local = elements[:, LOCAL_EDGE_VERTICES]  # (m, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(counts > 2):
        e = int(np.flatnonzero(counts > 2)[0])
        raise NonManifold(f"edge {tuple(edges[e])} is shared by {counts[e]} elements")
    element_edges = inverse.reshape(m, 3)

    order = np.argsort(inverse, kind="stable")  # element-major occurrences grouped by edge
    first = np.ones(len(order), dtype=bool)
    first[1:] = inverse[order][1:] != inverse[order][:-1]
    owner = order // 3
    edge_elements = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_elements[inverse[order][first], 0] = owner[first]
    edge_elements[inverse[order][~first], 1] = owner[~first]

    edge_kind = np.full(len(edges), EdgeKind.INTERIOR, dtype=np.int8)
    lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}
    for kind, spec in ((EdgeKind.DIRICHLET, dirichlet), (EdgeKind.NEUMANN, neumann)):
        spec = np.array(spec, dtype=np.int64).reshape(-1, 2)
        for a, b in spec:
            key = (int(min(a, b)), int(max(a, b)))
            e = lookup.get(key)
            if e is None or counts[e] != 1:
                raise InvalidBoundarySpec(f"edge {(int(a), int(b))} is not a boundary edge of the mesh")
            if edge_kind[e] != EdgeKind.INTERIOR:
                raise InvalidBoundarySpec(f"edge {(int(a), int(b))} is tagged more than once")
            edge_kind[e] = kind
    untagged = np.flatnonzero((counts == 1) & (edge_kind == EdgeKind.INTERIOR))
    if untagged.size:
        raise InvalidBoundarySpec(f"boundary edge {tuple(edges[untagged[0]])} has no boundary condition")

    for arr in (nodes, elements, edges, edge_kind, edge_elements, element_edges):
        arr.setflags(write=False)
    return Mesh(nodes, elements, edges, edge_kind, edge_elements, element_edges)


def uniform_refine(mesh: Mesh) -> Mesh:
    """Red refinement: split every triangle into four through its edge midpoints."""
    n = mesh.n_nodes
    mids = 0.5 * (mesh.nodes[mesh.edges[:, 0]] + mesh.nodes[mesh.edges[:, 1]])
    nodes = np.vstack([mesh.nodes, mids])

    v0, v1, v2 = mesh.elements.T
    m0, m1, m2 = (n + mesh.element_edges).T
    children = np.stack(
        [
            np.stack([v0, m2, m1], axis=1),
            np.stack([m2, v1, m0], axis=1),
            np.stack([m1, m0, v2], axis=1),
            np.stack([m0, m1, m2], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)

    def split(kind):
        idx = np.flatnonzero(mesh.edge_kind == kind)
        a, b = mesh.edges[idx].T
        mid = n + idx
        return np.concatenate([np.stack([a, mid], 1), np.stack([mid, b], 1)])

    return get_mesh(nodes, children, split(EdgeKind.DIRICHLET), split(EdgeKind.NEUMANN))


def element_geometry(mesh: Mesh, element_index: int) -> ElementGeometry:
    if not 0 <= element_index < mesh.n_elements:
        raise IndexError(element_index)
    return ElementGeometry(
        mesh.jacobians[element_index].copy(),
        float(mesh.det_jacobians[element_index]),
        mesh.inverse_transposes[element_index].copy(),
        float(mesh.areas[element_index]),
        float(mesh.diameters[element_index]),
    )


def edge_geometry(mesh: Mesh, edge_index: int) -> EdgeGeometry:
    left, right = mesh.edge_local_indices[edge_index]
    return EdgeGeometry(
        float(mesh.edge_lengths[edge_index]),
        mesh.edge_normals[edge_index].copy(),
        mesh.edge_tangents[edge_index].copy(),
        (int(left), int(right)),
    )


# -- built-in meshes ---------------------------------------------------------

PAPER_NODES = [[0, 0], [0.5, 0], [1, 0], [0, 0.5], [0.5, 0.5], [1, 0.5], [0, 1], [0.5, 1], [1, 1]]
PAPER_ELEMENTS = [[4, 1, 5], [1, 2, 5], [5, 2, 6], [2, 3, 6], [7, 4, 8], [4, 5, 8], [8, 5, 9], [5, 6, 9]]
PAPER_BOUNDARY = [[1, 2], [2, 3], [1, 4], [3, 6], [4, 7], [6, 9], [7, 8], [8, 9]]


def _split_boundary(nodes, boundary, neumann_marker):
    if neumann_marker is None:
        return boundary, []
    dirichlet, neumann = [], []
    for a, b in boundary:
        mx, my = 0.5 * (nodes[a] + nodes[b])
        (neumann if neumann_marker(mx, my) else dirichlet).append([a, b])
    return dirichlet, neumann


def paper_unit_square_mesh(neumann_marker: Callable[[float, float], bool] | None = None) -> Mesh:
    """The 9-node, 8-element initial mesh of the unit square.

    All boundary edges are Dirichlet unless ``neumann_marker(x, y)`` returns
    True at the edge midpoint.
    """
    nodes = np.array(PAPER_NODES, dtype=float)
    elements = np.array(PAPER_ELEMENTS) - 1
    boundary = np.array(PAPER_BOUNDARY) - 1
    dirichlet, neumann = _split_boundary(nodes, boundary, neumann_marker)
    return get_mesh(nodes, elements, dirichlet, neumann)


def refined_paper_mesh(levels: int, neumann_marker=None) -> Mesh:
    mesh = paper_unit_square_mesh(neumann_marker)
    for _ in range(levels):
        mesh = uniform_refine(mesh)
    return mesh


# -- plain-text mesh files ---------------------------------------------------


def read_mesh(path) -> Mesh:
    """Read the plain-text mesh format (1-based indices).

    Header ``nodes N elements M dirichlet D neumann B`` followed by N lines
    ``x y``, M lines ``i j k`` and D + B lines ``a b``.
    """
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise InvalidTopology(f"{path}: empty mesh file")
    head = lines[0]
    try:
        counts = dict(zip(head[0::2], map(int, head[1::2])))
        n, m, d, b = (counts[k] for k in ("nodes", "elements", "dirichlet", "neumann"))
    except (KeyError, ValueError) as exc:
        raise InvalidTopology(f"{path}: malformed header {' '.join(head)!r}") from exc
    body = lines[1:]
    if len(body) != n + m + d + b:
        raise InvalidTopology(f"{path}: expected {n + m + d + b} data lines, found {len(body)}")
    nodes = np.array(body[:n], dtype=float).reshape(-1, 2)
    elements = np.array(body[n : n + m], dtype=np.int64).reshape(-1, 3) - 1
    dirichlet = np.array(body[n + m : n + m + d], dtype=np.int64).reshape(-1, 2) - 1
    neumann = np.array(body[n + m + d :], dtype=np.int64).reshape(-1, 2) - 1
    return get_mesh(nodes, elements, dirichlet, neumann)


def write_mesh(mesh: Mesh, path) -> None:
    dirichlet = mesh.boundary_pairs(EdgeKind.DIRICHLET) + 1
    neumann = mesh.boundary_pairs(EdgeKind.NEUMANN) + 1
    out = [
        f"nodes {mesh.n_nodes} elements {mesh.n_elements} "
        f"dirichlet {len(dirichlet)} neumann {len(neumann)}"
    ]
    out += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    out += [f"{i} {j} {k}" for i, j, k in (mesh.elements + 1).tolist()]
    out += [f"{a} {b}" for a, b in dirichlet.tolist()]
    out += [f"{a} {b}" for a, b in neumann.tolist()]
    Path(path).write_text("\n".join(out) + "\n")
