"""Orthonormal polynomial basis and quadrature on the reference triangle.

The reference triangle has vertices (0, 0), (1, 0), (0, 1).  The basis is the
Dubiner (collapsed-coordinate Jacobi) basis scaled to be orthonormal in
L2 of the reference triangle, so element mass matrices are ``|det B| I``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import eval_jacobi, roots_jacobi, roots_legendre

from .errors import UnsupportedDegree
from .mesh import LOCAL_EDGE_VERTICES

MAX_DEGREE = 4
REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class QuadratureRule(NamedTuple):
    points: np.ndarray  # (n, 2) reference coords, or (n,) edge parameters in [0, 1]
    weights: np.ndarray
    degree: int  # polynomial exactness


@lru_cache(maxsize=None)
def volume_rule(degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi rule on the reference triangle, exact to ``degree``.

    Uses x = s (1 - t), y = t with Gauss-Legendre in s and Gauss-Jacobi(1, 0)
    in t, which absorbs the (1 - t) Jacobian factor.
    """
    n = max(1, -(-(degree + 1) // 2))
    s, ws = roots_legendre(n)
    t, wt = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (s + 1.0)
    t = 0.5 * (t + 1.0)
    ws = 0.5 * ws
    wt = 0.25 * wt
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    pts = np.stack([(S * (1.0 - T)).ravel(), T.ravel()], axis=1)
    pts.setflags(write=False)
    W = W.ravel()
    W.setflags(write=False)
    return QuadratureRule(pts, W, 2 * n - 1)


@lru_cache(maxsize=None)
def edge_rule(n_points: int) -> QuadratureRule:
    """Gauss-Legendre on the unit parameter interval [0, 1]; weights sum to 1."""
    t, w = roots_legendre(n_points)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    t.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(t, w, 2 * n_points - 1)


def integrate_volume(rule: QuadratureRule, f: Callable) -> float:
    x, y = rule.points.T
    return float(np.dot(rule.weights, np.broadcast_to(f(x, y), x.shape)))


def integrate_edge(rule: QuadratureRule, f: Callable) -> float:
    return float(np.dot(rule.weights, np.broadcast_to(f(rule.points), rule.points.shape)))


def basis_indices(degree: int) -> list[tuple[int, int]]:
    """(i, j) Dubiner index pairs, ordered by total degree then by j."""
    return [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]


def n_local(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def _jacobi(n, a, b, x):
    return eval_jacobi(n, a, b, x)


def _jacobi_deriv(n, a, b, x):
    if n == 0:
        return np.zeros_like(x)
    return 0.5 * (n + a + b + 1) * eval_jacobi(n - 1, a + 1, b + 1, x)


def evaluate_basis(degree: int, points) -> tuple[np.ndarray, np.ndarray]:
    """Basis values (n, n_local) and reference gradients (n, n_local, 2) at ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = 2.0 * pts[:, 0] - 1.0
    s = 2.0 * pts[:, 1] - 1.0
    top = np.isclose(s, 1.0, rtol=0.0, atol=1e-14)
    denom = np.where(top, 1.0, 1.0 - s)
    a = np.where(top, -1.0, 2.0 * (1.0 + r) / denom - 1.0)
    b = s
    half = 0.5 * (1.0 - b)

    idx = basis_indices(degree)
    vals = np.empty((len(pts), len(idx)))
    grads = np.empty((len(pts), len(idx), 2))
    for col, (i, j) in enumerate(idx):
        scale = np.sqrt(2.0 * (2 * i + 1) * (i + j + 1))
        pa = _jacobi(i, 0, 0, a)
        dpa = _jacobi_deriv(i, 0, 0, a)
        qb = _jacobi(j, 2 * i + 1, 0, b)
        dqb = _jacobi_deriv(j, 2 * i + 1, 0, b)
        vals[:, col] = scale * pa * half**i * qb
        if i == 0:
            d_r = np.zeros_like(r)
            d_s = pa * dqb
        else:
            hm1 = half ** (i - 1)
            d_r = dpa * hm1 * qb
            d_s = dpa * 0.5 * (1.0 + a) * hm1 * qb + pa * (-0.5 * i * hm1 * qb + half**i * dqb)
        # d/dx = 2 d/dr, d/dy = 2 d/ds
        grads[:, col, 0] = 2.0 * scale * d_r
        grads[:, col, 1] = 2.0 * scale * d_s
    return vals, grads


def edge_reference_points(edge_local_index: int, t) -> np.ndarray:
    """Map edge parameters ``t`` in [0, 1] onto local edge ``edge_local_index``."""
    a, b = LOCAL_EDGE_VERTICES[edge_local_index]
    va, vb = REFERENCE_VERTICES[a], REFERENCE_VERTICES[b]
    t = np.asarray(t, dtype=float)
    return va + t[:, None] * (vb - va)


def trace_alignment(edge_local_index: int, flip: bool, n_points: int) -> np.ndarray:
    """Permutation of edge quadrature points seen from the neighbouring element.

    Gauss points are symmetric on [0, 1], so traversing the edge backwards maps
    point q onto point ``n - 1 - q``.  The permutation is the same for every
    local edge since all edges share the one 1-D rule.
    """
    if edge_local_index not in (0, 1, 2):
        raise ValueError(f"local edge index must be 0, 1 or 2, got {edge_local_index}")
    perm = np.arange(n_points)
    return perm[::-1].copy() if flip else perm


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    degree: int
    n_local: int
    volume_rule: QuadratureRule
    edge_rule: QuadratureRule
    basis_at_volume: np.ndarray  # (nq, n_local)
    grad_at_volume: np.ndarray  # (nq, n_local, 2)
    basis_at_edges: np.ndarray  # (3, 2, nqe, n_local), indexed [local edge, flip]
    grad_at_edges: np.ndarray  # (3, 2, nqe, n_local, 2)

    def trace_alignment(self, edge_local_index: int, flip: bool) -> np.ndarray:
        return trace_alignment(edge_local_index, flip, len(self.edge_rule.weights))

    def evaluate(self, points):
        return evaluate_basis(self.degree, points)


@lru_cache(maxsize=None)
def build_reference(degree: int, quad_order: int | None = None) -> ReferenceElement:
    """Precompute basis tables for ``degree``.

    The volume rule is exact for degree ``quad_order`` (default ``2k + 2``);
    edges use ``ceil(quad_order / 2)`` Gauss points, i.e. exactness 2k + 1 by
    default.
    """
    if not isinstance(degree, (int, np.integer)) or not 1 <= degree <= MAX_DEGREE:
        raise UnsupportedDegree(f"degree must be in 1..{MAX_DEGREE}, got {degree!r}")
    q = 2 * degree + 2 if quad_order is None else int(quad_order)
    if q < 1:
        raise ValueError(f"quadrature order must be positive, got {q}")
    vrule = volume_rule(q)
    erule = edge_rule(max(1, -(-q // 2)))

    bv, gv = evaluate_basis(degree, vrule.points)
    nqe = len(erule.weights)
    nl = n_local(degree)
    be = np.empty((3, 2, nqe, nl))
    ge = np.empty((3, 2, nqe, nl, 2))
    for edge in range(3):
        v, g = evaluate_basis(degree, edge_reference_points(edge, erule.points))
        for flip in (0, 1):
            perm = trace_alignment(edge, bool(flip), nqe)
            be[edge, flip] = v[perm]
            ge[edge, flip] = g[perm]
    for arr in (bv, gv, be, ge):
        arr.setflags(write=False)
    return ReferenceElement(degree, nl, vrule, erule, bv, gv, be, ge)
