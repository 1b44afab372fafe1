"""Gaussian quadrature on [-1, 1] and on the reference triangle.

The reference triangle is ``{x >= -1, y >= -1, x + y <= 0}``.  Triangle
rules are built on collapsed (Duffy) coordinates: a Gauss-Legendre rule in
the direction ``a`` times a Gauss-Jacobi(1, 0) rule in ``b = y`` which absorbs
the Jacobian ``(1 - b) / 2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class QuadRule:
    """Nodes and weights of a quadrature rule.

    ``nodes`` has shape ``(n,)`` for interval rules and ``(n, 2)`` for
    triangle rules.
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self):
        return len(self.weights)

    def integrate(self, values):
        """Apply the rule to sampled values (first axis = nodes)."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def gauss_legendre(n: int) -> QuadRule:
    if n < 1:
        raise ValueError("need at least one node")
    x, w = special.roots_legendre(n)
    return QuadRule(1, np.asarray(x, float), np.asarray(w, float), 2 * n - 1)


def gauss_jacobi(n: int, alpha: float, beta: float) -> QuadRule:
    """n-point rule for the weight ``(1 - x)**alpha * (1 + x)**beta``."""
    if n < 1:
        raise ValueError("need at least one node")
    if alpha <= -1 or beta <= -1:
        raise ValueError("Jacobi parameters must exceed -1")
    if alpha == 0 and beta == 0:
        return gauss_legendre(n)
    x, w = special.roots_jacobi(n, alpha, beta)
    return QuadRule(1, np.asarray(x, float), np.asarray(w, float), 2 * n - 1)


def points_for_degree(degree: int) -> int:
    """Number of Gauss points integrating degree ``degree`` exactly."""
    return max(1, (max(degree, 0) + 2) // 2)


def collapse(x, y):
    """Map triangle points to collapsed coordinates ``(a, b)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    t = 1.0 - y
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(t > 1e-300, 2.0 * (1.0 + x) / np.where(t > 1e-300, t, 1.0) - 1.0, -1.0)
    return np.clip(a, -1.0, 1.0), y


def uncollapse(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return 0.5 * (1.0 + a) * (1.0 - b) - 1.0, b


def triangle_rule(order: int) -> QuadRule:
    """Collapsed-coordinate rule on the reference triangle, exact to ``order``.

    A polynomial of total degree ``d`` in (x, y) becomes a polynomial of
    degree ``d`` in each collapsed variable, and the Jacobian factor is
    carried by the Jacobi weight, so ``points_for_degree(order)`` points per
    direction are enough.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    n = points_for_degree(order)
    ra = gauss_legendre(n)
    rb = gauss_jacobi(n, 1.0, 0.0)
    A, B = np.meshgrid(ra.nodes, rb.nodes, indexing="ij")
    x, y = uncollapse(A.ravel(), B.ravel())
    # (1 - b)/2 Jacobian: the Jacobi weight supplies (1 - b), hence the 1/2
    w = 0.5 * np.outer(ra.weights, rb.weights).ravel()
    return QuadRule(2, np.column_stack([x, y]), w, 2 * n - 1)


def edge_rule(order: int, v0, v1):
    """Gauss-Legendre rule on the segment ``v0 -> v1``.

    Returns ``(t, points, weights)`` where ``t`` is the parameter in
    [-1, 1] and ``weights`` already include the factor ``|e| / 2``.
    """
    r = gauss_legendre(points_for_degree(order))
    v0 = np.asarray(v0, float)
    v1 = np.asarray(v1, float)
    t = r.nodes
    pts = 0.5 * (1 - t)[:, None] * v0 + 0.5 * (1 + t)[:, None] * v1
    length = float(np.hypot(*(v1 - v0)))
    return t, pts, r.weights * 0.5 * length
