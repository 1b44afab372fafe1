"""Saturation constants of the three model problems on the reference triangle.

For a source ``phi`` each problem has a Riesz lift ``u_s(phi)`` in a
polynomial space of degree ``s``:

* ``P1``: volume source ``psi * phi`` with ``phi`` in P_{p-1}, test functions
  vanishing on the two edges through the vertex where the hat ``psi`` is 1;
* ``P2``: edge source ``phi`` in P_p on edge 1, test functions vanishing on
  edge 2;
* ``P3``: boundary source ``phi`` in prod_i P_p(e_i) with zero total
  integral, mean-zero test functions.

The energies ``|grad u_s(phi)|^2`` are quadratic forms ``phi^T E_s phi``.
The saturation constant for degrees ``(p, q, r)`` is the largest eigenvalue
of the pencil ``(E_r, E_{p+q})``, i.e. the worst-case ratio of squared
energies of the degree-r and degree-(p+q) lifts.

Geometry (see :mod:`satlab.basis` for the edge numbering): the hat of P1
sits at the 45-degree vertex (1, -1), so its Dirichlet edges are edge 1
(y = -1) and the hypotenuse and ``psi = (1 + x) / 2`` vanishes on x = -1.
P2 puts the source on the leg y = -1 and the Dirichlet condition on the
leg x = -1.  These are the placements that reproduce the published tables;
the Dirichlet energy is only invariant under the isometries of the triangle,
not under general relabelings.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from math import sqrt

import numpy as np

from . import densela
from .basis import (
    EDGE_LENGTHS,
    EdgeMask,
    TriangleSpace,
    build_space,
    dim_p,
    dubiner_eval,
    edge_trace_matrix,
)
from .quadrature import triangle_rule

MAX_DEGREE = 160


class MemoryGuard(RuntimeError):
    """A requested degree exceeds the dense-memory envelope."""


class Problem(enum.Enum):
    P1 = 1
    P2 = 2
    P3 = 3

    @property
    def mask(self) -> EdgeMask:
        return {1: EdgeMask(True, False, True), 2: EdgeMask(False, True, False),
                3: EdgeMask()}[self.value]

    @property
    def mean_zero(self) -> bool:
        return self is Problem.P3

    def source_dim(self, p: int) -> int:
        if self is Problem.P1:
            return dim_p(p - 1)
        if self is Problem.P2:
            return p + 1
        return 3 * (p + 1) - 1

    @classmethod
    def parse(cls, value) -> "Problem":
        if isinstance(value, Problem):
            return value
        s = str(value).upper().lstrip("CP(").rstrip(")")
        return cls(int(s))


def hat(x, y):
    """The P1 hat: 1 at (1, -1), 0 on the edge x = -1."""
    return 0.5 * (1.0 + np.asarray(x, float))


SOURCE_EDGE = 1  # edge carrying the P2 source


@lru_cache(maxsize=None)
def boundary_source_basis(p: int) -> np.ndarray:
    """Orthonormal basis of the zero-total-integral boundary sources.

    Columns are coefficient vectors over the per-edge normalized Legendre
    polynomials (edge 1 first, ``p + 1`` entries per edge).  Only the three
    constant modes see the constraint; their compatible combinations are
    spanned by the orthogonal complement of the edge-length vector.
    """
    n = 3 * (p + 1)
    c = np.zeros(n)
    for k, e in enumerate((1, 2, 3)):
        c[k * (p + 1)] = EDGE_LENGTHS[e] / sqrt(2.0)
    Q, _ = np.linalg.qr(np.column_stack([c, np.eye(n)]))
    B = Q[:, 1:n]
    B.setflags(write=False)
    return B


def _dubiner_load(problem: Problem, p: int, s: int) -> np.ndarray:
    """Load matrix with Dubiner test functions of degree ``s`` as rows."""
    if problem is Problem.P1:
        # psi * phi has degree p: rows above dim P_p vanish by orthogonality
        k = min(p, s)
        rule = triangle_rule(2 * p)
        x, y = rule.nodes.T
        Vp = dubiner_eval(p, x, y)
        G = (Vp[:, : dim_p(k)] * (rule.weights * hat(x, y))[:, None]).T @ Vp[:, : dim_p(p - 1)]
        return G
    if problem is Problem.P2:
        return edge_trace_matrix(s, SOURCE_EDGE, p) * (EDGE_LENGTHS[SOURCE_EDGE] / 2)
    G = np.concatenate(
        [edge_trace_matrix(s, e, p) * (EDGE_LENGTHS[e] / 2) for e in (1, 2, 3)], axis=1
    )
    return G @ boundary_source_basis(p)


def assemble_load(problem, p: int, space: TriangleSpace) -> np.ndarray:
    """Load vectors of all source basis functions, shape ``(space.dim, nsrc)``."""
    problem = Problem.parse(problem)
    if p < 1:
        raise ValueError("source degree must be at least 1")
    return space.from_dubiner(_dubiner_load(problem, p, space.degree))


@lru_cache(maxsize=2)
def test_space(problem: Problem, s: int) -> TriangleSpace:
    return build_space(s, problem.mask, problem.mean_zero)


def _check_degree(s: int, allow_large: bool):
    if s > MAX_DEGREE and not allow_large:
        raise MemoryGuard(f"degree {s} exceeds the dense limit {MAX_DEGREE}; pass allow_large=True")


@lru_cache(maxsize=128)
def _energy(problem: Problem, p: int, s: int) -> np.ndarray:
    space = test_space(problem, s)
    G = assemble_load(problem, p, space)
    if problem.mean_zero:
        X, _ = densela.solve_kkt(space.K, space.mean_constraint, G, None)
    else:
        X = densela.solve_spd(space.K, G)
    E = G.T @ X
    E = 0.5 * (E + E.T)
    E.setflags(write=False)
    return E


def galerkin_energy(problem, p: int, solve_degree: int, allow_large: bool = False) -> np.ndarray:
    """Energy form ``E`` with ``phi^T E phi = |grad u_s(phi)|^2`` (s = solve_degree)."""
    problem = Problem.parse(problem)
    if solve_degree < 1:
        raise ValueError("solve degree must be at least 1")
    _check_degree(solve_degree, allow_large)
    return _energy(problem, p, solve_degree)


@dataclass
class SaturationReport:
    """Result of one ``(problem, p, q, r)`` cell.

    ``constant`` is the largest ratio of squared energies (the tabulated
    quantity); ``ratio`` is its square root, the ratio of energy norms.
    ``constant`` is ``inf`` when the enriched space cannot see some source.
    """

    problem: Problem
    p: int
    q: int
    r: int
    constant: float
    worst_phi: np.ndarray | None

    @property
    def ratio(self) -> float:
        return sqrt(self.constant)

    @property
    def saturated(self) -> bool:
        return np.isfinite(self.constant)


def saturation_constant(problem, p: int, q: int, r: int, allow_large: bool = False) -> SaturationReport:
    problem = Problem.parse(problem)
    if p < 1 or q < 1 or r < p + q:
        raise ValueError("need p >= 1, q >= 1 and r >= p + q")
    Er = galerkin_energy(problem, p, r, allow_large)
    Ed = galerkin_energy(problem, p, p + q, allow_large)
    if r == p + q:
        return SaturationReport(problem, p, q, r, 1.0, None)
    try:
        lam, v = densela.eig_gsym_max(Er, Ed)
    except densela.NotPD:
        return SaturationReport(problem, p, q, r, float("inf"), None)
    return SaturationReport(problem, p, q, r, lam, v)


@dataclass
class StabilizedConstant:
    coarse: SaturationReport
    fine: SaturationReport

    @property
    def converged(self) -> bool:
        a, b = self.coarse.constant, self.fine.constant
        return abs(b - a) <= 1e-8 * abs(b)


def stabilized_constant(problem, p: int, q: int, r: int, allow_large: bool = False) -> StabilizedConstant:
    """Constants at ``r`` and ``2r``; converged when they agree to 1e-8."""
    return StabilizedConstant(
        saturation_constant(problem, p, q, r, allow_large),
        saturation_constant(problem, p, q, 2 * r, allow_large),
    )


def source_on_edges(problem, p: int, coeffs) -> np.ndarray:
    """Per-edge Legendre coefficients ``(3, p + 1)`` of a P2/P3 source vector."""
    problem = Problem.parse(problem)
    coeffs = np.asarray(coeffs, float)
    out = np.zeros((3, p + 1))
    if problem is Problem.P2:
        out[SOURCE_EDGE - 1] = coeffs
    elif problem is Problem.P3:
        out[:] = (boundary_source_basis(p) @ coeffs).reshape(3, p + 1)
    else:
        raise ValueError("P1 sources live in the interior")
    return out
