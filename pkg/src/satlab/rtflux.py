"""Raviart-Thomas fields on the reference triangle and minimal-norm fluxes.

RT_p = (P_p)^2 + x P_p is spanned here by the vector Dubiner fields
``(phi_k, 0)``, ``(0, phi_k)`` (``phi_k`` of degree at most p) and ``x phi_k``
for the ``p + 1`` Dubiner functions of exact degree p.  Normal traces on an
edge are tested against the normalized Legendre polynomials in the edge
parameter ``t`` (moments without the length factor), so prescribing the
first ``p + 1`` moments pins the trace.

The three minimal-norm problems give computable upper bounds for the dual
norms behind the reference-triangle saturation constants.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from . import densela
from .basis import (
    EDGE_LENGTHS,
    EDGE_NORMALS,
    EDGES,
    VERTICES,
    dim_p,
    dubiner_eval,
    legendre_table,
)
from .quadrature import edge_rule, gauss_legendre, points_for_degree, triangle_rule
from .reftri import SOURCE_EDGE, boundary_source_basis, hat

# edge where the P1 flux has zero normal trace (the hat vanishes there)
P1_FREE_EDGE = 2
# edge where the P2 flux has zero normal trace
P2_FREE_EDGE = 3


class Incompatible(ValueError):
    """Boundary data without zero total flux."""


def rt_dim(p: int) -> int:
    return (p + 1) * (p + 3)


def rt_eval(p: int, x, y, div: bool = False):
    """RT_p basis at points: values ``(npts, n, 2)`` and optionally divergences."""
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    V, Vx, Vy = dubiner_eval(p, x, y, grad=True)
    top = slice(dim_p(p - 1) if p > 0 else 0, dim_p(p))
    nb = V.shape[1]
    k = top.stop - top.start
    vals = np.zeros((x.size, 2 * nb + k, 2))
    vals[:, :nb, 0] = V
    vals[:, nb:2 * nb, 1] = V
    vals[:, 2 * nb:, 0] = x[:, None] * V[:, top]
    vals[:, 2 * nb:, 1] = y[:, None] * V[:, top]
    if not div:
        return vals
    d = np.empty((x.size, 2 * nb + k))
    d[:, :nb] = Vx
    d[:, nb:2 * nb] = Vy
    d[:, 2 * nb:] = 2 * V[:, top] + x[:, None] * Vx[:, top] + y[:, None] * Vy[:, top]
    return vals, d


@dataclass(frozen=True)
class RTSpace:
    """Assembled operators of RT_p on the reference triangle."""

    p: int
    mass: np.ndarray  # L2 Gram matrix
    div: np.ndarray  # rows: int r_k div tau_j, r_k Dubiner of degree <= p
    normal: dict  # edge -> rows: int l_m(t) tau_j . n dt, m <= p
    interior: np.ndarray  # rows: int q . tau_j, q in (P_{p-1})^2

    @property
    def dim(self) -> int:
        return self.mass.shape[0]

    def dof_matrix(self) -> np.ndarray:
        return np.vstack([self.normal[e] for e in (1, 2, 3)] + [self.interior])

    def unisolvence_condition(self) -> float:
        """Condition number of the edge/interior moment matrix (inf if singular)."""
        return float(np.linalg.cond(self.dof_matrix()))


@lru_cache(maxsize=16)
def rt_space(p: int) -> RTSpace:
    if p < 0:
        raise ValueError("degree must be non-negative")
    rule = triangle_rule(2 * p + 2)
    x, y = rule.nodes.T
    vals, d = rt_eval(p, x, y, div=True)
    w = rule.weights
    mass = sum((vals[:, :, c] * w[:, None]).T @ vals[:, :, c] for c in (0, 1))
    Vp = dubiner_eval(p, x, y)
    div = (Vp * w[:, None]).T @ d
    if p >= 1:
        Vq = dubiner_eval(p - 1, x, y)
        interior = np.vstack([(Vq * w[:, None]).T @ vals[:, :, c] for c in (0, 1)])
    else:
        interior = np.zeros((0, vals.shape[1]))
    normal = {}
    for e in (1, 2, 3):
        t, pts, _ = edge_rule(2 * p + 1, *(VERTICES[k] for k in EDGES[e]))
        wt = gauss_legendre(points_for_degree(2 * p + 1)).weights
        ve = rt_eval(p, pts[:, 0], pts[:, 1])
        nn = ve @ np.asarray(EDGE_NORMALS[e])
        normal[e] = (legendre_table(p, t) * wt) @ nn
    for arr in (mass, div, interior, *normal.values()):
        arr.setflags(write=False)
    return RTSpace(p, mass, div, normal, interior)


@dataclass
class FluxResult:
    norm: float
    sigma: np.ndarray  # coefficients over the RT_p basis, or over curl(P_{p+1}/R)
    residual: float  # L2 norm of the divergence or trace mismatch

    def __iter__(self):
        # allows ``norm, sigma = min_flux_p1(...)``
        yield self.norm
        yield self.sigma


def _min_norm(M, B, g):
    """Minimize x^T M x subject to B x = g."""
    if not np.any(g):
        return np.zeros(M.shape[0])
    x, _ = densela.solve_kkt(M, B.T, np.zeros(M.shape[0]), g)
    return x


def _hat_source_moments(p: int, phi) -> np.ndarray:
    """``int r_k psi phi`` for Dubiner ``r_k`` of degree <= p."""
    rule = triangle_rule(2 * p)
    x, y = rule.nodes.T
    Vp = dubiner_eval(p, x, y)
    f = Vp[:, : dim_p(p - 1)] @ phi * hat(x, y)
    return Vp.T @ (rule.weights * f)


def _divergence_residual(space: RTSpace, sigma, target) -> float:
    # div sigma lies in P_p, so with orthonormal r_k the moment error is the L2 error
    return float(np.linalg.norm(space.div @ sigma - target))


def min_flux_p1(p: int, phi) -> FluxResult:
    """Smallest RT_p field with ``div = psi phi`` and zero flux through the free edge.

    ``phi`` holds Dubiner coefficients of degree ``p - 1``.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    phi = np.asarray(phi, float)
    if phi.shape != (dim_p(p - 1),):
        raise ValueError(f"expected {dim_p(p - 1)} coefficients")
    S = rt_space(p)
    target = _hat_source_moments(p, phi)
    B = np.vstack([S.div, S.normal[P1_FREE_EDGE]])
    g = np.concatenate([target, np.zeros(p + 1)])
    sigma = _min_norm(S.mass, B, g)
    res = _divergence_residual(S, sigma, target) + float(np.linalg.norm(S.normal[P1_FREE_EDGE] @ sigma))
    return FluxResult(float(np.sqrt(max(sigma @ S.mass @ sigma, 0.0))), sigma, res)


def min_flux_p2(p: int, phi) -> FluxResult:
    """Smallest divergence-free RT_p field with normal trace ``phi`` on the source edge
    and zero normal trace on the free edge.

    ``phi`` holds normalized Legendre coefficients (length ``p + 1``).
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    phi = np.asarray(phi, float)
    if phi.shape != (p + 1,):
        raise ValueError(f"expected {p + 1} coefficients")
    S = rt_space(p)
    B = np.vstack([S.div, S.normal[SOURCE_EDGE], S.normal[P2_FREE_EDGE]])
    g = np.concatenate([np.zeros(dim_p(p)), phi, np.zeros(p + 1)])
    sigma = _min_norm(S.mass, B, g)
    res = float(np.linalg.norm(B @ sigma - g))
    return FluxResult(float(np.sqrt(max(sigma @ S.mass @ sigma, 0.0))), sigma, res)


@dataclass(frozen=True)
class CurlSpace:
    """curl(P_{p+1} / R) spanned by the curls of the non-constant Dubiner functions."""

    p: int
    mass: np.ndarray
    normal: np.ndarray  # stacked edge moments, (3(p+1), n)
    div_norm: float  # largest L2 norm of a divergence over the basis
    rt_coords: np.ndarray  # coefficients over the RT_p basis

    @property
    def dim(self) -> int:
        return self.mass.shape[0]


def _curl_vals(p, x, y):
    _, Vx, Vy = dubiner_eval(p + 1, x, y, grad=True)
    return np.stack([Vy[:, 1:], -Vx[:, 1:]], axis=-1)


@lru_cache(maxsize=16)
def curl_space(p: int) -> CurlSpace:
    rule = triangle_rule(2 * p + 2)
    x, y = rule.nodes.T
    vals = _curl_vals(p, x, y)
    w = rule.weights
    mass = sum((vals[:, :, c] * w[:, None]).T @ vals[:, :, c] for c in (0, 1))
    # divergence via central differences would be inexact; the curl of a
    # polynomial is divergence free analytically, so measure it through RT
    rt_vals, rt_div = rt_eval(p, x, y, div=True)
    A = np.concatenate([rt_vals[:, :, 0], rt_vals[:, :, 1]])
    b = np.concatenate([vals[:, :, 0], vals[:, :, 1]])
    coords, *_ = linalg.lstsq(A, b)
    fit = float(np.abs(A @ coords - b).max())
    div = rt_div @ coords
    div_norm = float(np.sqrt((div * div * w[:, None]).sum(axis=0)).max())
    rows = []
    for e in (1, 2, 3):
        t, pts, _ = edge_rule(2 * p + 1, *(VERTICES[k] for k in EDGES[e]))
        wt = gauss_legendre(points_for_degree(2 * p + 1)).weights
        nn = _curl_vals(p, pts[:, 0], pts[:, 1]) @ np.asarray(EDGE_NORMALS[e])
        rows.append((legendre_table(p, t) * wt) @ nn)
    if fit > 1e-9 * max(1.0, float(np.abs(b).max())):
        raise RuntimeError("curl field not contained in RT_p")
    return CurlSpace(p, mass, np.vstack(rows), div_norm, coords)


def compatibility_defect(phi) -> float:
    """``int over the boundary of phi`` for per-edge Legendre coefficients ``(3, p+1)``."""
    phi = np.asarray(phi, float)
    return float(sum(EDGE_LENGTHS[e] / np.sqrt(2.0) * phi[e - 1, 0] for e in (1, 2, 3)))


def min_flux_p3(p: int, phi, tol: float = 1e-12) -> FluxResult:
    """Smallest divergence-free RT_p field with normal trace ``phi`` on the boundary.

    ``phi`` is a ``(3, p + 1)`` array of per-edge Legendre coefficients with
    zero total flux.  Coefficients of the result refer to :func:`curl_space`.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    phi = np.asarray(phi, float)
    if phi.shape != (3, p + 1):
        raise ValueError(f"expected shape (3, {p + 1})")
    scale = max(1.0, float(np.abs(phi).max()))
    if abs(compatibility_defect(phi)) > tol * scale:
        raise Incompatible("boundary data must have zero total flux")
    C = curl_space(p)
    # the boundary moments of any curl have zero total flux, so one multiplier
    # direction is redundant; restrict multipliers to its orthogonal complement
    Q = boundary_source_basis(p)
    g_full = phi.ravel()
    B = Q.T @ C.normal
    sigma = _min_norm(C.mass, B, Q.T @ g_full)
    res = float(np.linalg.norm(C.normal @ sigma - g_full))
    return FluxResult(float(np.sqrt(max(sigma @ C.mass @ sigma, 0.0))), sigma, res)
