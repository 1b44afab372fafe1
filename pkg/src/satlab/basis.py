"""Orthonormal polynomial bases on [-1, 1] and on the reference triangle.

The triangle basis is the orthonormal Koornwinder-Dubiner family

    phi_ij(x, y) = sqrt(2) P_i(a) (1 - b)**i P_j^(2i+1, 0)(b)

written in collapsed coordinates ``a = 2(1 + x)/(1 - y) - 1``, ``b = y``,
with ``P`` the L2-normalized Jacobi polynomials.  Functions are ordered by
total degree ``n = i + j`` so that the first ``dim P_r`` of them span
``P_r`` and every truncation is hierarchical.

Edge conventions on the reference triangle (vertices A=(-1,-1), B=(1,-1),
C=(-1,1)):

    edge 1: y = -1      A -> B
    edge 2: x = -1      A -> C
    edge 3: x + y = 0   B -> C   (hypotenuse)

Spaces with homogeneous Dirichlet conditions on a subset of edges are
obtained from the full orthonormal basis by an orthogonal change of basis
that splits off the trace directions, so every constrained space keeps an
L2-orthonormal basis and stiffness matrices stay well conditioned.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import lgamma, sqrt
from typing import NamedTuple

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .quadrature import QuadRule, collapse, edge_rule, gauss_legendre, points_for_degree

VERTICES = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
EDGES = {1: (0, 1), 2: (0, 2), 3: (1, 2)}
EDGE_NORMALS = {
    1: np.array([0.0, -1.0]),
    2: np.array([-1.0, 0.0]),
    3: np.array([1.0, 1.0]) / sqrt(2.0),
}
EDGE_LENGTHS = {1: 2.0, 2: 2.0, 3: 2.0 * sqrt(2.0)}


# ---------------------------------------------------------------- 1D families

def jacobi_normalized(n: int, alpha: float, beta: float, x, scale=None):
    """Rows ``0..n`` of L2((1-x)^alpha (1+x)^beta)-orthonormal Jacobi polynomials.

    ``scale`` multiplies every row; passing e.g. ``(1 - b)**k`` here keeps
    the product representable where the polynomial alone would overflow.
    """
    x = np.asarray(x, float)
    out = np.empty((n + 1,) + x.shape)
    ab = alpha + beta
    log_g0 = (-(ab + 1) * np.log(2.0) + lgamma(ab + 2) - lgamma(alpha + 1) - lgamma(beta + 1))
    p0 = np.exp(0.5 * log_g0) * (np.ones_like(x) if scale is None else np.asarray(scale, float))
    out[0] = p0
    if n == 0:
        return out
    out[1] = p0 * ((ab + 2) * x / 2 + (alpha - beta) / 2) * sqrt((ab + 3) / ((alpha + 1) * (beta + 1)))
    a_old = 2 / (2 + ab) * sqrt((alpha + 1) * (beta + 1) / (ab + 3))
    for i in range(1, n):
        h1 = 2 * i + ab
        a_new = 2 / (h1 + 2) * sqrt(
            (i + 1) * (i + 1 + ab) * (i + 1 + alpha) * (i + 1 + beta) / ((h1 + 1) * (h1 + 3))
        )
        b_new = -(alpha * alpha - beta * beta) / (h1 * (h1 + 2)) if h1 > 0 else 0.0
        out[i + 1] = (-a_old * out[i - 1] + (x - b_new) * out[i]) / a_new
        a_old = a_new
    return out


def jacobi_normalized_deriv(n: int, alpha: float, beta: float, x, scale=None):
    """Derivatives of the rows returned by :func:`jacobi_normalized`."""
    x = np.asarray(x, float)
    out = np.zeros((n + 1,) + x.shape)
    if n >= 1:
        inner = jacobi_normalized(n - 1, alpha + 1, beta + 1, x, scale)
        k = np.arange(1, n + 1)
        fac = np.sqrt(k * (k + alpha + beta + 1.0))
        out[1:] = fac.reshape((-1,) + (1,) * x.ndim) * inner
    return out


def legendre_normalized(n: int, x):
    """The L2(-1, 1)-normalized Legendre polynomial of degree ``n``."""
    return jacobi_normalized(n, 0.0, 0.0, x)[n]


def legendre_table(n: int, x):
    return jacobi_normalized(n, 0.0, 0.0, x)


def legendre_deriv_table(n: int, x):
    return jacobi_normalized_deriv(n, 0.0, 0.0, x)


# ---------------------------------------------------------- Dubiner on Ť

def dim_p(r: int) -> int:
    """Dimension of P_r in two variables."""
    return (r + 1) * (r + 2) // 2 if r >= 0 else 0


@lru_cache(maxsize=None)
def dubiner_index(r: int):
    """Index arrays ``(i, j)`` of the degree-r basis, ordered by total degree."""
    ii, jj = [], []
    for n in range(r + 1):
        for i in range(n + 1):
            ii.append(i)
            jj.append(n - i)
    ii = np.array(ii)
    jj = np.array(jj)
    ii.setflags(write=False)
    jj.setflags(write=False)
    return ii, jj


def _radial_tables(r: int, b):
    """For each ``i``: ``(1-b)^i Q^i_j(b)`` and its b-derivative, j = 0..r-i."""
    t = 1.0 - b
    vals, ders = [], []
    for i in range(r + 1):
        m = r - i
        scaled = jacobi_normalized(m, 2 * i + 1.0, 0.0, b, t ** i)
        # d/db [t^i Q] = -i t^(i-1) Q + t^i Q'
        dq = jacobi_normalized_deriv(m, 2 * i + 1.0, 0.0, b, t ** i)
        if i > 0:
            lower = jacobi_normalized(m, 2 * i + 1.0, 0.0, b, t ** (i - 1))
            dq = dq - i * lower
        vals.append(scaled)
        ders.append(dq)
    return vals, ders


def dubiner_eval(r: int, x, y, grad: bool = False):
    """Evaluate the degree-r Dubiner basis at points.

    Returns an array ``(npts, dim_p(r))``; with ``grad=True`` also the x- and
    y-derivatives.  Gradients are not evaluated at the top vertex (-1, 1).
    """
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    a, b = collapse(x, y)
    t = 1.0 - b
    P = legendre_table(r, a)
    dP = legendre_deriv_table(r, a) if grad else None
    N = dim_p(r)
    V = np.empty((x.size, N))
    if grad:
        Vx = np.empty_like(V)
        Vy = np.empty_like(V)
    vals, ders = _radial_tables(r, b)
    if grad:
        with np.errstate(divide="ignore", invalid="ignore"):
            lower = [jacobi_normalized(r - i, 2 * i + 1.0, 0.0, b, t ** (i - 1)) if i > 0 else None
                     for i in range(r + 1)]
    ii, jj = dubiner_index(r)
    s2 = sqrt(2.0)
    for col, (i, j) in enumerate(zip(ii, jj)):
        V[:, col] = s2 * P[i] * vals[i][j]
        if grad:
            if i > 0:
                Vx[:, col] = 2 * s2 * dP[i] * lower[i][j]
                Vy[:, col] = s2 * ((1 + a) * dP[i] * lower[i][j] + P[i] * ders[i][j])
            else:
                Vx[:, col] = 0.0
                Vy[:, col] = s2 * P[0] * ders[0][j]
    if grad:
        return V, Vx, Vy
    return V


_STIFFNESS_CACHE: dict = {}


def dubiner_stiffness(r: int) -> np.ndarray:
    """Stiffness matrix of the degree-r Dubiner basis on the reference triangle.

    Assembled by sum factorization over the collapsed coordinates: every
    entry is a sum of products of one-dimensional integrals, each computed
    with a Gauss-Legendre rule exact for its polynomial integrand.
    """
    for cached_r, K in _STIFFNESS_CACHE.items():
        if cached_r >= r:
            n = dim_p(r)
            return K[:n, :n]
    K = _assemble_stiffness(r)
    K.setflags(write=False)
    _STIFFNESS_CACHE.clear()
    _STIFFNESS_CACHE[r] = K
    return K


def _assemble_stiffness(r: int) -> np.ndarray:
    qa = gauss_legendre(r + 2)
    a, wa = qa.nodes, qa.weights
    P = legendre_table(r, a)
    dP = legendre_deriv_table(r, a)
    # a-direction integrals, indexed [k, i]
    A_dd = (dP * wa) @ dP.T
    A_dd2 = (dP * wa * (1 + a) ** 2) @ dP.T
    A_d0 = (dP * wa * (1 + a)) @ P.T          # (1+a) P_k' P_i
    A_00 = (P * wa) @ P.T

    b, wb = qa.nodes, qa.weights
    t = 1.0 - b
    vals, ders = _radial_tables(r, b)
    ii, jj = dubiner_index(r)
    N = dim_p(r)
    order = np.argsort(ii, kind="stable")     # group columns by i
    starts = np.concatenate([[0], np.cumsum([r - i + 1 for i in range(r + 1)])])
    T = np.concatenate([vals[i].T for i in range(r + 1)], axis=1)   # (nb, N) grouped
    D = np.concatenate([ders[i].T for i in range(r + 1)], axis=1)
    kk = np.repeat(np.arange(r + 1), [r - i + 1 for i in range(r + 1)])

    Kg = np.empty((N, N))
    Tw_inv = T * (wb / t)[:, None]
    Tw = T * wb[:, None]
    Dw_t = D * (wb * t)[:, None]
    for i in range(r + 1):
        sl = slice(starts[i], starts[i + 1])
        B0 = Tw_inv.T @ T[:, sl]        # t^(k+i-1) Q Q
        B1 = Tw.T @ D[:, sl]            # t^k Q_k (t^i Q_i)'
        B2 = (D * wb[:, None]).T @ T[:, sl]   # (t^k Q_k)' t^i Q_i
        B3 = Dw_t.T @ D[:, sl]          # t (.)'(.)'
        Kg[:, sl] = (
            (4.0 * A_dd[kk, i] + A_dd2[kk, i])[:, None] * B0
            + A_d0[kk, i][:, None] * B1
            + A_d0[i, kk][:, None] * B2
            + A_00[kk, i][:, None] * B3
        )
    # back to total-degree ordering
    pos = np.empty(N, dtype=int)
    pos[order] = np.arange(N)
    K = Kg[np.ix_(pos, pos)]
    return 0.5 * (K + K.T)


# ------------------------------------------------------------ spaces on Ť

class EdgeMask(NamedTuple):
    """Homogeneous Dirichlet flags for edges 1, 2, 3."""

    e1: bool = False
    e2: bool = False
    e3: bool = False

    @property
    def edges(self):
        return [k for k, flag in zip((1, 2, 3), self) if flag]


def edge_trace_matrix(r: int, edge: int, degree: int | None = None) -> np.ndarray:
    """Moments ``int_{-1}^{1} l_m(t) phi_n(x(t)) dt`` of Dubiner traces.

    Shape ``(dim_p(r), degree + 1)``; ``degree`` defaults to ``r``.
    """
    degree = r if degree is None else degree
    v0, v1 = (VERTICES[k] for k in EDGES[edge])
    t, pts, _ = edge_rule(r + degree, v0, v1)
    w = gauss_legendre(points_for_degree(r + degree)).weights
    V = dubiner_eval(r, pts[:, 0], pts[:, 1])
    L = legendre_table(degree, t)
    return V.T @ (L * w).T


def _ormqr(side, trans, qr, tau, c):
    _, work, _ = lapack.dormqr(side, trans, qr, tau, c, lwork=-1)
    lwork = int(work[0])
    cq, work, info = lapack.dormqr(side, trans, qr, tau, c, lwork=max(lwork, 1), overwrite_c=1)
    if info != 0:
        raise RuntimeError(f"dormqr failed with info={info}")
    return cq


@dataclass
class TriangleSpace:
    """``{v in P_r(Ť): v = 0 on masked edges}`` with an L2-orthonormal basis.

    The basis is ``Q[:, rank:]`` of the Dubiner basis, where ``Q`` is the
    Householder factor of the orthonormalized trace constraints.  ``K`` is the
    stiffness matrix in this basis and ``M`` the (identity) mass matrix.
    With ``mean_zero`` the space is the full ``P_r`` and ``mean_constraint``
    holds ``c_i = int b_i``; the constraint itself is left to the solver.
    """

    degree: int
    mask: EdgeMask
    mean_zero: bool
    dim: int
    K: np.ndarray
    mean_constraint: np.ndarray | None = None
    _qr: np.ndarray | None = field(default=None, repr=False)
    _tau: np.ndarray | None = field(default=None, repr=False)
    _rank: int = 0

    @property
    def M(self):
        return np.eye(self.dim)

    @property
    def full_dim(self):
        return dim_p(self.degree)

    def from_dubiner(self, A: np.ndarray) -> np.ndarray:
        """Restrict row-indexed Dubiner data (e.g. load vectors) to the space.

        ``A`` has ``dim_p(k)`` rows for some ``k <= degree``; missing rows are
        zero (higher modes do not see the data).
        """
        A = np.asarray(A, float)
        squeeze = A.ndim == 1
        if squeeze:
            A = A[:, None]
        full = np.zeros((self.full_dim, A.shape[1]))
        full[: A.shape[0]] = A
        if self._qr is not None:
            full = _ormqr("L", "T", self._qr, self._tau, full)[self._rank:]
        return full[:, 0] if squeeze else full

    def to_dubiner(self, coeffs: np.ndarray) -> np.ndarray:
        """Dubiner coefficients of functions given in the space basis."""
        coeffs = np.asarray(coeffs, float)
        squeeze = coeffs.ndim == 1
        if squeeze:
            coeffs = coeffs[:, None]
        if self._qr is None:
            full = coeffs.copy()
        else:
            full = np.zeros((self.full_dim, coeffs.shape[1]))
            full[self._rank:] = coeffs
            full = _ormqr("L", "N", self._qr, self._tau, full)
        return full[:, 0] if squeeze else full

    def eval(self, x, y, grad: bool = False):
        """Basis values (and gradients) at points, shape ``(npts, dim)``."""
        out = dubiner_eval(self.degree, x, y, grad=grad)
        if not grad:
            out = (out,)
        res = []
        for V in out:
            if self._qr is not None:
                V = _ormqr("R", "N", self._qr, self._tau, np.array(V, order="F"))[:, self._rank:]
            res.append(V)
        return tuple(res) if grad else res[0]

    def tables(self, rule: QuadRule):
        """Values and gradients at the nodes of a triangle rule."""
        return self.eval(rule.nodes[:, 0], rule.nodes[:, 1], grad=True)


def build_space(r: int, mask: EdgeMask = EdgeMask(), mean_zero: bool = False) -> TriangleSpace:
    if r < 1:
        raise ValueError("degree must be at least 1")
    mask = EdgeMask(*mask)
    if mean_zero and any(mask):
        raise ValueError("the mean-zero space carries no Dirichlet edges")
    K = np.array(dubiner_stiffness(r))
    N = dim_p(r)
    if not any(mask):
        c = None
        if mean_zero:
            c = np.zeros(N)
            c[0] = sqrt(2.0)          # int phi_0 = area / sqrt(area)
        return TriangleSpace(r, mask, mean_zero, N, K, mean_constraint=c)
    C = np.concatenate([edge_trace_matrix(r, e) for e in mask.edges], axis=1)
    U, s, _ = linalg.svd(C, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    if rank >= N:
        raise ValueError(f"no nonzero polynomial of degree {r} vanishes on edges {mask.edges}")
    qr, tau = linalg.qr(U[:, :rank], mode="raw")[0]
    qr = np.asfortranarray(qr)
    Kq = _ormqr("L", "T", qr, tau, np.asfortranarray(K))
    Kq = _ormqr("R", "N", qr, tau, Kq)
    Ks = np.array(Kq[rank:, rank:])
    del Kq
    Ks = 0.5 * (Ks + Ks.T)
    return TriangleSpace(r, mask, False, N - rank, Ks, None, qr, tau, rank)
