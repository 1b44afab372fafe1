"""One-dimensional saturation quantities on (-1, 1).

Star indicator: for ``phi`` in P_{p-1} let ``u`` solve ``-u'' = (1 - x) phi``
with ``u(-1) = 0`` and ``u'(1) = 0``.  Then ``u'`` lies in P_{p+1} and

    rho_p = sup_phi |<u', l_{p+1}>| / |u'|

measures how much of ``u'`` escapes the degree-(p+1) Galerkin space.  The
fast path below evaluates ``rho_p**2`` in O(p) through the kernel vector
of the map ``c -> d`` taking Legendre-derivative coefficients of ``phi`` to
those of ``(1 - x) phi``, and a rank-one Sherman-Morrison solve.

Element indicator: a residual with polynomial datum of degree ``p - 1`` on
an element has its Dirichlet lift in P_{p+1}, so raising the degree by one
captures its full dual norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as L
from scipy import linalg, optimize

from . import densela
from .basis import legendre_normalized
from .quadrature import gauss_legendre

DENSE_LIMIT = 2000


def alpha(i):
    i = np.asarray(i, dtype=np.longdouble)
    return i * np.sqrt(2 * i + 1) / ((2 * i + 1) * np.sqrt(2 * i + 3))


def beta(i):
    i = np.asarray(i, dtype=np.longdouble)
    return (i + 1) * np.sqrt(2 * i + 1) / ((2 * i + 1) * np.sqrt(2 * i - 1))


def kernel_vector(p: int, recursion: str = "kernel") -> np.ndarray:
    """``v`` with ``v_1 = 1``; length ``p + 1``.

    ``recursion="kernel"`` (default) runs ``v_{i+1} = (v_i - beta_i v_{i-1}) / alpha_i``,
    which is what ``v^T T = 0`` column by column demands.  ``"printed"`` uses
    ``beta_{i-1}`` in place of ``beta_i``; that variant does not span ker T^T
    but is kept because it reproduces a frequently quoted table of values.
    Both run in extended precision.
    """
    if recursion not in ("kernel", "printed"):
        raise ValueError(f"unknown recursion {recursion!r}")
    shift = 1 if recursion == "printed" else 0
    if p < 1:
        raise ValueError("p must be at least 1")
    a = alpha(np.arange(1, p + 1))
    b = beta(np.arange(1, p + 1))
    v = np.empty(p + 1, dtype=np.longdouble)
    v[0] = 1
    v[1] = 1 / a[0]
    for i in range(2, p + 1):
        # 0-based: v[i] = (v[i-1] - beta_{i-shift} v[i-2]) / alpha_i
        v[i] = (v[i - 1] - b[i - 1 - shift] * v[i - 2]) / a[i - 1]
    if not np.all(np.isfinite(v)):
        raise OverflowError("kernel recurrence overflowed")
    return v


def coefficient_map(p: int) -> np.ndarray:
    """The (p+1) x p matrix T with d = T c.

    ``c`` are the coefficients of ``phi`` over ``l'_1..l'_p`` and ``d`` those
    of ``(1 - x) phi`` over ``l'_1..l'_{p+1}``.
    """
    a = np.asarray(alpha(np.arange(0, p + 2)), float)
    b = np.asarray(beta(np.arange(1, p + 2)), float)
    T = np.zeros((p + 1, p))
    for j in range(1, p + 1):
        # (1 - x) l'_j = l'_j - alpha_j l'_{j+1} - beta_j l'_{j-1}
        T[j - 1, j - 1] += 1.0
        T[j, j - 1] -= a[j]
        if j >= 2:
            T[j - 2, j - 1] -= b[j - 1]
    return T


@dataclass
class RhoInstance:
    p: int
    v: np.ndarray
    e: np.ndarray
    lam: float
    value: float

    @property
    def w(self):
        return self.v[:-1]

    @property
    def g(self):
        return np.sqrt(2.0 * np.arange(1, self.p + 1) + 1.0)

    @property
    def d(self) -> np.ndarray:
        """Extremal coefficient vector, ``d_{p+1} = 1``."""
        return np.append(self.e, 1.0)


def rho_instance(p: int, recursion: str = "kernel") -> RhoInstance:
    v = kernel_vector(p, recursion)
    w = v[:-1]
    g = np.sqrt(2 * np.arange(1, p + 1, dtype=np.longdouble) + 1)
    s = np.sqrt(np.longdouble(2 * p + 3))
    gg = 1 + np.sum(g * g)

    def ainv(x):
        # (I + g g^T)^{-1} x
        return x - g * (np.sum(g * x) / gg)

    Aw = ainv(w)
    Ag = ainv(g)
    lam = (v[p] - s * np.sum(w * Ag)) / np.sum(w * Aw)
    e = -(s * Ag + lam * Aw)
    quad = np.sum(e * e) + np.sum(g * e) ** 2
    denom = 2 * p + 4 + quad + 2 * s * np.sum(g * e)
    return RhoInstance(p, np.asarray(v, float), np.asarray(e, float), float(lam), float(1 / denom))


def rho_squared(p: int, recursion: str = "kernel") -> float:
    """rho_p**2 by the O(p) fast path.

    With the default recursion this equals ``(p(p+1) / ((p+2)(p+3)))**2``
    to rounding; see :func:`kernel_vector` for the ``"printed"`` variant.
    """
    return rho_instance(p, recursion).value


def rho_squared_dense(p: int) -> float:
    """rho_p**2 from the dense saddle-point system; ``v`` from a null space."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if p > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to p <= {DENSE_LIMIT}")
    T = coefficient_map(p)
    v = linalg.null_space(T.T)[:, 0]
    v = v / v[0]
    g = np.sqrt(2.0 * np.arange(1, p + 1) + 1.0)
    A = np.eye(p) + np.outer(g, g)
    s = math.sqrt(2 * p + 3)
    e, _ = densela.solve_kkt(A, v[:p], -s * g, np.array([-v[p]]))
    return 1.0 / (2 * p + 4 + e @ A @ e + 2 * s * g @ e)


def _derivative_coeffs(p: int, c) -> np.ndarray:
    """Legendre-series coefficients of ``sum_i c_i l'_i`` (length p)."""
    series = np.zeros(p + 1)
    for i, ci in enumerate(c, start=1):
        series[i] = ci * math.sqrt((2 * i + 1) / 2)
    return L.legder(series)


def _quotient_frame(p: int):
    """Quadrature rule, values of ``u'`` per Legendre mode of ``phi``, and ``l_{p+1}``."""
    rule = gauss_legendre(p + 4)
    cols = []
    for k in range(p):
        phi = np.zeros(k + 1)
        phi[k] = 1.0
        prod = L.legmul(L.legsub([1.0], [0.0, 1.0]), phi)
        cols.append(-L.legval(rule.nodes, L.legint(prod, lbnd=1.0)))  # int_x^1
    return rule, np.column_stack(cols), legendre_normalized(p + 1, rule.nodes)


def raw_quotient(p: int, phi_series) -> float:
    """|<u', l_{p+1}>| / |u'| with ``u'(x) = int_x^1 (1 - z) phi(z) dz``.

    ``phi_series`` are coefficients over the standard Legendre polynomials.
    Uses only polynomial arithmetic and Gauss quadrature.
    """
    return float(_quotients(_quotient_frame(p), np.atleast_2d(phi_series))[0])


def _quotients(frame, C):
    rule, U, lp = frame
    vals = C @ U.T
    top = np.abs(vals @ (rule.weights * lp))
    nrm = np.sqrt((vals * vals) @ rule.weights)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(nrm > 0, top / nrm, 0.0)


def rho_by_sampling(p: int, n_samples: int = 100_000, seed: int = 0, polish: bool = True) -> float:
    """Lower bound on rho_p by random search over phi, optionally polished."""
    if p > 30:
        raise ValueError("sampling oracle limited to p <= 30")
    rng = np.random.default_rng(seed)
    frame = _quotient_frame(p)
    best, best_c = -1.0, None
    for start in range(0, n_samples, 20_000):
        C = rng.standard_normal((min(20_000, n_samples - start), p))
        q = _quotients(frame, C)
        k = int(np.argmax(q))
        if q[k] > best:
            best, best_c = float(q[k]), C[k]
    if polish:
        res = optimize.minimize(lambda c: -_quotients(frame, c[None, :])[0], best_c,
                                method="BFGS", options={"gtol": 1e-13, "maxiter": 5000})
        best = max(best, float(-res.fun))
    return best


def phi_from_d(p: int, d) -> np.ndarray:
    """Legendre series of ``phi`` whose ``(1 - x) phi`` has coefficients ``d``."""
    T = coefficient_map(p)
    c, *_ = np.linalg.lstsq(T, np.asarray(d, float), rcond=None)
    return _derivative_coeffs(p, c)


def ell_prime_table(n: int, x) -> np.ndarray:
    """Values of ``l'_1..l'_n`` at ``x``, shape ``(len(x), n)``."""
    x = np.asarray(x, float)
    out = np.empty((x.size, n))
    for i in range(1, n + 1):
        s = np.zeros(i + 1)
        s[i] = math.sqrt((2 * i + 1) / 2)
        out[:, i - 1] = L.legval(x, L.legder(s))
    return out


def _bubble_stiffness_load(n: int, g_series, rule):
    """Galerkin system in H^1_0 ∩ P_n with bubbles (1 - x^2) x^k."""
    x = rule.nodes
    k = np.arange(n - 1)
    B = (1 - x * x)[:, None] * x[:, None] ** k
    dB = -2 * x[:, None] * x[:, None] ** k
    dB[:, 1:] += (1 - x * x)[:, None] * k[1:] * x[:, None] ** (k[1:] - 1)
    K = (dB * rule.weights[:, None]).T @ dB
    b = (B * rule.weights[:, None]).T @ L.legval(x, g_series)
    return K, b


def dirichlet_energy(n: int, g_series) -> float:
    """|w_n'|^2 for the Galerkin lift of ``v -> int g v`` in H^1_0(-1,1) ∩ P_n.

    Uses an orthonormalized monomial-bubble basis, independent of Legendre
    orthogonality.
    """
    if n < 2:
        return 0.0
    rule = gauss_legendre(n + len(g_series) + 2)
    K, b = _bubble_stiffness_load(n, g_series, rule)
    # the monomial basis is ill-conditioned; scaling keeps moderate n usable
    s = 1 / np.sqrt(np.diag(K))
    y = linalg.solve(K * np.outer(s, s), b * s, assume_a="pos")
    return float((b * s) @ y)


def exact_dirichlet_energy(g_series) -> float:
    """|w'|^2 for ``-w'' = g``, ``w(-1) = w(1) = 0``, by exact integration."""
    g = np.asarray(g_series, float)
    w1 = -L.legint(g, lbnd=-1.0)  # w' up to a constant
    w = L.legint(w1, lbnd=-1.0)
    # w'(x) = w1(x) + c with c fixed by w(1) = 0
    c = -L.legval(1.0, w) / 2.0
    wp = L.legadd(w1, [c])
    sq = L.legint(L.legmul(wp, wp), lbnd=-1.0)
    return float(L.legval(1.0, sq))


def element_saturation_ratio(p: int, f) -> float:
    """Dual norm of ``v -> int f v`` over H^1_0(-1,1) divided by that over P_{p+1}.

    ``f`` is a Legendre series of degree at most ``p - 1``.
    """
    f = np.trim_zeros(np.asarray(f, float), "b")
    if f.size > p:
        raise ValueError("f must have degree at most p - 1")
    if f.size == 0 or not np.any(f):
        return 1.0
    num = exact_dirichlet_energy(f)
    den = dirichlet_energy(p + 1, f)
    return math.sqrt(num / den)


def point_functional_ratio(p: int, q: int = 0) -> float:
    """Dual-norm ratio of ``v -> v(1)`` on H^1_{0,{-1}} against its P_{p+q} part."""
    n = p + q
    rule = gauss_legendre(n + 2)
    x = rule.nodes
    k = np.arange(1, n + 1)
    dB = k * (1 + x[:, None]) ** (k - 1)  # basis (1 + x)^k
    K = (dB * rule.weights[:, None]).T @ dB
    b = 2.0 ** k
    den = float(b @ linalg.solve(K, b, assume_a="pos"))
    num = 2.0  # u = x + 1
    return math.sqrt(num / den)


def star_energy(p: int, n: int) -> np.ndarray:
    """Energy form over ``c`` (phi = sum c_i l'_i) of the lift in H^1_{0,{-1}} ∩ P_n.

    Basis ``b_k = int_{-1}^x l_k`` (k < n) has identity stiffness.
    """
    rule = gauss_legendre(n + p + 2)
    x = rule.nodes
    phi = ell_prime_table(p, x) * (1 - x)[:, None]
    ints = []
    for k in range(n):
        s = np.zeros(k + 1)
        s[k] = math.sqrt((2 * k + 1) / 2)
        ints.append(L.legval(x, L.legint(s, lbnd=-1.0)))
    Bk = np.column_stack(ints)
    G = (Bk * rule.weights[:, None]).T @ phi
    return G.T @ G


def star_constant(p: int, q: int) -> float:
    """Worst ratio of squared energies, exact lift over the P_{p+q} lift."""
    lam, _ = densela.eig_gsym_max(star_energy(p, p + 2), star_energy(p, p + q))
    return lam
