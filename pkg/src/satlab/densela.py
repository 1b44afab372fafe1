"""Dense symmetric linear algebra: SPD solves, pencils, KKT systems."""
from __future__ import annotations

import numpy as np
from scipy import linalg


class NotPD(linalg.LinAlgError):
    """Cholesky factorization broke down (matrix not positive definite)."""


class Singular(linalg.LinAlgError):
    """A symmetric indefinite factorization found a singular system."""


def as_sym(A, tol: float = 1e-12) -> np.ndarray:
    """Return ``A`` as a float array after checking its symmetry."""
    A = np.asarray(A, float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    scale = np.abs(A).max() if A.size else 0.0
    if A.size and np.abs(A - A.T).max() > tol * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")
    return A


def cholesky(A) -> np.ndarray:
    """Lower Cholesky factor; raises :class:`NotPD` on a non-positive pivot."""
    try:
        return linalg.cholesky(as_sym(A), lower=True)
    except linalg.LinAlgError as exc:
        raise NotPD(str(exc)) from None


def solve_spd(A, B) -> np.ndarray:
    L = cholesky(A)
    return linalg.cho_solve((L, True), np.asarray(B, float))


def eig_gsym_max(N, D):
    """Largest eigenpair of the pencil ``N v = lam D v`` with ``v^T D v = 1``.

    ``D`` is reduced by Cholesky, so the call fails with :class:`NotPD`
    when the denominator form is degenerate.
    """
    N = as_sym(N, 1e-10)
    L = cholesky(D)
    X = linalg.solve_triangular(L, N, lower=True)
    S = linalg.solve_triangular(L, X.T, lower=True)
    S = 0.5 * (S + S.T)
    lam, Y = linalg.eigh(S, subset_by_index=[S.shape[0] - 1, S.shape[0] - 1])
    v = linalg.solve_triangular(L.T, Y[:, 0], lower=False)
    return float(lam[0]), v


def solve_kkt(A, C, f, g):
    """Solve ``[[A, C], [C^T, 0]] [x; mu] = [f; g]``.

    Uses the Bunch-Kaufman symmetric indefinite factorization.  ``f`` and
    ``g`` may carry several right-hand sides as columns; ``g=None`` means
    homogeneous constraints.
    """
    A = as_sym(A, 1e-10)
    C = np.asarray(C, float)
    if C.ndim == 1:
        C = C[:, None]
    m, k = C.shape
    f = np.asarray(f, float)
    multi = f.ndim == 2
    if g is None:
        g = np.zeros((k, f.shape[1]) if multi else k)
    g = np.asarray(g, float)
    if not multi:
        f = f[:, None]
        g = g.reshape(k, 1)
    elif g.ndim == 1:
        g = np.repeat(g[:, None], f.shape[1], axis=1)
    Kkt = np.zeros((m + k, m + k))
    Kkt[:m, :m] = A
    Kkt[:m, m:] = C
    Kkt[m:, :m] = C.T
    rhs = np.vstack([f, g])
    sol, info = _sysv(Kkt, rhs)
    if info > 0:
        raise Singular(f"KKT matrix is singular (pivot {info})")
    res = Kkt @ sol - rhs
    scale = np.abs(rhs).max() + np.abs(Kkt).max() * np.abs(sol).max()
    if not np.all(np.isfinite(sol)) or np.abs(res).max() > 1e-6 * max(scale, 1e-300):
        raise Singular("KKT solve is numerically singular")
    x, mu = sol[:m], sol[m:]
    if not multi:
        x, mu = x[:, 0], mu[:, 0]
    return x, mu


def _sysv(K, rhs):
    _, _, x, info = linalg.lapack.dsysv(K, rhs, lower=1)
    return x, info
