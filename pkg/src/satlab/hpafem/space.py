"""Conforming variable-degree H^1 spaces and Galerkin solves.

Local shape functions on an element with barycentric coordinates
``l0, l1, l2`` (local vertex k sits at reference vertex k of Ť):

* vertex hats ``l_k``;
* edge modes ``l_i l_j P_m(s)``, ``m <= p_e - 2``, with ``P_m`` the
  orthonormal Jacobi(1, 1) polynomials and ``s = l_hi - l_lo`` oriented from
  the lower to the higher global vertex index, so traces agree across edges;
* bubbles ``l0 l1 l2 D_k`` with ``D_k`` the Dubiner basis of degree ``p_T - 3``.

Edge degrees follow the minimum rule, so raising element degrees only ever
adds shape functions and the spaces are nested.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from .. import densela
from ..basis import dim_p, dubiner_eval, jacobi_normalized, jacobi_normalized_deriv
from ..quadrature import triangle_rule
from .mesh import HpMesh

# reference gradients of the barycentric coordinates
_DLAM = np.array([[-0.5, -0.5], [0.5, 0.0], [0.0, 0.5]])


def barycentric(xi, eta):
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    return np.stack([-(xi + eta) / 2, (1 + xi) / 2, (1 + eta) / 2], axis=-1)


def local_dim(p: int, edge_degrees) -> int:
    return 3 + sum(max(pe - 1, 0) for pe in edge_degrees) + dim_p(p - 3)


@lru_cache(maxsize=256)
def _local_tables_cached(p, edge_degrees, signs, order):
    rule = triangle_rule(order)
    V, G = local_basis(p, edge_degrees, signs, rule.nodes[:, 0], rule.nodes[:, 1])
    V.setflags(write=False)
    G.setflags(write=False)
    return rule, V, G


def local_tables(p, edge_degrees, signs, order):
    """Cached ``(rule, values, reference gradients)`` of a local basis."""
    return _local_tables_cached(int(p), tuple(int(q) for q in edge_degrees),
                                tuple(int(s) for s in signs), int(order))


def local_basis(p: int, edge_degrees, signs, xi, eta):
    """Values ``(npts, n)`` and reference gradients ``(npts, n, 2)``."""
    lam = barycentric(xi, eta)
    npts = lam.shape[0]
    n = local_dim(p, edge_degrees)
    V = np.empty((npts, n))
    G = np.empty((npts, n, 2))
    V[:, :3] = lam
    G[:, :3, :] = _DLAM[None, :, :]
    col = 3
    for k in range(3):
        m_max = edge_degrees[k] - 2
        if m_max < 0:
            continue
        i, j = k, (k + 1) % 3
        sgn = signs[k]
        s = sgn * (lam[:, j] - lam[:, i])
        ds = sgn * (_DLAM[j] - _DLAM[i])
        P = jacobi_normalized(m_max, 1.0, 1.0, s)
        dP = jacobi_normalized_deriv(m_max, 1.0, 1.0, s)
        prod = lam[:, i] * lam[:, j]
        dprod = lam[:, i, None] * _DLAM[j] + lam[:, j, None] * _DLAM[i]
        for m in range(m_max + 1):
            V[:, col] = prod * P[m]
            G[:, col, :] = dprod * P[m][:, None] + (prod * dP[m])[:, None] * ds
            col += 1
    if p >= 3:
        D, Dx, Dy = dubiner_eval(p - 3, xi, eta, grad=True)
        bub = lam.prod(axis=1)
        dbub = (lam[:, 1] * lam[:, 2])[:, None] * _DLAM[0] \
            + (lam[:, 0] * lam[:, 2])[:, None] * _DLAM[1] \
            + (lam[:, 0] * lam[:, 1])[:, None] * _DLAM[2]
        nb = D.shape[1]
        V[:, col:col + nb] = bub[:, None] * D
        G[:, col:col + nb, 0] = dbub[:, 0, None] * D + bub[:, None] * Dx
        G[:, col:col + nb, 1] = dbub[:, 1, None] * D + bub[:, None] * Dy
        col += nb
    assert col == n
    return V, G


@dataclass(frozen=True)
class ElementGeometry:
    v0: np.ndarray
    J: np.ndarray  # x = v0 + J (xi + 1)
    det: float
    Jinv_T: np.ndarray

    def to_physical(self, ref):
        return self.v0 + (np.asarray(ref) + 1.0) @ self.J.T

    def grad(self, G):
        """Map reference gradients ``(..., 2)`` to physical ones."""
        return G @ self.Jinv_T.T


def element_geometry(mesh: HpMesh, t: int) -> ElementGeometry:
    v = mesh.vertices[mesh.triangles[t]]
    J = 0.5 * np.column_stack([v[1] - v[0], v[2] - v[0]])
    return ElementGeometry(v[0], J, float(np.linalg.det(J)), np.linalg.inv(J).T)


class HpSpace:
    """Conforming subspace of H^1 with zero trace on the ``dirichlet`` edges.

    ``dirichlet`` is a boolean mask over mesh edges; ``None`` means every
    boundary edge of the mesh.
    """

    def __init__(self, mesh: HpMesh, dirichlet=None):
        self.mesh = mesh
        topo = mesh.topology
        self.dirichlet = topo.boundary_edge.copy() if dirichlet is None else np.asarray(dirichlet, bool)
        self.edge_degrees = mesh.edge_degrees()
        dir_vertex = np.zeros(mesh.n_vertices, bool)
        dir_vertex[topo.edges[self.dirichlet].ravel()] = True
        n = 0
        self.vertex_dof = np.full(mesh.n_vertices, -1)
        for v in range(mesh.n_vertices):
            if not dir_vertex[v] and topo.vertex_tris[v]:
                self.vertex_dof[v] = n
                n += 1
        self.edge_dofs = []
        for e in range(len(topo.edges)):
            k = max(self.edge_degrees[e] - 1, 0)
            if self.dirichlet[e]:
                self.edge_dofs.append(np.full(k, -1))
            else:
                self.edge_dofs.append(np.arange(n, n + k))
                n += k
        self.element_dofs = []
        self.signs = []
        for t, tri in enumerate(mesh.triangles):
            dofs = [self.vertex_dof[v] for v in tri]
            sg = []
            for k in range(3):
                e = topo.tri_edges[t, k]
                sg.append(1 if tri[k] < tri[(k + 1) % 3] else -1)
                dofs.extend(self.edge_dofs[e])
            nb = dim_p(mesh.degrees[t] - 3)
            dofs.extend(range(n, n + nb))
            n += nb
            self.element_dofs.append(np.asarray(dofs, int))
            self.signs.append(tuple(sg))
        self.dim = n
        self.geometry = [element_geometry(mesh, t) for t in range(mesh.n_triangles)]

    def element_key(self, t: int):
        topo = self.mesh.topology
        return (int(self.mesh.degrees[t]),
                tuple(int(self.edge_degrees[e]) for e in topo.tri_edges[t]),
                self.signs[t])

    def tables(self, t: int, order: int):
        p, pe, sg = self.element_key(t)
        return local_tables(p, pe, sg, order)

    def eval_local(self, t: int, ref_pts):
        p, pe, sg = self.element_key(t)
        ref_pts = np.atleast_2d(ref_pts)
        return local_basis(p, pe, sg, ref_pts[:, 0], ref_pts[:, 1])

    def assemble(self, f=None, f_degree: int = 0):
        """Stiffness matrix and (if ``f`` is given) load vector."""
        K = np.zeros((self.dim, self.dim))
        b = np.zeros(self.dim)
        for t in range(self.mesh.n_triangles):
            p = int(self.mesh.degrees[t])
            geo = self.geometry[t]
            rule, V, G = self.tables(t, 2 * p)
            Gp = geo.grad(G)
            w = rule.weights * abs(geo.det)
            Kloc = sum((Gp[:, :, c] * w[:, None]).T @ Gp[:, :, c] for c in (0, 1))
            dofs = self.element_dofs[t]
            keep = dofs >= 0
            idx = dofs[keep]
            K[np.ix_(idx, idx)] += Kloc[np.ix_(keep, keep)]
            if f is not None:
                rule_f, Vf, _ = self.tables(t, p + f_degree)
                x = geo.to_physical(rule_f.nodes)
                fl = Vf.T @ (rule_f.weights * abs(geo.det) * f(x[:, 0], x[:, 1]))
                np.add.at(b, idx, fl[keep])
        return K, b

    def mass_vector(self) -> np.ndarray:
        """``int b_i`` over the domain."""
        c = np.zeros(self.dim)
        for t in range(self.mesh.n_triangles):
            geo = self.geometry[t]
            rule, V, _ = self.tables(t, int(self.mesh.degrees[t]))
            dofs = self.element_dofs[t]
            keep = dofs >= 0
            np.add.at(c, dofs[keep], (V.T @ (rule.weights * abs(geo.det)))[keep])
        return c


@dataclass
class HpSolution:
    space: HpSpace
    coeffs: np.ndarray

    @property
    def mesh(self) -> HpMesh:
        return self.space.mesh

    def local_coeffs(self, t: int) -> np.ndarray:
        dofs = self.space.element_dofs[t]
        out = np.zeros(len(dofs))
        keep = dofs >= 0
        out[keep] = self.coeffs[dofs[keep]]
        return out

    def values(self, t: int, ref_pts):
        V, _ = self.space.eval_local(t, ref_pts)
        return V @ self.local_coeffs(t)

    def gradients(self, t: int, ref_pts):
        """Physical gradients ``(npts, 2)`` at reference points of element t."""
        _, G = self.space.eval_local(t, ref_pts)
        return self.space.geometry[t].grad(np.einsum("qic,i->qc", G, self.local_coeffs(t)))

    def energy(self) -> float:
        return energy_distance(self, None)


def _scaled_cholesky_solve(K, b):
    d = np.sqrt(np.diag(K))
    d[d == 0] = 1.0
    Ks = K / np.outer(d, d)
    L = densela.cholesky(Ks)
    x = linalg.cho_solve((L, True), b / d)
    # one step of iterative refinement
    r = b / d - Ks @ x
    x += linalg.cho_solve((L, True), r)
    return x / d


def solve_hp(mesh: HpMesh, f, dirichlet=None) -> HpSolution:
    """Galerkin solution of ``-Δu = f`` with homogeneous Dirichlet data.

    ``f`` is a :class:`satlab.hpafem.source.Source` (anything with ``__call__``
    and ``degree``).
    """
    space = HpSpace(mesh, dirichlet)
    K, b = space.assemble(f, f.degree)
    if space.dim == 0:
        return HpSolution(space, np.zeros(0))
    u = _scaled_cholesky_solve(K, b)
    res = np.linalg.norm(K @ u - b)
    if res > 1e-10 * max(np.linalg.norm(b), 1e-300) and np.linalg.norm(b) > 0:
        raise densela.Singular(f"Galerkin residual {res:.3e} too large")
    return HpSolution(space, u)


def energy_distance(u: HpSolution, v: HpSolution | None) -> float:
    """``|grad(u - v)|`` over the mesh; both must live on the same triangles."""
    mesh = u.mesh
    total = 0.0
    for t in range(mesh.n_triangles):
        p = int(mesh.degrees[t])
        if v is not None:
            if not np.array_equal(v.mesh.triangles[t], mesh.triangles[t]):
                raise ValueError("solutions live on different meshes")
            p = max(p, int(v.mesh.degrees[t]))
        rule = triangle_rule(2 * p)
        g = u.gradients(t, rule.nodes)
        if v is not None:
            g = g - v.gradients(t, rule.nodes)
        total += abs(u.space.geometry[t].det) * float(rule.weights @ (g * g).sum(axis=1))
    return float(np.sqrt(total))
