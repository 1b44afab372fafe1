"""Star residuals, equilibrated-flux estimators, marking and enrichment."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .. import densela
from ..basis import EDGE_LENGTHS, VERTICES, dim_p, dubiner_eval, legendre_table
from ..quadrature import edge_rule, gauss_legendre, points_for_degree, triangle_rule
from ..rtflux import rt_dim, rt_eval, rt_space
from .mesh import HpMesh
from .space import _DLAM, HpSolution, HpSpace, barycentric

# reference edge behind local edge k (joining local vertices k and k+1),
# and whether its parameter runs along k -> k+1
_LOCAL_TO_REF_EDGE = {0: (1, 1), 1: (3, 1), 2: (2, -1)}


class Incompatible(ValueError):
    """The star residual does not vanish on constants."""


# ------------------------------------------------------------------ patches

@dataclass
class StarPatch:
    a: int
    triangles: list  # global triangle ids (T_1..T_n)
    interior: bool
    p_a: int
    p_vec: tuple
    interior_edges: list  # mesh-interior edges through a
    outer_edges: list  # patch edges not containing a
    local_vertex: dict  # triangle -> local index of a

    @property
    def size(self):
        return len(self.triangles)


def star_patch(mesh: HpMesh, a: int) -> StarPatch:
    topo = mesh.topology
    tris = mesh.star(a)
    if not tris:
        raise ValueError(f"vertex {a} belongs to no triangle")
    edges = sorted({int(e) for t in tris for e in topo.tri_edges[t]})
    inner = [e for e in edges if a in topo.edges[e] and not topo.boundary_edge[e]]
    outer = [e for e in edges if a not in topo.edges[e]]
    loc = {t: int(np.flatnonzero(mesh.triangles[t] == a)[0]) for t in tris}
    return StarPatch(a, tris, not bool(topo.boundary_vertex[a]), mesh.p_star(a),
                     tuple(int(mesh.degrees[t]) for t in tris), inner, outer, loc)


def hat_values(mesh: HpMesh, a: int, t: int, ref_pts) -> np.ndarray:
    """``psi_a`` at reference points of triangle ``t`` (zero if a is not a vertex of t)."""
    ref_pts = np.atleast_2d(ref_pts)
    hits = np.flatnonzero(mesh.triangles[t] == a)
    if hits.size == 0:
        return np.zeros(len(ref_pts))
    return barycentric(ref_pts[:, 0], ref_pts[:, 1])[:, hits[0]]


def _hat_grad(space: HpSpace, t: int, j: int) -> np.ndarray:
    return space.geometry[t].grad(_DLAM[j])


# -------------------------------------------------------- local residual

def _ortho(t_det: float, n: int, ref_pts):
    """L2(T)-orthonormal Dubiner basis of degree n at reference points."""
    return dubiner_eval(n, ref_pts[:, 0], ref_pts[:, 1]) / math.sqrt(abs(t_det))


def _edge_frame(mesh: HpMesh, t: int, k: int, npts_degree: int):
    """Quadrature on local edge k of triangle t.

    Returns reference points, physical ds weights, the outward unit normal
    and the edge parameter oriented from the lower to the higher global
    vertex index.
    """
    tri = mesh.triangles[t]
    i, j = k, (k + 1) % 3
    s, ref_pts, _ = edge_rule(npts_degree, VERTICES[i], VERTICES[j])
    w = gauss_legendre(points_for_degree(npts_degree)).weights
    P, Q = mesh.vertices[tri[i]], mesh.vertices[tri[j]]
    d = Q - P
    length = float(np.hypot(*d))
    normal = np.array([d[1], -d[0]]) / length
    s_glob = s if tri[i] < tri[j] else -s
    return ref_pts, w * length / 2, normal, s_glob, length


@dataclass
class LocalResidual:
    """``r(v) = sum_T int v psi_a phi_T + sum_e int_e v phi_e`` on a star.

    ``phi_T`` holds coefficients over the L2(T)-orthonormal Dubiner basis of
    degree ``p_T - 1``; ``phi_e`` holds coefficients over the L2(e)-orthonormal
    Legendre basis of degree ``p_a`` in the edge parameter running from the
    lower to the higher global vertex.  Jumps are taken in the direction of
    the outward normal of the first triangle adjacent to the edge.
    """

    patch: StarPatch
    phi_T: dict
    phi_e: dict
    qf: dict = field(repr=False)  # coefficients of the projected data per triangle


def project_source(mesh: HpMesh, space: HpSpace, f, a: int, t: int) -> np.ndarray:
    """Coefficients of ``(Q f)|_T``; the psi_a-weighted mean when p_T = 1."""
    p = int(mesh.degrees[t])
    geo = space.geometry[t]
    rule = triangle_rule(p + f.degree + 1)
    x = geo.to_physical(rule.nodes)
    fv = f(x[:, 0], x[:, 1])
    if p == 1:
        psi = hat_values(mesh, a, t, rule.nodes)
        mean = float(rule.weights @ (psi * fv)) / float(rule.weights @ psi)
        return np.array([mean * math.sqrt(2.0) * math.sqrt(abs(geo.det))])
    Q = _ortho(geo.det, p - 1, rule.nodes)
    return Q.T @ (rule.weights * abs(geo.det) * fv)


def laplacian_projection(sol: HpSolution, t: int, n: int) -> np.ndarray:
    """Coefficients of the L2(T) projection of Δu onto P_n, by integration by parts."""
    mesh = sol.mesh
    if n < 0:
        return np.zeros(0)
    space = sol.space
    geo = space.geometry[t]
    p = int(mesh.degrees[t])
    rule = triangle_rule(p + n)
    gu = sol.gradients(t, rule.nodes)
    D, Dx, Dy = dubiner_eval(n, rule.nodes[:, 0], rule.nodes[:, 1], grad=True)
    s = 1 / math.sqrt(abs(geo.det))
    gq = geo.grad(np.stack([Dx, Dy], axis=-1)) * s
    c = -np.einsum("q,qc,qkc->k", rule.weights * abs(geo.det), gu, gq)
    for k in range(3):
        ref_pts, ds, normal, _, _ = _edge_frame(mesh, t, k, p + n)
        flux = sol.gradients(t, ref_pts) @ normal
        q = dubiner_eval(n, ref_pts[:, 0], ref_pts[:, 1]) * s
        c += q.T @ (ds * flux)
    return c


def normal_jump(sol: HpSolution, e: int, degree: int):
    """Legendre coefficients of ``[grad u . n_e]`` on an interior edge."""
    mesh = sol.mesh
    topo = mesh.topology
    t1, t2 = topo.edge_tris[e]
    out = None
    for t, sign in ((t1, 1.0), (t2, -1.0)):
        k = int(np.flatnonzero(topo.tri_edges[t] == e)[0])
        ref_pts, ds, normal, s_glob, length = _edge_frame(mesh, t, k, 2 * degree + 2)
        if sign < 0:
            # same physical points, normal of the first triangle
            normal = -normal
        flux = sol.gradients(t, ref_pts) @ normal
        ell = legendre_table(degree, s_glob) / math.sqrt(length / 2)
        part = sign * (ell @ (ds * flux))
        out = part if out is None else out + part
    return out


def local_residual(mesh: HpMesh, sol: HpSolution, f, a: int) -> LocalResidual:
    patch = star_patch(mesh, a)
    space = sol.space
    phi_T, qf = {}, {}
    for t in patch.triangles:
        p = int(mesh.degrees[t])
        q = project_source(mesh, space, f, a, t)
        lap = laplacian_projection(sol, t, p - 1)
        qf[t] = q
        phi_T[t] = q + lap
    phi_e = {}
    topo = mesh.topology
    for e in patch.interior_edges:
        t1 = topo.edge_tris[e][0]
        deg = patch.p_a
        # psi_a [grad u . n] has degree <= p_a; project exactly
        k = int(np.flatnonzero(topo.tri_edges[t1] == e)[0])
        ref_pts, ds, normal, s_glob, length = _edge_frame(mesh, t1, k, 2 * deg + 2)
        jump_coeffs = normal_jump(sol, e, deg)
        ell = legendre_table(deg, s_glob) / math.sqrt(length / 2)
        jump_vals = ell.T @ jump_coeffs
        psi = hat_values(mesh, a, t1, ref_pts)
        # integration by parts leaves -psi_a [grad u . n] on interior edges
        phi_e[e] = -(ell @ (ds * psi * jump_vals))
    return LocalResidual(patch, phi_T, phi_e, qf)


def weighted_mean_norm(mesh: HpMesh, a: int, t: int) -> float:
    """Operator norm in L2(T) of ``w -> int psi_a w / int psi_a`` (sqrt(3/2))."""
    # the range is the constants, so the norm is |T|^{1/2} |psi_a|_T / int psi_a
    rule = triangle_rule(2)
    psi = hat_values(mesh, a, t, rule.nodes)
    return math.sqrt(2.0 * float(rule.weights @ psi ** 2)) / float(rule.weights @ psi)


# --------------------------------------------------------------- oscillation

def oscillation(mesh: HpMesh, f) -> float:
    """``sqrt(sum_T diam(T)^2 |f - Q_{p_T - 1} f|_T^2)``."""
    total = 0.0
    diams = mesh.diameters()
    for t in range(mesh.n_triangles):
        p = int(mesh.degrees[t])
        v = mesh.vertices[mesh.triangles[t]]
        J = 0.5 * np.column_stack([v[1] - v[0], v[2] - v[0]])
        det = abs(float(np.linalg.det(J)))
        rule = triangle_rule(2 * max(f.degree, p))
        x = v[0] + (rule.nodes + 1.0) @ J.T
        fv = f(x[:, 0], x[:, 1])
        Q = dubiner_eval(p - 1, rule.nodes[:, 0], rule.nodes[:, 1])
        c = Q.T @ (rule.weights * fv)
        err = fv - Q @ c
        total += diams[t] ** 2 * det * float(rule.weights @ err ** 2)
    return math.sqrt(total)


# --------------------------------------------------------- patch dual norms

@dataclass
class PatchSpace:
    space: HpSpace
    tri_map: list  # patch triangle -> global triangle
    a_local: int
    interior: bool


def patch_space(mesh: HpMesh, a: int, degree: int) -> PatchSpace:
    """Uniform-degree conforming space on the star of ``a``.

    Functions vanish on the patch edges lying on the domain boundary; for an
    interior vertex there are no such edges and the mean-zero condition is
    imposed by the solver.
    """
    tris = mesh.star(a)
    verts = sorted({int(v) for t in tris for v in mesh.triangles[t]})
    index = {v: i for i, v in enumerate(verts)}
    sub = HpMesh(mesh.vertices[verts], [[index[v] for v in mesh.triangles[t]] for t in tris],
                 np.full(len(tris), degree), check=False)
    topo = mesh.topology
    gl_boundary = {tuple(topo.edges[e]) for e in np.flatnonzero(topo.boundary_edge)}
    dirichlet = np.array([tuple(sorted((verts[i], verts[j]))) in gl_boundary
                          for i, j in sub.topology.edges], bool)
    return PatchSpace(HpSpace(sub, dirichlet), tris, index[a], not bool(topo.boundary_vertex[a]))


def _weak_load(ps: PatchSpace, sol: HpSolution, a: int, data, data_degree: int) -> np.ndarray:
    """``r(b_i) = int psi_a g b_i - grad u . grad(psi_a b_i)`` over the patch.

    ``data(s, t, rule, x)`` returns ``g`` at the quadrature points of patch
    triangle s (global triangle t).
    """
    mesh = sol.mesh
    space = ps.space
    L = np.zeros(space.dim)
    for s, t in enumerate(ps.tri_map):
        j = int(np.flatnonzero(mesh.triangles[t] == a)[0])
        geo = space.geometry[s]
        p = int(space.mesh.degrees[s])
        rule, V, G = space.tables(s, p + 1 + max(int(mesh.degrees[t]), data_degree))
        x = geo.to_physical(rule.nodes)
        psi = barycentric(rule.nodes[:, 0], rule.nodes[:, 1])[:, j]
        dpsi = geo.grad(_DLAM[j])
        gu = sol.gradients(t, rule.nodes)
        Gp = geo.grad(G)
        w = rule.weights * abs(geo.det)
        g = data(s, t, rule, x)
        vals = V.T @ (w * psi * g)
        vals -= V.T @ (w * (gu @ dpsi))
        vals -= np.einsum("q,qc,qic->i", w * psi, gu, Gp)
        dofs = space.element_dofs[s]
        keep = dofs >= 0
        np.add.at(L, dofs[keep], vals[keep])
    return L


def _residual_form_load(ps: PatchSpace, res: LocalResidual, mesh: HpMesh) -> np.ndarray:
    """Load vector of the residual in its ``phi_T, phi_e`` form."""
    space = ps.space
    a = res.patch.a
    L = np.zeros(space.dim)
    for s, t in enumerate(ps.tri_map):
        geo = space.geometry[s]
        p = int(space.mesh.degrees[s])
        rule, V, _ = space.tables(s, p + int(mesh.degrees[t]) + 1)
        psi = hat_values(mesh, a, t, rule.nodes)
        q = _ortho(geo.det, int(mesh.degrees[t]) - 1, rule.nodes) @ res.phi_T[t]
        vals = V.T @ (rule.weights * abs(geo.det) * psi * q)
        dofs = space.element_dofs[s]
        keep = dofs >= 0
        np.add.at(L, dofs[keep], vals[keep])
    topo = mesh.topology
    for e, coeffs in res.phi_e.items():
        t1 = topo.edge_tris[e][0]
        s = ps.tri_map.index(t1)
        k = int(np.flatnonzero(topo.tri_edges[t1] == e)[0])
        deg = len(coeffs) - 1
        p = int(space.mesh.degrees[s])
        ref_pts, ds, _, s_glob, length = _edge_frame(mesh, t1, k, p + deg)
        ell = legendre_table(deg, s_glob) / math.sqrt(length / 2)
        phi = ell.T @ coeffs
        V, _ = space.eval_local(s, ref_pts)
        vals = V.T @ (ds * phi)
        dofs = space.element_dofs[s]
        keep = dofs >= 0
        np.add.at(L, dofs[keep], vals[keep])
    return L


def _dual_norm(ps: PatchSpace, L: np.ndarray) -> float:
    """Dual norm(s) of the load column(s) ``L`` over the patch space."""
    space = ps.space
    K, _ = space.assemble()
    if ps.interior:
        x, _ = densela.solve_kkt(K, space.mass_vector(), L, None)
    else:
        x = densela.solve_spd(K, L)
    vals = np.sqrt(np.maximum(np.einsum("i...,i...->...", L, x), 0.0))
    return vals if np.ndim(vals) else float(vals)


def _qf_data(res: LocalResidual, mesh: HpMesh):
    def data(s, t, rule, x):
        p = int(mesh.degrees[t])
        geo_det = _det(mesh, t)
        return _ortho(geo_det, p - 1, rule.nodes) @ res.qf[t]
    return data


def _det(mesh, t):
    v = mesh.vertices[mesh.triangles[t]]
    return 0.25 * ((v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1]) - (v[1, 1] - v[0, 1]) * (v[2, 0] - v[0, 0]))


def residual_dual_norms(mesh: HpMesh, sol: HpSolution, f, a: int, extra: int = 20,
                        degree: int | None = None) -> tuple[float, float]:
    """Dual norms ``(|r_a|, |r̆_a|)`` over the star space of degree ``p_a + extra``.

    Discrete dual norms bound the exact ones from below and converge to them
    as the degree grows.  ``degree`` overrides the test degree.
    """
    res = local_residual(mesh, sol, f, a)
    deg = res.patch.p_a + extra if degree is None else degree
    ps = patch_space(mesh, a, deg)
    exact = _weak_load(ps, sol, a, lambda s, t, rule, x: f(x[:, 0], x[:, 1]), f.degree)
    disc = _weak_load(ps, sol, a, _qf_data(res, mesh), res.patch.p_a)
    n_exact, n_disc = _dual_norm(ps, np.column_stack([exact, disc]))
    return float(n_exact), float(n_disc)


def patch_saturation_ratio(mesh: HpMesh, sol: HpSolution, f, a: int, q: int, extra: int = 20) -> float:
    """``|r̆_a|`` (overkill) over its dual norm restricted to degree ``p_a + q``."""
    res = local_residual(mesh, sol, f, a)
    out = []
    for deg in (res.patch.p_a + extra, res.patch.p_a + q):
        ps = patch_space(mesh, a, deg)
        out.append(_dual_norm(ps, _weak_load(ps, sol, a, _qf_data(res, mesh), res.patch.p_a)))
    return out[0] / out[1] if out[1] > 0 else 1.0


# -------------------------------------------------------------- equilibration

@dataclass
class EquilibratedFlux:
    eta: float
    patch: StarPatch
    coeffs: dict  # triangle -> RT coefficients (reference basis, Piola mapped)
    div_residual: float
    jump_residual: float


_RT_REF_CACHE: dict = {}


def _rt_ref(p: int):
    if p not in _RT_REF_CACHE:
        rule = triangle_rule(2 * p + 2)
        vals, div = rt_eval(p, rule.nodes[:, 0], rule.nodes[:, 1], div=True)
        _RT_REF_CACHE[p] = (rule, vals, div)
    return _RT_REF_CACHE[p]


def _orth_complement(c: np.ndarray) -> np.ndarray:
    n = len(c)
    Q, _ = np.linalg.qr(np.column_stack([c, np.eye(n)]))
    return Q[:, 1:n]


def equilibrate_star(mesh: HpMesh, sol: HpSolution, f, a: int, res: LocalResidual | None = None,
                     tol: float = 1e-9) -> EquilibratedFlux:
    """Minimal ``|zeta + psi_a grad u|`` over zeta in RT_{p_a,0} with the prescribed divergence.

    The divergence target is ``psi_a Q f - grad psi_a . grad u``.  For an
    interior vertex the constant multiplier is removed, which requires the
    target to have zero mean (the residual vanishes on constants).
    """
    if res is None:
        res = local_residual(mesh, sol, f, a)
    patch = res.patch
    p = patch.p_a
    space = sol.space
    S = rt_space(p)
    rule, rvals, rdiv = _rt_ref(p)
    nrt = rt_dim(p)
    nd = dim_p(p)
    ntri = patch.size
    n = nrt * ntri
    A = np.zeros((n, n))
    b = np.zeros(n)
    div_rows = np.zeros((nd * ntri, n))
    div_rhs = np.zeros(nd * ntri)
    flux_rows = {}  # (triangle, edge) -> rows in global edge parameter
    topo = mesh.topology
    for s, t in enumerate(patch.triangles):
        geo = space.geometry[t]
        sl = slice(s * nrt, (s + 1) * nrt)
        j = patch.local_vertex[t]
        phys = np.einsum("cd,qjd->qjc", geo.J, rvals)
        A[sl, sl] = sum((phys[:, :, c] * rule.weights[:, None]).T @ phys[:, :, c] for c in (0, 1)) / geo.det
        psi = barycentric(rule.nodes[:, 0], rule.nodes[:, 1])[:, j]
        gu = sol.gradients(t, rule.nodes)
        # int psi grad u . sigma_j dx with sigma = J sigma_hat / det, dx = det dxi
        b[sl] = -np.einsum("q,qc,qjc->j", rule.weights * psi, gu, phys)
        dsl = slice(s * nd, (s + 1) * nd)
        div_rows[dsl, sl] = S.div / math.sqrt(geo.det)
        dpsi = geo.grad(_DLAM[j])
        qf = _ortho(geo.det, int(mesh.degrees[t]) - 1, rule.nodes) @ res.qf[t]
        target = psi * qf - gu @ dpsi
        div_rhs[dsl] = _ortho(geo.det, p, rule.nodes).T @ (rule.weights * geo.det * target)
        tri = mesh.triangles[t]
        for k in range(3):
            e = int(topo.tri_edges[t, k])
            ref_edge, along = _LOCAL_TO_REF_EDGE[k]
            direction = along * (1 if tri[k] < tri[(k + 1) % 3] else -1)
            signs = direction ** np.arange(p + 1)
            row = np.zeros((p + 1, n))
            row[:, sl] = (EDGE_LENGTHS[ref_edge] / 2) * signs[:, None] * S.normal[ref_edge]
            flux_rows[(t, e)] = row
    blocks, rhs = [], []
    if patch.interior:
        c = np.zeros(nd * ntri)
        for s, t in enumerate(patch.triangles):
            c[s * nd] = math.sqrt(2.0 * space.geometry[t].det)
        scale = np.linalg.norm(div_rhs) + 1e-300
        if abs(c @ div_rhs) > tol * max(scale, 1.0) * np.linalg.norm(c):
            raise Incompatible(f"star residual of vertex {a} does not vanish on constants")
        Z = _orth_complement(c / np.linalg.norm(c))
        blocks.append(Z.T @ div_rows)
        rhs.append(Z.T @ div_rhs)
    else:
        blocks.append(div_rows)
        rhs.append(div_rhs)
    continuity = []
    for e in sorted({e for (_, e) in flux_rows}):
        owners = [t for t in patch.triangles if (t, e) in flux_rows]
        if len(owners) == 2:
            row = flux_rows[(owners[0], e)] + flux_rows[(owners[1], e)]
            continuity.append(row)
        elif a not in topo.edges[e]:
            continuity.append(flux_rows[(owners[0], e)])
    if continuity:
        blocks.append(np.vstack(continuity))
        rhs.append(np.zeros(sum(r.shape[0] for r in continuity)))
    B = np.vstack(blocks)
    g = np.concatenate(rhs)
    zeta, _ = densela.solve_kkt(A, B.T, b, g)
    div_res = float(np.linalg.norm(div_rows @ zeta - div_rhs))
    jump_res = float(np.linalg.norm(np.vstack(continuity) @ zeta)) if continuity else 0.0
    if div_res > tol * max(1.0, np.linalg.norm(div_rhs)) or jump_res > tol * max(1.0, np.abs(zeta).max()):
        raise densela.Singular("equilibrated flux violates its constraints")
    eta2 = 0.0
    coeffs = {}
    for s, t in enumerate(patch.triangles):
        geo = space.geometry[t]
        z = zeta[s * nrt:(s + 1) * nrt]
        coeffs[t] = z
        j = patch.local_vertex[t]
        psi = barycentric(rule.nodes[:, 0], rule.nodes[:, 1])[:, j]
        gu = sol.gradients(t, rule.nodes)
        field_ = np.einsum("cd,qjd,j->qc", geo.J, rvals, z) / geo.det + psi[:, None] * gu
        eta2 += geo.det * float(rule.weights @ (field_ * field_).sum(axis=1))
    return EquilibratedFlux(math.sqrt(eta2), patch, coeffs, div_res, jump_res)


def estimate(mesh: HpMesh, sol: HpSolution, f) -> np.ndarray:
    """``eta_a`` for every vertex."""
    return np.array([equilibrate_star(mesh, sol, f, a).eta for a in range(mesh.n_vertices)])


# ------------------------------------------------------- marking, enrichment

def doerfler_mark(etas, theta: float) -> list:
    """Smallest set of vertices with ``sum eta_a^2 >= theta^2 sum eta^2``.

    Vertices are taken by decreasing ``eta``; ties go to the lower index.
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    etas = np.asarray(etas, float)
    if etas.size == 0:
        return []
    order = np.lexsort((np.arange(etas.size), -etas))
    sq = etas[order] ** 2
    csum = np.cumsum(sq)
    total = csum[-1]
    if total == 0:
        return []
    need = theta ** 2 * total * (1 - 1e-14)
    k = int(np.searchsorted(csum, need, side="left"))
    return sorted(int(v) for v in order[: k + 1])


@dataclass(frozen=True)
class QRule:
    """Degree increment ``q(p) = ceil(lam p)`` or a constant ``m``."""

    kind: str
    value: Fraction

    def __call__(self, p: int) -> int:
        if self.kind == "ceil":
            return max(1, math.ceil(self.value * p))
        return int(self.value)

    def __str__(self):
        return f"{self.kind}:{self.value}"


def parse_q_rule(spec) -> QRule:
    if isinstance(spec, QRule):
        return spec
    kind, _, val = str(spec).partition(":")
    kind = kind.strip().lower()
    if kind in ("ceil", "linear"):
        lam = Fraction(val.strip())
        if lam <= 0:
            raise ValueError("the linear rule needs a positive factor")
        return QRule("ceil", lam)
    if kind in ("const", "constant"):
        m = int(val)
        if m < 1:
            raise ValueError("the constant rule needs m >= 1")
        return QRule("const", Fraction(m))
    raise ValueError(f"unknown q rule {spec!r}; use 'ceil:<lambda>' or 'const:<m>'")


def enrich(mesh: HpMesh, marked, q_rule) -> HpMesh:
    """Raise every element of each marked star to ``p_a + q(p_a)`` (max rule)."""
    q_rule = parse_q_rule(q_rule)
    degrees = mesh.degrees.copy()
    for a in marked:
        p_a = mesh.p_star(a)
        for t in mesh.star(a):
            degrees[t] = max(degrees[t], p_a + q_rule(p_a))
    return mesh.with_degrees(degrees)
