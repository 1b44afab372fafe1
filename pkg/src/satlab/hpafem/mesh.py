"""Conforming triangulations with a per-element polynomial degree."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    pass


@dataclass
class Topology:
    edges: np.ndarray  # (E, 2), sorted vertex pairs
    tri_edges: np.ndarray  # (F, 3); local edge k joins local vertices k and k+1
    edge_tris: list  # per edge, the adjacent triangles
    boundary_edge: np.ndarray  # (E,) bool
    boundary_vertex: np.ndarray  # (V,) bool
    vertex_tris: list


@dataclass
class HpMesh:
    """Triangles are counterclockwise vertex triples; ``degrees`` is p_T >= 1."""

    vertices: np.ndarray
    triangles: np.ndarray
    degrees: np.ndarray = None
    max_shape_ratio: float = 20.0
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, float).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, int).reshape(-1, 3)
        if self.degrees is None:
            self.degrees = np.ones(len(self.triangles), int)
        self.degrees = np.asarray(self.degrees, int).copy()
        if self.degrees.shape != (len(self.triangles),):
            raise MeshError("one degree per triangle required")
        if self.check:
            self.validate()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def validate(self):
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= self.n_vertices):
            raise MeshError("triangle refers to a missing vertex")
        if np.any(self.degrees < 1):
            raise MeshError("degrees must be at least 1")
        if np.any(self.signed_areas() <= 0):
            raise MeshError("triangles must be counterclockwise and non-degenerate")
        topo = self.topology
        for e, tris in enumerate(topo.edge_tris):
            if len(tris) > 2:
                raise MeshError(f"edge {tuple(topo.edges[e])} shared by more than two triangles")
        # a vertex lying in the interior of another triangle's edge is a hanging node
        for e, (i, j) in enumerate(topo.edges):
            if not topo.boundary_edge[e]:
                continue
            a, b = self.vertices[i], self.vertices[j]
            d = b - a
            for k in range(self.n_vertices):
                if k in (i, j):
                    continue
                w = self.vertices[k] - a
                s = (w @ d) / (d @ d)
                if 1e-12 < s < 1 - 1e-12 and abs(d[0] * w[1] - d[1] * w[0]) <= 1e-12 * (d @ d):
                    raise MeshError("non-conforming mesh (hanging vertex)")
        ratio = self.shape_ratios()
        if ratio.size and ratio.max() > self.max_shape_ratio:
            raise MeshError(f"shape ratio {ratio.max():.3g} exceeds {self.max_shape_ratio}")

    def signed_areas(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def side_lengths(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        return np.stack([np.linalg.norm(v[:, (k + 1) % 3] - v[:, k], axis=1) for k in range(3)], axis=1)

    def diameters(self) -> np.ndarray:
        return self.side_lengths().max(axis=1)

    def shape_ratios(self) -> np.ndarray:
        """Circumradius over inradius (2 for equilateral triangles)."""
        L = self.side_lengths()
        area = self.signed_areas()
        s = L.sum(axis=1) / 2
        R = L.prod(axis=1) / (4 * area)
        r = area / s
        return R / r

    @cached_property
    def topology(self) -> Topology:
        index = {}
        edges = []
        edge_tris = []
        tri_edges = np.empty((self.n_triangles, 3), int)
        for t, tri in enumerate(self.triangles):
            for k in range(3):
                key = tuple(sorted((int(tri[k]), int(tri[(k + 1) % 3]))))
                if key not in index:
                    index[key] = len(edges)
                    edges.append(key)
                    edge_tris.append([])
                e = index[key]
                tri_edges[t, k] = e
                edge_tris[e].append(t)
        edges = np.array(edges, int).reshape(-1, 2)
        boundary_edge = np.array([len(ts) == 1 for ts in edge_tris], bool)
        boundary_vertex = np.zeros(self.n_vertices, bool)
        boundary_vertex[edges[boundary_edge].ravel()] = True
        vertex_tris = [[] for _ in range(self.n_vertices)]
        for t, tri in enumerate(self.triangles):
            for v in tri:
                vertex_tris[v].append(t)
        return Topology(edges, tri_edges, edge_tris, boundary_edge, boundary_vertex, vertex_tris)

    def with_degrees(self, degrees) -> "HpMesh":
        m = HpMesh(self.vertices, self.triangles, degrees, self.max_shape_ratio, check=False)
        if np.any(m.degrees < 1):
            raise MeshError("degrees must be at least 1")
        m.__dict__["topology"] = self.topology
        return m

    def edge_degrees(self) -> np.ndarray:
        """Minimum rule: each edge carries the smallest adjacent element degree."""
        topo = self.topology
        return np.array([min(self.degrees[t] for t in ts) for ts in topo.edge_tris], int)

    def star(self, a: int) -> list:
        return list(self.topology.vertex_tris[a])

    def p_star(self, a: int) -> int:
        return int(max(self.degrees[t] for t in self.star(a)))


def square_mesh(n: int = 1, degree: int = 1, lower=(0.0, 0.0), upper=(1.0, 1.0)) -> HpMesh:
    """``2 n^2`` right triangles on a rectangle, diagonals from lower left."""
    if n < 1:
        raise ValueError("n must be positive")
    xs = np.linspace(lower[0], upper[0], n + 1)
    ys = np.linspace(lower[1], upper[1], n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10 = v00 + 1
            v01 = v00 + n + 1
            v11 = v01 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return HpMesh(verts, np.array(tris), np.full(len(tris), degree))


def crisscross_square(degree: int = 1) -> HpMesh:
    """Unit square cut by both diagonals: four triangles, one interior vertex."""
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], float)
    tris = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    return HpMesh(verts, tris, np.full(4, degree))


def read_mesh(path) -> HpMesh:
    """Read ``V F`` / V lines ``x y`` / F lines ``i j k [pT]`` (0-based indices)."""
    tokens = [line.split() for line in Path(path).read_text().splitlines()]
    tokens = [t for t in tokens if t and not t[0].startswith("#")]
    if not tokens:
        raise MeshError("empty mesh file")
    try:
        nv, nf = int(tokens[0][0]), int(tokens[0][1])
    except (IndexError, ValueError):
        raise MeshError("first line must hold the counts 'V F'") from None
    if len(tokens) < 1 + nv + nf:
        raise MeshError("mesh file is truncated")
    verts = np.array([[float(t[0]), float(t[1])] for t in tokens[1:1 + nv]])
    tris, degs = [], []
    for t in tokens[1 + nv:1 + nv + nf]:
        tris.append([int(t[0]), int(t[1]), int(t[2])])
        degs.append(int(t[3]) if len(t) > 3 else 1)
    return HpMesh(verts, np.array(tris, int).reshape(-1, 3), np.array(degs, int))


def write_mesh(mesh: HpMesh, path):
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k} {p}" for (i, j, k), p in zip(mesh.triangles, mesh.degrees)]
    Path(path).write_text("\n".join(lines) + "\n")
