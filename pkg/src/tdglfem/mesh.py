"""Conforming triangulations of the L-shaped test domains.

All meshes are built from a tensor grid whose lines pass through every
domain corner (including the corners of the hole), so each level is an
exact triangulation of the polygonal domain.  Finer levels come from
uniform red refinement, which keeps the family nested and quasi-uniform.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

#: coarsest grid spacing used before refinement
BASE_H = 0.125
#: radius of the support of the manufactured solution around the corner
SUPPORT_RADIUS = 0.4

DEFAULT_HOLE = ((-0.75, -0.75), (-0.45, -0.45))


class MeshError(ValueError):
    pass


class Mesh:
    """Triangle mesh with globally oriented edges.

    Parameters
    ----------
    vertices : (V, 2) array
    triangles : (F, 3) int array, counter-clockwise

    Edges are stored as sorted vertex pairs, so the global orientation of an
    edge always runs from the lower to the higher vertex index.  Local edge
    ``k`` of a triangle joins its local vertices ``k`` and ``(k + 1) % 3``;
    ``tri_edge_sign[t, k]`` is +1 when that local direction agrees with the
    global one.
    """

    def __init__(self, vertices, triangles):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (V, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must have shape (F, 3)")

        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        self.areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if np.any(self.areas <= 0):
            raise MeshError("triangles must be counter-clockwise and non-degenerate")

        local = np.stack(
            [self.triangles, np.roll(self.triangles, -1, axis=1)], axis=2
        )  # (F, 3, 2)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        self.edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        self.tri_edges = inverse.reshape(-1, 3)
        self.tri_edge_sign = np.where(local[:, :, 0] < local[:, :, 1], 1, -1).astype(np.int8)

        counts = np.bincount(self.tri_edges.ravel(), minlength=len(self.edges))
        if np.any(counts > 2):
            raise MeshError("non-manifold edge (shared by more than two triangles)")
        self.edge_tri_count = counts
        self.boundary_edges = counts == 1

        bverts = np.unique(self.edges[self.boundary_edges])
        self.boundary_vertex = np.zeros(len(self.vertices), dtype=bool)
        self.boundary_vertex[bverts] = True
        self.boundary_loop = self._label_boundary_loops()

        lengths = self.edge_lengths
        self.h_max = float(lengths.max())
        self.h_min = float(lengths.min())
        # node spacing along the boundary
        self.h = float(lengths[self.boundary_edges].max())

    # ------------------------------------------------------------------
    def _label_boundary_loops(self):
        be = self.edges[self.boundary_edges]
        nv = len(self.vertices)
        graph = coo_matrix((np.ones(len(be)), (be[:, 0], be[:, 1])), shape=(nv, nv))
        _, labels = connected_components(graph, directed=False)
        # relabel so that loop ids are consecutive over the boundary edges only
        _, loop = np.unique(labels[be[:, 0]], return_inverse=True)
        out = np.full(len(self.edges), -1, dtype=np.int64)
        out[self.boundary_edges] = loop
        return out

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_boundary_loops(self) -> int:
        return int(self.boundary_loop.max()) + 1 if self.boundary_edges.any() else 0

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles

    @property
    def betti(self) -> int:
        return self.n_boundary_loops - 1

    @property
    def edge_vectors(self) -> np.ndarray:
        return self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_vectors, axis=1)

    @property
    def edge_tangents(self) -> np.ndarray:
        v = self.edge_vectors
        return v / np.linalg.norm(v, axis=1)[:, None]

    @property
    def quality_ratio(self) -> float:
        return self.h_max / self.h_min

    def edge_triangles(self) -> np.ndarray:
        """(E, 2) array of adjacent triangles, -1 where missing."""
        out = np.full((self.n_edges, 2), -1, dtype=np.int64)
        flat = self.tri_edges.ravel()
        tri = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(flat, kind="stable")
        flat, tri = flat[order], tri[order]
        first = np.ones(len(flat), dtype=bool)
        first[1:] = flat[1:] != flat[:-1]
        out[flat[first], 0] = tri[first]
        out[flat[~first], 1] = tri[~first]
        return out

    def boundary_normals(self) -> np.ndarray:
        """Outward unit normals of the boundary edges (rows follow ``np.flatnonzero(boundary_edges)``)."""
        be = np.flatnonzero(self.boundary_edges)
        t = self.edge_tangents[be]
        n = np.column_stack([t[:, 1], -t[:, 0]])
        # orient away from the owning triangle's centroid
        owner = self.edge_triangles()[be, 0]
        centroid = self.vertices[self.triangles[owner]].mean(axis=1)
        mid = self.vertices[self.edges[be]].mean(axis=1)
        flip = np.einsum("ij,ij->i", n, mid - centroid) < 0
        n[flip] *= -1
        return n

    def locate(self, points, tol=1e-12):
        """Triangle index and barycentric coordinates for each point.

        Raises ``MeshError`` for points outside the mesh.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        p = self.vertices[self.triangles]
        tri_idx = np.empty(len(points), dtype=np.int64)
        bary = np.empty((len(points), 3))
        lo = p.min(axis=1) - tol
        hi = p.max(axis=1) + tol
        for i, x in enumerate(points):
            cand = np.flatnonzero(np.all((lo <= x) & (x <= hi), axis=1))
            for t in cand:
                lam = _barycentric(p[t], x)
                if lam.min() >= -1e-10:
                    tri_idx[i] = t
                    bary[i] = lam
                    break
            else:
                raise MeshError(f"point {x} is not inside the mesh")
        return tri_idx, bary


def _barycentric(tri, x):
    a, b, c = tri
    mat = np.column_stack([b - a, c - a])
    l12 = np.linalg.solve(mat, x - a)
    return np.array([1.0 - l12.sum(), l12[0], l12[1]])


@dataclass(frozen=True)
class DomainSpec:
    """Description of one of the test domains.

    ``l_shape`` is (-1, 1)^2 with the quadrant [0, 1) x (-1, 0] removed, so
    the reentrant corner sits at the origin with the two corner faces on the
    positive x-axis and the negative y-axis.  ``l_shape_with_hole`` also
    removes the open rectangle ``hole``.  ``square`` is the unit square.
    """

    kind: str = "l_shape_with_hole"
    hole: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = DEFAULT_HOLE
    target_h: float = 1.0 / 16

    def validate(self):
        if self.kind not in ("l_shape_with_hole", "l_shape", "square"):
            raise MeshError(f"unknown domain kind {self.kind!r}")
        if not self.target_h > 0:
            raise MeshError("target_h must be positive")
        if self.kind != "l_shape_with_hole":
            return
        if self.hole is None:
            raise MeshError("l_shape_with_hole needs a hole rectangle")
        (x0, y0), (x1, y1) = self.hole
        if not (x0 < x1 and y0 < y1):
            raise MeshError("hole corners must be (lower-left, upper-right)")
        if not (-1 < x0 and x1 < 1 and -1 < y0 and y1 < 1):
            raise MeshError("hole must lie strictly inside (-1, 1)^2")
        if x1 > 0 and y0 < 0:
            raise MeshError("hole overlaps the removed quadrant")
        # distance from the corner (origin) to the closed rectangle
        dx = max(x0, 0.0, -x1)
        dy = max(y0, 0.0, -y1)
        if np.hypot(dx, dy) <= SUPPORT_RADIUS:
            raise MeshError(f"hole intersects the disk r <= {SUPPORT_RADIUS} around the corner")

    @property
    def area(self) -> float:
        if self.kind == "square":
            return 1.0
        area = 3.0
        if self.kind == "l_shape_with_hole":
            (x0, y0), (x1, y1) = self.hole
            area -= (x1 - x0) * (y1 - y0)
        return area


def _subdivide(breaks, h):
    pts = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = int(np.ceil((b - a) / h - 1e-9))
        pts.extend(a + (b - a) * np.arange(1, n + 1) / n)
    return np.array(pts)


def _base_mesh(spec: DomainSpec) -> Mesh:
    if spec.kind == "square":
        xb = yb = [0.0, 1.0]
    else:
        xb = {-1.0, 0.0, 1.0}
        yb = {-1.0, 0.0, 1.0}
        if spec.kind == "l_shape_with_hole":
            (x0, y0), (x1, y1) = spec.hole
            xb |= {x0, x1}
            yb |= {y0, y1}
        xb, yb = sorted(xb), sorted(yb)
    xs = _subdivide(xb, BASE_H)
    ys = _subdivide(yb, BASE_H)

    xc = 0.5 * (xs[:-1] + xs[1:])
    yc = 0.5 * (ys[:-1] + ys[1:])
    XC, YC = np.meshgrid(xc, yc, indexing="ij")
    keep = np.ones(XC.shape, dtype=bool)
    if spec.kind != "square":
        keep &= ~((XC > 0) & (YC < 0))
    if spec.kind == "l_shape_with_hole":
        (x0, y0), (x1, y1) = spec.hole
        keep &= ~((XC > x0) & (XC < x1) & (YC > y0) & (YC < y1))

    nx, ny = len(xs), len(ys)
    grid_id = lambda i, j: i * ny + j  # noqa: E731
    I, J = np.nonzero(keep)
    v00, v10 = grid_id(I, J), grid_id(I + 1, J)
    v11, v01 = grid_id(I + 1, J + 1), grid_id(I, J + 1)
    tris = np.concatenate(
        [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
    )
    used, tris = np.unique(tris, return_inverse=True)
    tris = tris.reshape(-1, 3)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])[used]
    return Mesh(verts, tris)


def build_domain(spec: DomainSpec) -> Mesh:
    """Triangulate the domain described by ``spec`` with node spacing <= target_h."""
    spec.validate()
    mesh = _base_mesh(spec)
    while mesh.h > spec.target_h * (1 + 1e-9):
        mesh = uniform_refine(mesh)
    return mesh


def uniform_refine(mesh: Mesh) -> Mesh:
    """Split every triangle into four congruent children through edge midpoints."""
    nv = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    verts = np.vstack([mesh.vertices, mids])
    a, b, c = mesh.triangles.T
    mab, mbc, mca = (nv + mesh.tri_edges).T
    tris = np.concatenate(
        [
            np.column_stack([a, mab, mca]),
            np.column_stack([mab, b, mbc]),
            np.column_stack([mca, mbc, c]),
            np.column_stack([mab, mbc, mca]),
        ]
    )
    return Mesh(verts, tris)


@dataclass(frozen=True)
class MeshStats:
    h: float
    h_max: float
    quality_ratio: float
    n_vertices: int
    n_edges: int
    n_triangles: int
    n_boundary_loops: int
    betti: int


def mesh_stats(mesh: Mesh) -> MeshStats:
    return MeshStats(
        h=mesh.h,
        h_max=mesh.h_max,
        quality_ratio=mesh.quality_ratio,
        n_vertices=mesh.n_vertices,
        n_edges=mesh.n_edges,
        n_triangles=mesh.n_triangles,
        n_boundary_loops=mesh.n_boundary_loops,
        betti=mesh.betti,
    )


def reference_triangle() -> Mesh:
    """Single triangle (0,0), (1,0), (0,1)."""
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
