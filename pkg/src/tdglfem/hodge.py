"""Discrete divergence, discrete harmonic fields and the Hodge decomposition
of edge-element fields."""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .fe_spaces import SOURCE_DEGREE, FeSystem
from .forms import StaticMatrices, assemble_static


class HodgeError(RuntimeError):
    pass


def _cached(mats: StaticMatrices, name: str, build):
    cache = mats.__dict__.setdefault("_solvers", {})
    if name not in cache:
        cache[name] = build()
    return cache[name]


def _mass_lu(mats):
    return _cached(mats, "M_V", lambda: splu(mats.M_V.tocsc()))


def _grounded_laplacian_lu(mats):
    """LU of K_V with the first vertex value pinned to zero."""

    def build():
        k = mats.K_V.tolil(copy=True)
        k[0, :] = 0.0
        k[:, 0] = 0.0
        k[0, 0] = 1.0
        return splu(k.tocsc())

    return _cached(mats, "K_V0", build)


def discrete_divergence(sys: FeSystem, a, mats: Optional[StaticMatrices] = None):
    """zeta in V with (zeta, chi) = -(a, grad chi) for all chi in V."""
    mats = mats if mats is not None else assemble_static(sys)
    return -_mass_lu(mats).solve(mats.B_div @ np.asarray(a, dtype=float))


def project_edge(sys: FeSystem, F: Callable, mats: Optional[StaticMatrices] = None,
                 degree: int = SOURCE_DEGREE):
    """L2 projection of a vector field ``F(x, y)`` onto N.

    Unlike the canonical interpolant, (P F, grad chi) = (F, grad chi) for every
    chi in V, so the discrete divergence of P F is the L2 projection of div F
    whenever F . n = 0 on the boundary.
    """
    mats = mats if mats is not None else assemble_static(sys)
    q = sys.quad(degree)
    vals = np.asarray(F(q.xs, q.ys), dtype=float)
    local = np.einsum("fq,fqd,fqkd->fk", q.w, vals, q.n_val)
    b = np.zeros(sys.n_N)
    np.add.at(b, sys.dofs_N.ravel(), local.ravel())
    return _cached(mats, "M_N", lambda: splu(mats.M_N.tocsc())).solve(b)


def gradient_potential(sys: FeSystem, a, mats: StaticMatrices):
    """theta minimising ||a - G theta|| in the edge mass norm (theta[0] = 0)."""
    rhs = mats.G.T @ (mats.M_N @ a)
    rhs = np.array(rhs, dtype=float)
    rhs[0] = 0.0
    return _grounded_laplacian_lu(mats).solve(rhs)


# ---------------------------------------------------------------------------
# harmonic fields


def _spanning_tree_edges(mesh) -> np.ndarray:
    """Boolean mask of edges in a BFS spanning tree of the vertex graph."""
    nv = mesh.n_vertices
    adj: List[List[tuple]] = [[] for _ in range(nv)]
    for e, (a, b) in enumerate(mesh.edges):
        adj[a].append((b, e))
        adj[b].append((a, e))
    seen = np.zeros(nv, dtype=bool)
    tree = np.zeros(mesh.n_edges, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w, e in adj[v]:
            if not seen[w]:
                seen[w] = True
                tree[e] = True
                queue.append(w)
    if not seen.all():
        raise HodgeError("mesh vertex graph is not connected")
    return tree


def cohomology_generators(sys: FeSystem) -> np.ndarray:
    """Closed, non-exact edge cochains, one per independent hole.

    Tree-cotree construction: a spanning tree of the vertex graph, and a
    spanning tree of the dual graph (triangles plus one exterior node joined
    through every boundary edge) built from the remaining edges.  Each edge
    left over generates one cochain: it is set to one, tree edges to zero,
    and the cotree edges are fixed leaf-first so that the circulation
    around every triangle vanishes.
    """
    mesh = sys.mesh
    tree = _spanning_tree_edges(mesh)
    nf = mesh.n_triangles
    outer = nf
    et = mesh.edge_triangles()
    other = np.where(et[:, 1] >= 0, et[:, 1], outer)

    # BFS over the dual graph from the exterior node, avoiding tree edges
    dual_adj: List[List[tuple]] = [[] for _ in range(nf + 1)]
    for e in np.flatnonzero(~tree):
        a, b = et[e, 0], other[e]
        dual_adj[a].append((b, e))
        dual_adj[b].append((a, e))
    parent_edge = np.full(nf + 1, -1, dtype=np.int64)
    seen = np.zeros(nf + 1, dtype=bool)
    seen[outer] = True
    order = []
    queue = deque([outer])
    cotree = np.zeros(mesh.n_edges, dtype=bool)
    while queue:
        f = queue.popleft()
        order.append(f)
        for g, e in dual_adj[f]:
            if not seen[g]:
                seen[g] = True
                parent_edge[g] = e
                cotree[e] = True
                queue.append(g)
    if not seen.all():
        raise HodgeError("dual graph is not connected")

    leftover = np.flatnonzero(~tree & ~cotree)
    gens = []
    for e0 in leftover:
        v = np.zeros(mesh.n_edges)
        v[e0] = 1.0
        known = ~cotree.copy()
        # leaves first: a triangle is processed after all of its children
        for f in reversed(order):
            if f == outer:
                continue
            pe = parent_edge[f]
            edges = mesh.tri_edges[f]
            signs = mesh.tri_edge_sign[f].astype(float)
            k = int(np.flatnonzero(edges == pe)[0])
            mask = np.arange(3) != k
            if not known[edges[mask]].all():
                raise HodgeError("cotree traversal out of order")
            v[pe] = -np.dot(signs[mask], v[edges[mask]]) / signs[k]
            known[pe] = True
        gens.append(v)
    gens = np.array(gens).reshape(len(gens), mesh.n_edges)
    # higher-order dofs (edge-bubble gradients) of a Whitney cocycle are zero
    return np.hstack([gens, np.zeros((len(gens), sys.n_N - mesh.n_edges))])


@dataclass
class HarmonicBasis:
    fields: np.ndarray  # (beta, n_N)
    gram: np.ndarray

    def __len__(self):
        return len(self.fields)


def harmonic_basis(sys: FeSystem, mats: Optional[StaticMatrices] = None) -> HarmonicBasis:
    """L2-orthonormal basis of the discrete harmonic fields

    X_h = {v in N : curl v = 0, (v, grad chi) = 0 for all chi in V}.
    """
    mats = mats if mats is not None else assemble_static(sys)
    beta = sys.mesh.betti
    gens = cohomology_generators(sys)
    if len(gens) != beta:
        raise HodgeError(f"found {len(gens)} cohomology generators, expected Betti number {beta}")
    if beta == 0:
        return HarmonicBasis(np.zeros((0, sys.n_N)), np.zeros((0, 0)))
    w = np.array([v - mats.G @ gradient_potential(sys, v, mats) for v in gens])
    # orthonormalise in the L2 inner product (Cholesky of the Gram matrix)
    gram = w @ (mats.M_N @ w.T)
    L = np.linalg.cholesky(gram)
    w = np.linalg.solve(L, w)
    return HarmonicBasis(w, w @ (mats.M_N @ w.T))


@dataclass
class HodgeParts:
    c: np.ndarray  # orthogonal to every curl-free field
    grad: np.ndarray  # G theta
    harmonic: np.ndarray
    theta: np.ndarray
    alpha: np.ndarray


def hodge_decompose(sys: FeSystem, a, basis: HarmonicBasis,
                    mats: Optional[StaticMatrices] = None) -> HodgeParts:
    """a = c + G theta + sum_j alpha_j w_j with L2-orthogonal parts."""
    mats = mats if mats is not None else assemble_static(sys)
    a = np.asarray(a, dtype=float)
    th = gradient_potential(sys, a, mats)
    grad = mats.G @ th
    ma = mats.M_N @ a
    norms = np.einsum("je,je->j", basis.fields, (mats.M_N @ basis.fields.T).T)
    alpha = (basis.fields @ ma) / norms if len(basis) else np.zeros(0)
    harm = alpha @ basis.fields if len(basis) else np.zeros_like(a)
    return HodgeParts(a - grad - harm, grad, harm, th, alpha)


# ---------------------------------------------------------------------------
# embedding diagnostic


def lq_norm_edge(sys: FeSystem, a, q: float = 4.0) -> float:
    qd = sys.quad(SOURCE_DEGREE)
    val = np.linalg.norm(sys.edge_at_qp(a, SOURCE_DEGREE), axis=-1)
    return float(np.sum(qd.w * val**q) ** (1.0 / q))


def curl_div_norm(sys: FeSystem, a, mats: StaticMatrices) -> float:
    """||a|| + ||curl a|| + ||div_h a|| (all L2)."""
    div = discrete_divergence(sys, a, mats)
    # clip roundoff: a curl-free field can give a tiny negative quadratic form
    sq = [max(float(v), 0.0) for v in (a @ (mats.M_N @ a), a @ (mats.K_curl @ a), div @ (mats.M_V @ div))]
    return float(sum(np.sqrt(sq)))


@dataclass
class EmbeddingRow:
    level: int
    h: float
    ratio: float


def embedding_diagnostic(systems: Sequence[FeSystem], sampler: Callable, q: float = 4.0):
    """Max over sampled fields of ||a||_{L^q} / ||a||_{H(curl, div_h)} per level.

    ``sampler(sys, mats)`` returns an iterable of edge coefficient vectors.
    """
    rows = []
    for lvl, sys in enumerate(systems):
        mats = assemble_static(sys)
        best = 0.0
        for a in sampler(sys, mats):
            a = np.asarray(a, dtype=float)
            den = curl_div_norm(sys, a, mats)
            if den == 0:
                raise ValueError("zero field: ratio undefined")
            best = max(best, lq_norm_edge(sys, a, q) / den)
        rows.append(EmbeddingRow(lvl, sys.mesh.h, best))
    return rows


def write_embedding_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "h", "ratio"])
        for r in rows:
            w.writerow([r.level, f"{r.h:.12e}", f"{r.ratio:.12e}"])


def edge_loop_circulation(sys: FeSystem, a, vertex_loop: Sequence[int]) -> float:
    """Sum of signed edge dofs along a closed vertex path."""
    lookup = {tuple(e): i for i, e in enumerate(sys.mesh.edges.tolist())}
    total = 0.0
    loop = list(vertex_loop)
    for u, v in zip(loop, loop[1:] + loop[:1]):
        if u < v:
            total += a[lookup[(u, v)]]
        else:
            total -= a[lookup[(v, u)]]
    return total
