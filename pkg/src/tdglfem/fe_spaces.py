"""Finite element spaces on a triangle mesh.

Three spaces are used by the solver:

``S``  complex continuous piecewise-linear functions (order parameter),
``V``  real continuous Lagrange functions of degree k + 1 (electric potential),
``N``  H(curl)-conforming edge functions (vector potential).

Two orders are available.  ``k = 0`` pairs P1 with the lowest-order Nedelec
(Whitney) space, one dof per edge.  ``k = 1`` pairs P2 with the degree-1
Nedelec space of the second kind (all linear vector fields), two dofs per
edge.  Both use hierarchical bases:

* V: vertex hat functions, then (k = 1) one bubble ``4 lambda_a lambda_b``
  per edge;
* N: one Whitney function ``lambda_a grad(lambda_b) - lambda_b grad(lambda_a)``
  per globally oriented edge a -> b, then (k = 1) the gradient of each edge
  bubble.

With these bases grad(V) is contained in N and the gradient inclusion is the
vertex-edge incidence matrix plus an identity block on the bubbles.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np
from scipy import sparse

from .mesh import Mesh
from .quadrature import segment_rule, triangle_rule

#: degree used for assembling bilinear forms
FORM_DEGREE = 6
#: degree used for source terms, energies and error norms
SOURCE_DEGREE = 8


@dataclass
class QuadData:
    """Quadrature points and basis values on every triangle for one rule."""

    degree: int
    bary: np.ndarray  # (Q, 3)
    w: np.ndarray  # (F, Q) physical weights
    x: np.ndarray  # (F, Q, 2) physical points
    v_val: np.ndarray  # (F, Q, nv) V basis values
    v_grad: np.ndarray  # (F, Q, nv, 2)
    n_val: np.ndarray  # (F, Q, nn, 2) N basis values

    def __post_init__(self):
        # fixed arrays so callers can recognise repeated queries by identity
        self.xs = np.ascontiguousarray(self.x[..., 0])
        self.ys = np.ascontiguousarray(self.x[..., 1])

    @property
    def whitney(self):
        return self.n_val[:, :, :3]


class FeSystem:
    """Degree-of-freedom maps and basis evaluators for S, V and N."""

    def __init__(self, mesh: Mesh, k: int = 1):
        if k not in (0, 1):
            raise ValueError("only k = 0 and k = 1 are implemented")
        self.mesh = mesh
        self.k = k
        tri = mesh.triangles
        p = mesh.vertices[tri]
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        inv = np.linalg.inv(jac)  # rows: grad(lambda_1), grad(lambda_2)
        g0 = -(inv[:, 0] + inv[:, 1])
        self.grad_lam = np.stack([g0, inv[:, 0], inv[:, 1]], axis=1)  # (F, 3, 2)
        self.areas = mesh.areas
        self.edge_sign = mesh.tri_edge_sign.astype(float)

        gl = self.grad_lam
        gj = np.roll(gl, -1, axis=1)
        cross = gl[..., 0] * gj[..., 1] - gl[..., 1] * gj[..., 0]
        self.whitney_curl = 2.0 * cross * self.edge_sign  # (F, 3)
        nn = 3 * (k + 1)
        self.n_curl = np.zeros((mesh.n_triangles, nn))
        self.n_curl[:, :3] = self.whitney_curl

        nv_, ne = mesh.n_vertices, mesh.n_edges
        if k == 0:
            self.dofs_V = tri
            self.dofs_N = mesh.tri_edges
        else:
            self.dofs_V = np.hstack([tri, nv_ + mesh.tri_edges])
            self.dofs_N = np.hstack([mesh.tri_edges, ne + mesh.tri_edges])
        self._quad: Dict[int, QuadData] = {}

    # ------------------------------------------------------------------
    @property
    def n_S(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_V(self) -> int:
        return self.mesh.n_vertices + self.k * self.mesh.n_edges

    @property
    def n_N(self) -> int:
        return (1 + self.k) * self.mesh.n_edges

    def n_dofs(self, space: str) -> int:
        return {"S": self.n_S, "V": self.n_V, "N": self.n_N}[space]

    def dofs(self, space: str) -> np.ndarray:
        """(F, n_local) local-to-global dof map."""
        if space == "S":
            return self.mesh.triangles
        if space == "V":
            return self.dofs_V
        if space == "N":
            return self.dofs_N
        raise ValueError(f"unknown space {space!r}")

    # --- local bases at arbitrary barycentric points --------------------
    def basis_V(self, tri, bary):
        """Values (P, n) and gradients (P, n, 2) of the V basis."""
        gl = self.grad_lam[tri]
        if self.k == 0:
            return bary, gl
        lj = np.roll(bary, -1, axis=1)
        gj = np.roll(gl, -1, axis=1)
        val = np.hstack([bary, 4 * bary * lj])
        grad = np.concatenate(
            [gl, 4 * (bary[:, :, None] * gj + lj[:, :, None] * gl)], axis=1
        )
        return val, grad

    def basis_N(self, tri, bary):
        """Values (P, n, 2) and scalar curls (P, n) of the N basis."""
        gl = self.grad_lam[tri]
        gj = np.roll(gl, -1, axis=1)
        li = bary[:, :, None]
        lj = np.roll(bary, -1, axis=1)[:, :, None]
        whit = (li * gj - lj * gl) * self.edge_sign[tri][:, :, None]
        if self.k == 0:
            return whit, self.n_curl[tri]
        bub = 4 * (li * gj + lj * gl)
        return np.concatenate([whit, bub], axis=1), self.n_curl[tri]

    def quad(self, degree: int = FORM_DEGREE) -> QuadData:
        if degree not in self._quad:
            rule = triangle_rule(degree)
            nf, nq = self.mesh.n_triangles, len(rule)
            p = self.mesh.vertices[self.mesh.triangles]
            x = np.einsum("qk,fkd->fqd", rule.bary, p)
            w = 2.0 * self.areas[:, None] * rule.weights[None, :]
            tri = np.repeat(np.arange(nf), nq)
            bary = np.tile(rule.bary, (nf, 1))
            vv, vg = self.basis_V(tri, bary)
            nv, _ = self.basis_N(tri, bary)
            self._quad[degree] = QuadData(
                degree, rule.bary, w, x,
                vv.reshape(nf, nq, -1), vg.reshape(nf, nq, -1, 2), nv.reshape(nf, nq, -1, 2),
            )
        return self._quad[degree]

    # --- fields at quadrature points ----------------------------------
    def nodal_at_qp(self, c, degree: int = FORM_DEGREE):
        """P1 field (S space, or the vertex part of V) at quadrature points, (F, Q)."""
        return np.asarray(c)[self.mesh.triangles] @ self.quad(degree).bary.T

    def nodal_grad(self, c):
        """Elementwise-constant gradient of a P1 field, (F, 2)."""
        return np.einsum("fk,fkd->fd", np.asarray(c)[self.mesh.triangles], self.grad_lam)

    def v_at_qp(self, c, degree: int = FORM_DEGREE):
        return np.einsum("fk,fqk->fq", np.asarray(c)[self.dofs_V], self.quad(degree).v_val)

    def v_grad_at_qp(self, c, degree: int = FORM_DEGREE):
        return np.einsum("fk,fqkd->fqd", np.asarray(c)[self.dofs_V], self.quad(degree).v_grad)

    def edge_at_qp(self, a, degree: int = FORM_DEGREE):
        return np.einsum("fk,fqkd->fqd", np.asarray(a)[self.dofs_N], self.quad(degree).n_val)

    def edge_curl(self, a):
        """Elementwise-constant scalar curl of an N field, (F,)."""
        return np.einsum("fk,fk->f", np.asarray(a)[self.dofs_N], self.n_curl)

    # --- discrete operators -------------------------------------------
    def gradient_matrix(self) -> sparse.csr_matrix:
        """Inclusion grad: V -> N."""
        e = self.mesh.edges
        ne = self.mesh.n_edges
        rows = np.repeat(np.arange(ne), 2)
        cols = e.ravel()
        vals = np.tile([-1.0, 1.0], ne)
        if self.k == 1:
            rows = np.concatenate([rows, ne + np.arange(ne)])
            cols = np.concatenate([cols, self.mesh.n_vertices + np.arange(ne)])
            vals = np.concatenate([vals, np.ones(ne)])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_N, self.n_V))

    def curl_matrix(self) -> sparse.csr_matrix:
        """N coefficients -> elementwise scalar curl, (F, n_N)."""
        f = self.mesh.n_triangles
        nl = self.dofs_N.shape[1]
        rows = np.repeat(np.arange(f), nl)
        return sparse.csr_matrix(
            (self.n_curl.ravel(), (rows, self.dofs_N.ravel())), shape=(f, self.n_N)
        )

    # --- interpolation ------------------------------------------------
    def interpolate_nodal(self, f: Callable, space: str = "S", t=None):
        """Lagrange interpolant of a scalar field ``f(x, y)`` (or ``f(x, y, t)``).

        For the P2 space the bubble coefficients follow from the edge
        midpoint values.
        """
        x, y = self.mesh.vertices.T
        call = (lambda a, b: f(a, b)) if t is None else (lambda a, b: f(a, b, t))
        vals = np.broadcast_to(np.asarray(call(x, y)), x.shape).copy()
        if space == "S" or (space == "V" and self.k == 0):
            return vals
        if space != "V":
            raise ValueError(f"nodal interpolation is not defined for space {space!r}")
        e = self.mesh.edges
        mid = 0.5 * (self.mesh.vertices[e[:, 0]] + self.mesh.vertices[e[:, 1]])
        mvals = np.broadcast_to(np.asarray(call(mid[:, 0], mid[:, 1])), (len(e),))
        bubble = mvals - 0.5 * (vals[e[:, 0]] + vals[e[:, 1]])
        return np.concatenate([vals, bubble])

    def interpolate_edge(self, F: Callable, t=None, n_gauss: int = 3):
        """Canonical edge interpolant.

        The Whitney coefficient of edge e is the tangential integral of F
        over e; for k = 1 the bubble coefficient is (3/4) times the moment
        of F . (b - a) against (1 - 2s), s the arc parameter from a to b.
        """
        s, w = segment_rule(n_gauss)
        a = self.mesh.vertices[self.mesh.edges[:, 0]]
        d = self.mesh.edge_vectors
        pts = a[:, None, :] + s[None, :, None] * d[:, None, :]
        x, y = pts[..., 0].ravel(), pts[..., 1].ravel()
        vals = F(x, y) if t is None else F(x, y, t)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (len(x), 2)).reshape(len(d), len(s), 2)
        tang = np.einsum("eqd,ed->eq", vals, d)
        whit = tang @ w
        if self.k == 0:
            return whit
        return np.concatenate([whit, 0.75 * (tang @ (w * (1 - 2 * s)))])

    # --- point evaluation ---------------------------------------------
    def evaluate(self, coeffs, space: str, points):
        """Values of a discrete field at arbitrary points.

        Returns a dict: for ``S``/``V`` keys ``value`` and ``grad``; for ``N``
        keys ``value`` (vectors) and ``curl``.  Raises ``MeshError`` for
        points outside the mesh.
        """
        tri, bary = self.mesh.locate(points)
        coeffs = np.asarray(coeffs)
        if space == "S":
            loc = coeffs[self.mesh.triangles[tri]]
            return {
                "value": np.einsum("pk,pk->p", loc, bary),
                "grad": np.einsum("pk,pkd->pd", loc, self.grad_lam[tri]),
            }
        if space == "V":
            val, grad = self.basis_V(tri, bary)
            loc = coeffs[self.dofs_V[tri]]
            return {"value": np.einsum("pk,pk->p", loc, val),
                    "grad": np.einsum("pk,pkd->pd", loc, grad)}
        if space == "N":
            val, curl = self.basis_N(tri, bary)
            loc = coeffs[self.dofs_N[tri]]
            return {"value": np.einsum("pk,pkd->pd", loc, val),
                    "curl": np.einsum("pk,pk->p", loc, curl)}
        raise ValueError(f"unknown space {space!r}")


def build_system(mesh: Mesh, k: int = 1) -> FeSystem:
    return FeSystem(mesh, k)


@dataclass
class State:
    """Coefficients of (psi, phi, A) at one time level."""

    psi: np.ndarray
    phi: np.ndarray
    a: np.ndarray
    n: int = 0
    t: float = 0.0
    extra: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, sys: FeSystem) -> "State":
        return cls(
            np.zeros(sys.n_S, dtype=complex), np.zeros(sys.n_V), np.zeros(sys.n_N)
        )

    def check(self, sys: FeSystem):
        if self.psi.shape != (sys.n_S,) or self.phi.shape != (sys.n_V,) or self.a.shape != (sys.n_N,):
            raise ValueError("state vector lengths do not match the finite element system")


def magnetic_field(sys: FeSystem, state: State) -> np.ndarray:
    """B_h = curl A_h, constant on each triangle."""
    return sys.edge_curl(state.a)


def electric_field(sys: FeSystem, state: State, previous: State, tau: float,
                   degree: int = FORM_DEGREE) -> np.ndarray:
    """E_h = -(A^{n+1} - A^n)/tau - grad(phi^{n+1}) at quadrature points, (F, Q, 2)."""
    da = sys.edge_at_qp((state.a - previous.a) / tau, degree)
    return -da - sys.v_grad_at_qp(state.phi, degree)
