"""Nodal Galerkin comparator for the vector potential.

A is approximated by continuous piecewise-linear vectors with the normal
component A . n = 0 imposed at boundary vertices, and the potential equation
is discretised with

    (A^{n+1}, a)/tau + (div A^{n+1}, div a) + (curl A^{n+1}, curl a) = rhs(a).

The electric potential is not a separate unknown; wherever the order
parameter equation needs phi^n it uses -div A^n (constant per triangle).
On domains with reentrant corners this H^1-conforming discretisation
converges to the wrong vector potential, which is the behaviour this module
exists to reproduce.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from . import forms
from .fe_spaces import FORM_DEGREE, SOURCE_DEGREE, FeSystem, State
from .forms import assemble_local, assemble_vector, supercurrent
from .mms import ErrorRow, ManufacturedSolution
from .sources import ZeroSources
from .tdgl import InitialData, SolverConfig, solve_psi


class NodalVectorSpace:
    """Vector P1 space; dof ``2*v + d`` is component d at vertex v."""

    def __init__(self, sys: FeSystem):
        self.sys = sys
        mesh = sys.mesh
        self.n = 2 * mesh.n_vertices
        tri = mesh.triangles
        self.dofs = np.stack([2 * tri, 2 * tri + 1], axis=2).reshape(-1, 6)  # x0 y0 x1 y1 x2 y2
        self.constraint = self._normal_constraints()

    def _normal_constraints(self, tol=1e-8):
        """Sparse P (2V x n_free) with A = P a_free and A . n = 0 on the boundary."""
        mesh = self.sys.mesh
        nv = mesh.n_vertices
        normals = [[] for _ in range(nv)]
        be = mesh.edges[mesh.boundary_edges]
        for (a, b), n in zip(be, mesh.boundary_normals()):
            normals[a].append(n)
            normals[b].append(n)
        rows, cols, vals = [], [], []
        col = 0
        for v in range(nv):
            ns = []
            for n in normals[v]:
                if not any(abs(abs(n @ m) - 1) < tol for m in ns):
                    ns.append(n)
            if not ns:
                rows += [2 * v, 2 * v + 1]
                cols += [col, col + 1]
                vals += [1.0, 1.0]
                col += 2
            elif len(ns) == 1:
                n = ns[0]
                rows += [2 * v, 2 * v + 1]
                cols += [col, col]
                vals += [-n[1], n[0]]
                col += 1
            # two independent normals: the vertex value is zero
        return sparse.csr_matrix((vals, (rows, cols)), shape=(2 * nv, col))

    def div_curl_rows(self):
        """Per-triangle coefficient rows (F, 6) of div and curl."""
        gl = self.sys.grad_lam
        div = np.stack([gl[:, :, 0], gl[:, :, 1]], axis=2).reshape(-1, 6)
        curl = np.stack([-gl[:, :, 1], gl[:, :, 0]], axis=2).reshape(-1, 6)
        return div, curl

    def at_qp(self, a, degree=FORM_DEGREE):
        q = self.sys.quad(degree)
        comp = np.asarray(a).reshape(-1, 2)[self.sys.mesh.triangles]  # (F, 3, 2)
        return np.einsum("qk,fkd->fqd", q.bary, comp)

    def div(self, a):
        d, _ = self.div_curl_rows()
        return np.einsum("fk,fk->f", np.asarray(a)[self.dofs], d)

    def curl(self, a):
        _, c = self.div_curl_rows()
        return np.einsum("fk,fk->f", np.asarray(a)[self.dofs], c)

    def interpolate(self, F):
        x, y = self.sys.mesh.vertices.T
        return np.asarray(F(x, y), dtype=float).reshape(-1, 2).ravel()

    def matrices(self):
        sys = self.sys
        q = sys.quad(FORM_DEGREE)
        m1 = np.einsum("fq,qi,qj->fij", q.w, q.bary, q.bary)
        mass = np.zeros((len(m1), 6, 6))
        mass[:, 0::2, 0::2] = m1
        mass[:, 1::2, 1::2] = m1
        d, c = self.div_curl_rows()
        area = sys.areas[:, None, None]
        dd = area * d[:, :, None] * d[:, None, :]
        cc = area * c[:, :, None] * c[:, None, :]
        shape = (self.n, self.n)
        return (assemble_local(mass, self.dofs, shape),
                assemble_local(dd, self.dofs, shape),
                assemble_local(cc, self.dofs, shape))


@dataclass
class GalerkinState:
    psi: np.ndarray
    a: np.ndarray  # nodal vector dofs
    n: int = 0
    t: float = 0.0


@dataclass
class GalerkinTrajectory:
    final: GalerkinState
    newton_iterations: list
    errors: Optional[ErrorRow] = None


class GalerkinStepper:
    def __init__(self, sys: FeSystem, config: SolverConfig, sources=None):
        config.validate()
        self.sys = sys
        self.cfg = config
        self.space = NodalVectorSpace(sys)
        self.sources = sources if sources is not None else ZeroSources()
        self.mats = forms.assemble_static(sys)
        self.M, self.Kdiv, self.Kcurl = self.space.matrices()
        P = self.space.constraint
        lhs = P.T @ (self.M / config.tau + self.Kdiv + self.Kcurl) @ P
        self._lu = splu(lhs.tocsc())

    def rhs_A(self, state: GalerkinState, t_new):
        sys, cfg, sp = self.sys, self.cfg, self.space
        q = sys.quad(SOURCE_DEGREE)
        psi_qp = sys.nodal_at_qp(state.psi, SOURCE_DEGREE)
        grad_psi = sys.nodal_grad(state.psi)[:, None, :]
        a_qp = sp.at_qp(state.a, SOURCE_DEGREE)
        force = -supercurrent(psi_qp, grad_psi, a_qp, cfg.kappa)
        _, gvec, H = self.sources.evaluate(q.xs, q.ys, t_new)
        if gvec is not None:
            force = force + gvec
        # vector test functions: component d of P1 basis k
        local = np.einsum("fqd,qk,fq->fkd", force, q.bary, q.w).reshape(-1, 6)
        if H is not None:
            _, c = sp.div_curl_rows()
            hint = np.einsum("fq,fq->f", q.w, np.broadcast_to(H, q.w.shape))
            local = local + hint[:, None] * c
        out = assemble_vector(local, sp.dofs, sp.n)
        return out + self.M @ state.a / cfg.tau

    def step(self, state: GalerkinState) -> GalerkinState:
        sys, cfg, sp = self.sys, self.cfg, self.space
        t_new = (state.n + 1) * cfg.tau
        P = sp.constraint
        a_new = P @ self._lu.solve(P.T @ self.rhs_A(state, t_new))
        phi_old = -sp.div(state.a)[:, None]
        b = forms.rhs_psi(sys, state.psi, phi_old, t_new, cfg.eta, cfg.kappa, self.sources)
        psi, its = solve_psi(sys, self.mats, cfg, state.psi, sp.at_qp(a_new, FORM_DEGREE), b)
        new = GalerkinState(psi, a_new, state.n + 1, t_new)
        new.newton_iterations = its
        return new


def galerkin_error_norms(sys: FeSystem, space: NodalVectorSpace, state: GalerkinState,
                         exact: ManufacturedSolution, t: float, tau=float("nan")) -> ErrorRow:
    q = sys.quad(SOURCE_DEGREE)
    psi_h = sys.nodal_at_qp(state.psi, SOURCE_DEGREE)
    a_h = space.at_qp(state.a, SOURCE_DEGREE)
    b_h = space.curl(state.a)[:, None]
    psi, A, B = exact.reference(q.xs, q.ys, t)

    def l2(d2):
        return float(np.sqrt(np.sum(q.w * d2)))

    return ErrorRow(sys.mesh.h, tau, l2(np.abs(psi_h - psi) ** 2),
                    l2((np.abs(psi_h) - np.abs(psi)) ** 2),
                    l2(np.sum((a_h - A) ** 2, axis=-1)), l2((b_h - B) ** 2))


def galerkin_run(sys: FeSystem, config: SolverConfig, initial: Optional[InitialData] = None,
                 sources=None, exact: Optional[ManufacturedSolution] = None) -> GalerkinTrajectory:
    """Same decoupled stepping as the mixed scheme, with nodal A."""
    stepper = GalerkinStepper(sys, config, sources)
    initial = initial if initial is not None else InitialData()
    psi0 = (sys.interpolate_nodal(initial.psi).astype(complex) if initial.psi is not None
            else np.zeros(sys.n_S, dtype=complex))
    a0 = (stepper.space.interpolate(initial.A) if initial.A is not None
          else np.zeros(stepper.space.n))
    # keep the interpolated initial value inside the constrained space
    P = stepper.space.constraint
    a0 = P @ (P.T @ a0)
    state = GalerkinState(psi0, a0)
    its = []
    for _ in range(config.n_steps):
        state = stepper.step(state)
        its.append(state.newton_iterations)
    traj = GalerkinTrajectory(state, its)
    if exact is not None:
        traj.errors = galerkin_error_norms(sys, stepper.space, state, exact, state.t, config.tau)
    return traj
