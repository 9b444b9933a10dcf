"""Decoupled backward-Euler stepping for the Ginzburg-Landau system.

Each step first solves the linear saddle-point system for the electric
potential and the vector potential (using the order parameter of the old
level) and then the nonlinear, monotone system for the new order parameter
(using the new vector potential).
"""
from __future__ import annotations

import csv
import logging
import dataclasses
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu, spsolve

from . import forms
from .fe_spaces import FORM_DEGREE, SOURCE_DEGREE, FeSystem, State
from .forms import (
    StaticMatrices,
    assemble_local,
    complex_block,
    covariant_parts,
    theta,  # noqa: F401  (re-exported)
    to_complex,
    to_real,
)
from .hodge import discrete_divergence
from .sources import ZeroSources

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """A time step could not be completed."""


class NewtonError(SolverError):
    pass


@dataclass
class SolverConfig:
    eta: float = 1.0
    kappa: float = 1.0
    tau: float = 0.01
    T: float = 1.0
    newton_tol: float = 1e-10
    newton_maxit: int = 20
    linear_solver: str = "splu"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not (self.eta > 0 and self.kappa > 0):
            raise ValueError("eta and kappa must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.tau < self.eta:
            raise ValueError(f"tau = {self.tau} must be smaller than eta = {self.eta}")
        if not (0 < self.newton_tol <= 1e-6):
            raise ValueError("newton_tol must lie in (0, 1e-6]")
        if self.newton_maxit < 1:
            raise ValueError("newton_maxit must be at least 1")
        if self.linear_solver not in ("splu", "spsolve"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.tau))


@dataclass
class InitialData:
    """Initial order parameter and vector potential as functions of (x, y)."""

    psi: Optional[Callable] = None
    A: Optional[Callable] = None
    div_A: Optional[Callable] = None

    def discretize(self, sys: FeSystem) -> State:
        state = State.zeros(sys)
        if self.psi is not None:
            state.psi = sys.interpolate_nodal(self.psi).astype(complex)
        if self.A is not None:
            state.a = sys.interpolate_edge(self.A)
        if self.div_A is not None:
            state.phi = -sys.interpolate_nodal(self.div_A, "V").astype(float)
        return state


ENERGY_COLUMNS = ("step", "time", "G", "kinetic", "condensation", "field", "gauge")


@dataclass
class EnergyTrace:
    step: List[int] = dataclasses.field(default_factory=list)
    time: List[float] = dataclasses.field(default_factory=list)
    G: List[float] = dataclasses.field(default_factory=list)
    kinetic: List[float] = dataclasses.field(default_factory=list)
    condensation: List[float] = dataclasses.field(default_factory=list)
    field: List[float] = dataclasses.field(default_factory=list)
    gauge: List[float] = dataclasses.field(default_factory=list)

    def append(self, n, t, total, parts):
        self.step.append(n)
        self.time.append(t)
        self.G.append(total)
        for k in ("kinetic", "condensation", "field", "gauge"):
            getattr(self, k).append(parts[k])

    @property
    def increments(self) -> np.ndarray:
        """D_tau G at each step (needs the time step to be uniform)."""
        g = np.asarray(self.G)
        t = np.asarray(self.time)
        return np.diff(g) / np.diff(t)

    def step_inequality_margin(self, tau, eta, kappa) -> np.ndarray:
        """tau eta kappa^2 G^n + 1e-8 (1 + G^n) - (G^{n+1} - G^n); must stay >= 0."""
        g = np.asarray(self.G)
        return tau * eta * kappa**2 * g[:-1] + 1e-8 * (1 + g[:-1]) - np.diff(g)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(ENERGY_COLUMNS)
            for row in zip(*(getattr(self, c) for c in ENERGY_COLUMNS)):
                w.writerow([row[0]] + [f"{v:.12e}" for v in row[1:]])


def discrete_energy(sys: FeSystem, state: State, kappa: float = 1.0, H=None, t=None):
    """Discrete energy G_h and its four summands.

    ``H`` is a constant, a callable ``H(x, y, t)``, or None for zero.
    """
    q = sys.quad(SOURCE_DEGREE)
    psi = sys.nodal_at_qp(state.psi, SOURCE_DEGREE)
    gpsi = sys.nodal_grad(state.psi)[:, None, :]
    a = sys.edge_at_qp(state.a, SOURCE_DEGREE)
    cov = 1j / kappa * gpsi + a * psi[..., None]
    kin = 0.5 * np.sum(q.w * np.sum(np.abs(cov) ** 2, axis=-1))
    cond = 0.25 * np.sum(q.w * (np.abs(psi) ** 2 - 1.0) ** 2)
    curl = sys.edge_curl(state.a)[:, None]
    if H is None:
        hq = 0.0
    elif callable(H):
        hq = H(q.xs, q.ys, state.t if t is None else t)
        hq = 0.0 if hq is None else hq
    else:
        hq = float(H)
    fld = 0.5 * np.sum(q.w * (curl - hq) ** 2)
    phi = sys.v_at_qp(state.phi, SOURCE_DEGREE)
    gauge = 0.5 * np.sum(q.w * phi**2)
    parts = {"kinetic": float(kin), "condensation": float(cond), "field": float(fld), "gauge": float(gauge)}
    return sum(parts.values()), parts


class Stepper:
    """Holds the assembled operators for one mesh and configuration."""

    def __init__(self, sys: FeSystem, config: SolverConfig, sources=None,
                 mats: Optional[StaticMatrices] = None):
        config.validate()
        self.sys = sys
        self.cfg = config
        self.sources = sources if sources is not None else ZeroSources()
        self.mats = mats if mats is not None else forms.assemble_static(sys)
        m = self.mats
        tau = config.tau
        self.mixed_matrix = sparse.bmat(
            [[m.M_V, -m.B_div], [m.B_div.T, m.M_N / tau + m.K_curl]], format="csc"
        )
        self._mixed_lu = splu(self.mixed_matrix) if config.linear_solver == "splu" else None
        self._mass_block = complex_block(m.M_S)

    # ------------------------------------------------------------------
    def _solve_mixed(self, rhs):
        if self._mixed_lu is not None:
            x = self._mixed_lu.solve(rhs)
        else:
            x = spsolve(self.mixed_matrix, rhs)
        if not np.all(np.isfinite(x)):
            raise SolverError("mixed system solve produced non-finite values")
        nb = np.linalg.norm(rhs)
        if nb > 0:
            res = np.linalg.norm(self.mixed_matrix @ x - rhs) / nb
            if res > 1e-11:
                # one step of iterative refinement
                x = x + (self._mixed_lu.solve(rhs - self.mixed_matrix @ x)
                         if self._mixed_lu is not None
                         else spsolve(self.mixed_matrix, rhs - self.mixed_matrix @ x))
                res = np.linalg.norm(self.mixed_matrix @ x - rhs) / nb
                if res > 1e-11:
                    raise SolverError(f"mixed system relative residual {res:.2e} > 1e-11")
        return x

    def step_mixed_A(self, state: State, t_new: Optional[float] = None):
        """Solve for (phi^{n+1}, A^{n+1}) from the level-n data."""
        cfg = self.cfg
        t_new = state.t + cfg.tau if t_new is None else t_new
        rhs_a = forms.rhs_A(self.sys, self.mats, state.psi, state.a, t_new,
                            cfg.tau, cfg.kappa, self.sources)
        rhs = np.concatenate([np.zeros(self.sys.n_V), rhs_a])
        x = self._solve_mixed(rhs)
        return x[: self.sys.n_V], x[self.sys.n_V:]

    def step_psi(self, state: State, a_new, t_new: Optional[float] = None, guess=None):
        """Solve the nonlinear order-parameter equation; returns (psi, iterations)."""
        cfg = self.cfg
        t_new = state.t + cfg.tau if t_new is None else t_new
        phi_qp = self.sys.v_at_qp(state.phi, SOURCE_DEGREE)
        b = forms.rhs_psi(self.sys, state.psi, phi_qp, t_new, cfg.eta, cfg.kappa, self.sources)
        a_qp = self.sys.edge_at_qp(a_new, FORM_DEGREE)
        return solve_psi(self.sys, self.mats, cfg, state.psi, a_qp, b, guess=guess)

    def step(self, state: State) -> State:
        cfg = self.cfg
        t_new = (state.n + 1) * cfg.tau
        phi, a = self.step_mixed_A(state, t_new)
        psi, its = self.step_psi(state, a, t_new)
        return State(psi, phi, a, state.n + 1, t_new, {"newton_iterations": its})


def cubic_residual(sys: FeSystem, psi):
    """(|psi|^2 psi, v) for each P1 basis v (complex vector)."""
    q = sys.quad(FORM_DEGREE)
    p = sys.nodal_at_qp(psi, FORM_DEGREE)
    local = np.einsum("fq,fq,qi->fi", q.w, np.abs(p) ** 2 * p, q.bary)
    return forms.assemble_vector(local, sys.mesh.triangles, sys.n_S)


def cubic_jacobian(sys: FeSystem, psi):
    """Real Jacobian of psi -> (|psi|^2 psi, v) in [Re, Im] ordering."""
    q = sys.quad(FORM_DEGREE)
    p = sys.nodal_at_qp(psi, FORM_DEGREE)
    u, v = p.real, p.imag
    tri = sys.mesh.triangles
    n = sys.n_S

    def wm(c):
        return assemble_local(np.einsum("fq,qi,qj->fij", q.w * c, q.bary, q.bary), tri, (n, n))

    uv = wm(2 * u * v)
    return sparse.bmat([[wm(3 * u**2 + v**2), uv], [uv, wm(u**2 + 3 * v**2)]], format="csr")


def solve_psi(sys: FeSystem, mats: StaticMatrices, cfg: SolverConfig, psi_old, a_qp, b,
              guess=None):
    """Newton iteration for

    (eta/tau)(psi - psi_old, v) + cov(psi, v) + ((|psi|^2 - 1) psi, v) = b(v).

    ``a_qp`` is the new vector potential at the degree-6 quadrature points.
    Returns (psi, iterations).  Raises ``NewtonError`` when the residual does
    not reach ``cfg.newton_tol`` within ``cfg.newton_maxit`` iterations.
    """
    R, S = covariant_parts(sys, a_qp, cfg.kappa)
    lin = complex_block(R + (cfg.eta / cfg.tau - 1.0) * mats.M_S, S)
    mass = complex_block(mats.M_S)
    rhs = to_real(b) + (cfg.eta / cfg.tau) * (mass @ to_real(psi_old))

    def residual(x):
        return lin @ x + to_real(cubic_residual(sys, to_complex(x))) - rhs

    x = to_real(np.asarray(psi_old if guess is None else guess, dtype=complex))
    r = residual(x)
    rn = np.linalg.norm(r)
    its = 0
    while rn > cfg.newton_tol:
        if its >= cfg.newton_maxit:
            raise NewtonError(
                f"Newton did not converge: residual {rn:.3e} after {its} iterations"
            )
        jac = (lin + cubic_jacobian(sys, to_complex(x))).tocsc()
        dx = spsolve(jac, -r)
        lam = 1.0
        for _ in range(7):
            x_try = x + lam * dx
            r_try = residual(x_try)
            rn_try = np.linalg.norm(r_try)
            if rn_try <= rn or lam < 1 / 32:
                break
            lam *= 0.5
        x, r, rn = x_try, r_try, rn_try
        its += 1
        log.debug("newton %d: |r| = %.3e (step %.3g)", its, rn, lam)
    return to_complex(x), its


@dataclass
class Trajectory:
    final: State
    energy: EnergyTrace
    newton_iterations: List[int]
    gauge_defect: List[float]
    psi_sup: List[float]
    states: List[State] = dataclasses.field(default_factory=list)


def run(sys: FeSystem, config: SolverConfig, initial: Optional[InitialData] = None,
        sources=None, *, keep_states: bool = False, energy: bool = True,
        callback: Optional[Callable] = None) -> Trajectory:
    """Integrate from t = 0 to T with N = round(T / tau) steps."""
    stepper = Stepper(sys, config, sources)
    initial = initial if initial is not None else InitialData()
    state = initial.discretize(sys)
    src = stepper.sources
    trace = EnergyTrace()
    traj = Trajectory(state, trace, [], [], [float(np.abs(state.psi).max(initial=0.0))])
    if keep_states:
        traj.states.append(state)
    if energy:
        trace.append(0, 0.0, *discrete_energy(sys, state, config.kappa, src.H, 0.0))
    for _ in range(config.n_steps):
        new = stepper.step(state)
        traj.newton_iterations.append(new.extra["newton_iterations"])
        div = discrete_divergence(sys, new.a, stepper.mats)
        traj.gauge_defect.append(float(np.max(np.abs(new.phi + div), initial=0.0)))
        traj.psi_sup.append(float(np.abs(new.psi).max(initial=0.0)))
        if energy:
            trace.append(new.n, new.t, *discrete_energy(sys, new, config.kappa, src.H, new.t))
        if keep_states:
            traj.states.append(new)
        if callback is not None:
            callback(new, state)
        state = new
    traj.final = state
    return traj
