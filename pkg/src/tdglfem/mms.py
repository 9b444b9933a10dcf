"""Manufactured solution with a reentrant-corner singularity.

In polar coordinates around the corner (theta in [0, 3*pi/2], measured from
the positive x-axis face),

    psi = t^2 Phi(r) r^(2/3) cos(2 theta / 3)
    A   = t^2 (4/3 Phi(r) r^(-1/3) + Phi'(r) r^(2/3)) (cos(theta/3), sin(theta/3))

where the cut-off Phi equals 0.1 for r < 0.1, vanishes for r > 0.4 and is the
degree-7 Hermite polynomial Upsilon in between.  Sources are built from
second-order jets, so no symbolic algebra is involved.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List

import numpy as np
from numpy.polynomial import Polynomial

from .fe_spaces import SOURCE_DEGREE, FeSystem, State
from .jet import Jet, atan2

R_IN, R_OUT, PHI_IN = 0.1, 0.4, 0.1
_CHUNK = 40000


def build_upsilon() -> Polynomial:
    """Degree-7 polynomial with Upsilon(0.1) = 0.1, Upsilon(0.4) = 0 and vanishing
    first to third derivatives at both ends."""
    domain = [R_IN, R_OUT]
    basis = [Polynomial(np.eye(8)[j], domain=domain, window=[-1, 1]) for j in range(8)]
    rows, rhs = [], []
    for r0, v0 in ((R_IN, PHI_IN), (R_OUT, 0.0)):
        for k in range(4):
            rows.append([b.deriv(k)(r0) if k else b(r0) for b in basis])
            rhs.append(v0 if k == 0 else 0.0)
    coef = np.linalg.solve(np.array(rows), np.array(rhs))
    return Polynomial(coef, domain=domain, window=[-1, 1])


UPSILON = build_upsilon()
_UPS_DERIVS = [UPSILON] + [UPSILON.deriv(k) for k in range(1, 5)]


def cutoff(r, k: int = 0):
    """k-th derivative of the cut-off Phi (k <= 4)."""
    r = np.asarray(r, dtype=float)
    mid = (r >= R_IN) & (r <= R_OUT)
    out = np.zeros_like(r)
    if k == 0:
        out[r < R_IN] = PHI_IN
    out[mid] = _UPS_DERIVS[k](r[mid])
    return out


def polar_angle(x, y):
    """Angle in [0, 2*pi) from the positive x-axis; the domain uses [0, 3*pi/2]."""
    th = np.arctan2(y, x)
    return np.where(th < 0, th + 2 * np.pi, th)


def _fields_chunk(x, y, t):
    X = Jet.variable(x, 0, 3)
    Y = Jet.variable(y, 1, 3)
    T = Jet.variable(t, 2, 3)
    r = (X * X + Y * Y).sqrt()
    th = atan2(Y, X)
    th.v = np.where(th.v < 0, th.v + 2 * np.pi, th.v)
    P0 = r.apply(cutoff(r.v, 0), cutoff(r.v, 1), cutoff(r.v, 2))
    P1 = r.apply(cutoff(r.v, 1), cutoff(r.v, 2), cutoff(r.v, 3))
    t2 = T * T
    r23 = r ** (2.0 / 3.0)
    psi = t2 * P0 * r23 * (th * (2.0 / 3.0)).cos()
    amp = t2 * (P0 * (r ** (-1.0 / 3.0)) * (4.0 / 3.0) + P1 * r23)
    a1 = amp * (th * (1.0 / 3.0)).cos()
    a2 = amp * (th * (1.0 / 3.0)).sin()
    return psi, a1, a2


def exact_jets(x, y, t):
    """Jets (value, d/d(x, y, t), Hessian) of psi, A_1, A_2 at the given points.

    Points closer than 1e-14 to the corner get zero jets.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape).ravel()
    corner = np.hypot(x, y) < 1e-14
    xs = np.where(corner, 1.0, x)
    jets = _fields_chunk(xs, y, t)
    for j in jets:
        j.v[corner] = 0.0
        j.g[corner] = 0.0
        j.h[corner] = 0.0
    return jets


@dataclass
class ExactFields:
    psi: np.ndarray
    psi_t: np.ndarray
    grad_psi: np.ndarray
    lap_psi: np.ndarray
    A: np.ndarray
    A_t: np.ndarray
    div_A: np.ndarray
    grad_div_A: np.ndarray
    curl_A: np.ndarray
    grad_curl_A: np.ndarray


def exact_fields(x, y, t) -> ExactFields:
    psi, a1, a2 = exact_jets(x, y, t)
    div = a1.g[:, 0] + a2.g[:, 1]
    grad_div = np.column_stack([a1.h[:, 0, 0] + a2.h[:, 1, 0], a1.h[:, 0, 1] + a2.h[:, 1, 1]])
    curl = a2.g[:, 0] - a1.g[:, 1]
    grad_curl = np.column_stack([a2.h[:, 0, 0] - a1.h[:, 1, 0], a2.h[:, 0, 1] - a1.h[:, 1, 1]])
    return ExactFields(
        psi=psi.v,
        psi_t=psi.g[:, 2],
        grad_psi=psi.g[:, :2],
        lap_psi=psi.h[:, 0, 0] + psi.h[:, 1, 1],
        A=np.column_stack([a1.v, a2.v]),
        A_t=np.column_stack([a1.g[:, 2], a2.g[:, 2]]),
        div_A=div,
        grad_div_A=grad_div,
        curl_A=curl,
        grad_curl_A=grad_curl,
    )


def rot(grad_s):
    """Vector curl (d/dy, -d/dx) of a scalar given its gradient."""
    return np.column_stack([grad_s[:, 1], -grad_s[:, 0]])


def source_terms(f: ExactFields, eta: float, kappa: float):
    """(g, g_vec, H) such that the exact fields solve the forced system."""
    psi = f.psi.astype(complex)
    A = f.A
    adg = np.einsum("nd,nd->n", A, f.grad_psi)
    a2 = np.einsum("nd,nd->n", A, A)
    cov2 = -f.lap_psi / kappa**2 + 2j / kappa * adg + 1j / kappa * f.div_A * psi + a2 * psi
    g = eta * f.psi_t - 1j * eta * kappa * psi * f.div_A + cov2 + (np.abs(psi) ** 2 - 1.0) * psi
    current = -np.imag(np.conj(psi)[:, None] * f.grad_psi) / kappa + (np.abs(psi) ** 2)[:, None] * A
    H = f.curl_A
    curl_curl_A = rot(f.grad_curl_A)
    curl_H = rot(f.grad_curl_A)  # H is curl A, differentiated separately
    gvec = f.A_t - f.grad_div_A + curl_curl_A + current - curl_H
    return g, gvec, H


class ManufacturedSolution:
    """Exact fields plus the matching source object for the stepper."""

    def __init__(self, eta: float = 1.0, kappa: float = 1.0):
        self.eta = eta
        self.kappa = kappa
        self._last = None

    # --- pointwise ------------------------------------------------------
    def fields(self, x, y, t) -> ExactFields:
        return exact_fields(x, y, t)

    def _map(self, x, y, t, fn):
        """Apply ``fn`` to the exact fields at every point, chunked.

        Only points inside the support r <= 0.4 are differentiated; the
        fields and every source term vanish identically outside.
        """
        x = np.asarray(x, dtype=float)
        shape = x.shape
        xf, yf = x.ravel(), np.broadcast_to(y, shape).ravel()
        inside = np.flatnonzero(np.hypot(xf, yf) <= R_OUT)
        probe = fn(exact_fields(np.array([1.0]), np.array([1.0]), t))
        res = [np.zeros((len(xf),) + np.shape(p)[1:], dtype=np.asarray(p).dtype) for p in probe]
        for s in range(0, len(inside), _CHUNK):
            idx = inside[s:s + _CHUNK]
            for out, val in zip(res, fn(exact_fields(xf[idx], yf[idx], t))):
                out[idx] = val
        return [r.reshape(shape + r.shape[1:]) for r in res]

    def psi(self, x, y, t):
        return self._map(x, y, t, lambda f: (f.psi,))[0]

    def A(self, x, y, t):
        return self._map(x, y, t, lambda f: (f.A,))[0]

    def div_A(self, x, y, t):
        return self._map(x, y, t, lambda f: (f.div_A,))[0]

    def phi(self, x, y, t):
        return -self.div_A(x, y, t)

    def B(self, x, y, t):
        return self._map(x, y, t, lambda f: (f.curl_A,))[0]

    # --- source protocol -------------------------------------------------
    def evaluate(self, x, y, t):
        # the two right-hand sides of a step query the same points and time
        cached = self._last
        if cached is not None and cached[0] is x and cached[1] is y and cached[2] == t:
            return cached[3]
        out = tuple(self._map(x, y, t, lambda f: source_terms(f, self.eta, self.kappa)))
        self._last = (x, y, t, out)
        return out

    def H(self, x, y, t):
        return self.B(x, y, t)

    def reference(self, x, y, t):
        """(psi, A, B) at the given points, as used by the error norms."""
        return tuple(self._map(x, y, t, lambda f: (f.psi, f.A, f.curl_A)))

    def initial_data(self):
        from .tdgl import InitialData

        return InitialData(
            psi=lambda x, y: self.psi(x, y, 0.0),
            A=lambda x, y: self.A(x, y, 0.0),
            div_A=lambda x, y: self.div_A(x, y, 0.0),
        )

    def interpolate(self, sys: FeSystem, t: float) -> State:
        """Exact solution at time t interpolated into the discrete spaces."""
        return State(
            sys.interpolate_nodal(lambda x, y: self.psi(x, y, t)).astype(complex),
            -sys.interpolate_nodal(lambda x, y: self.div_A(x, y, t), "V"),
            sys.interpolate_edge(lambda x, y: self.A(x, y, t)),
            t=t,
        )


# ---------------------------------------------------------------------------
# errors

ERROR_COLUMNS = ("err_psi", "err_abs_psi", "err_A", "err_B")


@dataclass
class ErrorRow:
    h: float
    tau: float
    err_psi: float
    err_abs_psi: float
    err_A: float
    err_B: float

    def values(self):
        return np.array([getattr(self, c) for c in ERROR_COLUMNS])


def error_norms(sys: FeSystem, state: State, exact: ManufacturedSolution, t: float,
                tau: float = float("nan")) -> ErrorRow:
    """L2 errors of psi, |psi|, A and B = curl A against the exact solution at t.

    ``exact`` needs a ``reference(x, y, t) -> (psi, A, B)`` method; it is
    called with the degree-8 quadrature points.
    """
    q = sys.quad(SOURCE_DEGREE)
    x, y = q.xs, q.ys
    psi_h = sys.nodal_at_qp(state.psi, SOURCE_DEGREE)
    a_h = sys.edge_at_qp(state.a, SOURCE_DEGREE)
    b_h = sys.edge_curl(state.a)[:, None]
    psi, A, B = exact.reference(x, y, t)

    def l2(d2):
        return float(np.sqrt(np.sum(q.w * d2)))

    return ErrorRow(
        h=sys.mesh.h,
        tau=tau,
        err_psi=l2(np.abs(psi_h - psi) ** 2),
        err_abs_psi=l2((np.abs(psi_h) - np.abs(psi)) ** 2),
        err_A=l2(np.sum((a_h - A) ** 2, axis=-1)),
        err_B=l2((b_h - B) ** 2),
    )


def observed_rate(e_coarse, e_fine, ratio: float = 2.0):
    """log(e_coarse / e_fine) / log(ratio); ratio 2 gives log2."""
    return np.log(np.asarray(e_coarse) / np.asarray(e_fine)) / np.log(ratio)


@dataclass
class ErrorTable:
    scheme: str
    rows: List[ErrorRow] = field(default_factory=list)

    def rates(self) -> np.ndarray:
        """Rates between consecutive levels, shape (len(rows) - 1, 4)."""
        out = []
        for a, b in zip(self.rows[:-1], self.rows[1:]):
            out.append(observed_rate(a.values(), b.values(), a.h / b.h))
        return np.array(out).reshape(-1, len(ERROR_COLUMNS))

    def finest_rate(self) -> dict:
        r = self.rates()[-1]
        return dict(zip(ERROR_COLUMNS, r))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scheme", "level", "h", "tau", *ERROR_COLUMNS])
            for i, r in enumerate(self.rows):
                w.writerow([self.scheme, i, f"{r.h:.12e}", f"{r.tau:.12e}",
                            *(f"{v:.12e}" for v in r.values())])
            if len(self.rows) >= 2:
                w.writerow([self.scheme, "rate", "", "", *(f"{v:.6f}" for v in self.rates()[-1])])
