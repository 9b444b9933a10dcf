"""Assembly of the bilinear and linear forms of the decoupled scheme.

Complex quantities are handled through their real representation: a complex
vector ``c`` becomes ``[Re c, Im c]`` and a complex matrix ``R + iS`` the
block matrix ``[[R, -S], [S, R]]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .fe_spaces import FORM_DEGREE, SOURCE_DEGREE, FeSystem


def assemble_local(local, dofs, shape):
    """Sum local (F, n, m) element matrices into a CSR matrix.

    ``dofs`` is either one (F, n) map (square case) or a pair of row and
    column maps.  Duplicates are summed in element order, so the result is
    reproducible bit for bit.
    """
    if isinstance(dofs, tuple):
        rdofs, cdofs = dofs
    else:
        rdofs = cdofs = dofs
    n, m = local.shape[1:]
    rows = np.repeat(rdofs, m, axis=1).ravel()
    cols = np.tile(cdofs, (1, n)).ravel()
    mat = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_vector(local, dofs, n):
    """Sum local (F, k) element vectors (real or complex)."""
    out = np.zeros(n, dtype=np.result_type(local.dtype, float))
    np.add.at(out, dofs.ravel(), local.ravel())
    return out


def complex_block(R, S=None):
    """Real representation [[R, -S], [S, R]] of R + iS."""
    if S is None:
        return sparse.block_diag([R, R], format="csr")
    return sparse.bmat([[R, -S], [S, R]], format="csr")


def to_real(c):
    return np.concatenate([c.real, c.imag])


def to_complex(x):
    n = len(x) // 2
    return x[:n] + 1j * x[n:]


def weighted_p1_mass(sys: FeSystem, coef=None, degree: int = FORM_DEGREE):
    """Matrix of (coef * u, v) for P1 u, v; ``coef`` given at quadrature points (F, Q)."""
    q = sys.quad(degree)
    w = q.w if coef is None else q.w * coef
    local = np.einsum("fq,qi,qj->fij", w, q.bary, q.bary)
    n = sys.n_S
    return assemble_local(local, sys.mesh.triangles, (n, n))


@dataclass
class StaticMatrices:
    """Time-independent matrices of the scheme.

    M_S/K_S are the P1 mass and stiffness matrices of S, M_V/K_V those of
    V, M_N the edge mass matrix, K_curl the curl-curl matrix, B_div[i, e] =
    (w_e, grad chi_i) and G the gradient inclusion V -> N.
    """

    M_S: sparse.csr_matrix
    K_S: sparse.csr_matrix
    M_V: sparse.csr_matrix
    K_V: sparse.csr_matrix
    M_N: sparse.csr_matrix
    K_curl: sparse.csr_matrix
    B_div: sparse.csr_matrix
    G: sparse.csr_matrix


def assemble_static(sys: FeSystem) -> StaticMatrices:
    mesh = sys.mesh
    q = sys.quad(FORM_DEGREE)
    tri, dv, dn = mesh.triangles, sys.dofs_V, sys.dofs_N
    ns, nv, ne = sys.n_S, sys.n_V, sys.n_N

    m_s = assemble_local(np.einsum("fq,qi,qj->fij", q.w, q.bary, q.bary), tri, (ns, ns))
    k_s_local = np.einsum("fid,fjd->fij", sys.grad_lam, sys.grad_lam) * sys.areas[:, None, None]
    k_s = assemble_local(k_s_local, tri, (ns, ns))
    if sys.k == 0:
        m_v, k_v = m_s.copy(), k_s.copy()
    else:
        m_v = assemble_local(np.einsum("fq,fqi,fqj->fij", q.w, q.v_val, q.v_val), dv, (nv, nv))
        k_v = assemble_local(np.einsum("fq,fqid,fqjd->fij", q.w, q.v_grad, q.v_grad), dv, (nv, nv))

    m_n = assemble_local(np.einsum("fq,fqid,fqjd->fij", q.w, q.n_val, q.n_val), dn, (ne, ne))
    c = sys.n_curl
    k_curl = assemble_local(np.einsum("fi,fj,f->fij", c, c, sys.areas), dn, (ne, ne))
    b_local = np.einsum("fq,fqed,fqid->fie", q.w, q.n_val, q.v_grad)
    b_div = assemble_local(b_local, (dv, dn), (nv, ne))

    return StaticMatrices(
        M_S=m_s, K_S=k_s, M_V=m_v, K_V=k_v,
        M_N=m_n, K_curl=k_curl, B_div=b_div, G=sys.gradient_matrix(),
    )


def covariant_parts(sys: FeSystem, a_qp, kappa: float):
    """Real and imaginary parts (R, S) of the Hermitian covariant form.

    H[i, j] = ((i/kappa grad + A) N_j, (i/kappa grad + A) N_i) = R + iS with
    R symmetric and S antisymmetric.  ``a_qp`` holds A at the degree-6
    quadrature points, shape (F, Q, 2).
    """
    q = sys.quad(FORM_DEGREE)
    tri = sys.mesh.triangles
    n = sys.n_S
    gl = sys.grad_lam
    a2 = np.einsum("fqd,fqd->fq", a_qp, a_qp)
    r_local = (
        np.einsum("fid,fjd->fij", gl, gl) * (sys.areas / kappa**2)[:, None, None]
        + np.einsum("fq,qi,qj->fij", q.w * a2, q.bary, q.bary)
    )
    # (A . grad N_j) N_i
    adg = np.einsum("fqd,fjd->fqj", a_qp, gl)
    t = np.einsum("fq,fqj,qi->fij", q.w, adg, q.bary)
    s_local = (t - t.transpose(0, 2, 1)) / kappa
    R = assemble_local(r_local, tri, (n, n))
    S = assemble_local(s_local, tri, (n, n))
    return R, S


def assemble_covariant(sys: FeSystem, a, kappa: float, *, at_qp: bool = False):
    """Real 2n x 2n matrix of ((i/kappa grad + A) psi, (i/kappa grad + A) phi).

    ``a`` is an edge coefficient vector, or A at the degree-6 quadrature
    points when ``at_qp`` is true.
    """
    a_qp = a if at_qp else sys.edge_at_qp(a, FORM_DEGREE)
    return complex_block(*covariant_parts(sys, a_qp, kappa))


def supercurrent(psi_qp, grad_psi, a_qp, kappa: float):
    """Re[conj(psi) (i/kappa grad + A) psi] at quadrature points."""
    return (
        -np.imag(np.conj(psi_qp)[..., None] * grad_psi) / kappa
        + (np.abs(psi_qp) ** 2)[..., None] * a_qp
    )


def theta(z):
    """Cut-off z / max(|z|, 1)."""
    z = np.asarray(z)
    return z / np.maximum(np.abs(z), 1.0)


def rhs_A(sys: FeSystem, mats: StaticMatrices, psi, a, t_new, tau, kappa, sources,
          a_qp=None):
    """Right-hand side of the A-equation.

    (H, curl w) + (g_vec, w) + (A^n, w)/tau - (Re[conj(psi^n)(i/kappa grad + A^n) psi^n], w)
    with the data evaluated at ``t_new``.
    """
    deg = SOURCE_DEGREE
    q = sys.quad(deg)
    psi_qp = sys.nodal_at_qp(psi, deg)
    grad_psi = sys.nodal_grad(psi)[:, None, :]
    if a_qp is None:
        a_qp = sys.edge_at_qp(a, deg)
    j = supercurrent(psi_qp, grad_psi, a_qp, kappa)
    g, gvec, H = sources.evaluate(q.xs, q.ys, t_new)
    force = -j if gvec is None else gvec - j
    local = np.einsum("fq,fqd,fqkd->fk", q.w, force, q.n_val)
    if H is not None:
        hint = np.einsum("fq,fq->f", q.w, np.broadcast_to(H, q.w.shape))
        local = local + hint[:, None] * sys.n_curl
    out = assemble_vector(local, sys.dofs_N, sys.n_N)
    return out + mats.M_N @ a / tau


def rhs_psi(sys: FeSystem, psi, phi_qp, t_new, eta, kappa, sources):
    """(g, v) - (i eta kappa Theta(psi^n) phi^n, v) for each P1 basis v.

    ``phi_qp`` is phi^n at the degree-8 quadrature points (any array
    broadcastable to (F, Q)).
    """
    deg = SOURCE_DEGREE
    q = sys.quad(deg)
    psi_qp = sys.nodal_at_qp(psi, deg)
    f = -1j * eta * kappa * theta(psi_qp) * phi_qp
    g, _, _ = sources.evaluate(q.xs, q.ys, t_new)
    if g is not None:
        f = f + g
    local = np.einsum("fq,fq,qi->fi", q.w, f, q.bary)
    return assemble_vector(local.astype(complex), sys.mesh.triangles, sys.n_S)


def assemble_step_rhs(sys, mats, state, sources, t_new, tau, eta, kappa):
    """Both right-hand sides of one time step.

    Returns a dict with ``rhs_A`` (edge vector) and ``rhs_psi`` (complex P1
    vector, the constant part of the order-parameter equation).
    """
    phi_qp = sys.v_at_qp(state.phi, SOURCE_DEGREE)
    return {
        "rhs_A": rhs_A(sys, mats, state.psi, state.a, t_new, tau, kappa, sources),
        "rhs_psi": rhs_psi(sys, state.psi, phi_qp, t_new, eta, kappa, sources),
    }
