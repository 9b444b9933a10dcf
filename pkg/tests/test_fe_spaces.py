import numpy as np
import pytest

from tdglfem.fe_spaces import FeSystem, State, electric_field, magnetic_field
from tdglfem.forms import assemble_static
from tdglfem.mesh import MeshError, reference_triangle, uniform_refine
from tdglfem.quadrature import segment_rule

from conftest import domain, system


def quadratic(x, y):
    return 0.3 + x - 2 * y + 1.5 * x * x - x * y + 0.7 * y * y


def grad_quadratic(x, y):
    return np.stack([1 + 3 * x - y, -2 - x + 1.4 * y], axis=-1)


def test_reference_counts():
    ref = reference_triangle()
    s1 = FeSystem(ref, 1)
    assert (s1.n_S, s1.n_V, s1.n_N) == (3, 6, 6)
    s0 = FeSystem(ref, 0)
    assert (s0.n_S, s0.n_V, s0.n_N) == (3, 3, 3)


def test_holed_counts_h32():
    m = domain("l_shape_with_hole", 1 / 32)
    assert FeSystem(m, 0).n_N == m.n_edges
    assert FeSystem(m, 1).n_N == 2 * m.n_edges
    assert FeSystem(m, 1).n_V == m.n_vertices + m.n_edges


def test_refined_edge_count():
    m = domain("l_shape_with_hole", 1 / 8)
    r = uniform_refine(m)
    assert FeSystem(r, 0).n_N == 2 * m.n_edges + 3 * m.n_triangles
    assert FeSystem(r, 1).n_N == 2 * (2 * m.n_edges + 3 * m.n_triangles)


@pytest.mark.parametrize("k", [0, 1])
def test_interpolate_nodal_constant(k):
    sys = FeSystem(reference_triangle(), k)
    assert np.array_equal(sys.interpolate_nodal(lambda x, y: np.ones_like(x)), np.ones(3))
    v = sys.interpolate_nodal(lambda x, y: np.ones_like(x), "V")
    assert np.array_equal(v[:3], np.ones(3)) and np.all(v[3:] == 0)


def test_interpolate_nodal_complex_linear():
    sys = FeSystem(reference_triangle())
    c = sys.interpolate_nodal(lambda x, y: x + 1j * y)
    assert np.array_equal(c, np.array([0, 1, 1j]))


@pytest.mark.parametrize("space", ["S", "V"])
def test_interpolate_then_evaluate_at_nodes(space, holed):
    sys, _ = holed
    f = lambda x, y: np.sin(3 * x) * np.cos(2 * y)  # noqa: E731
    c = sys.interpolate_nodal(f, space)
    pts = sys.mesh.vertices[::7]
    got = sys.evaluate(c, space, pts)["value"]
    assert np.max(np.abs(got - f(pts[:, 0], pts[:, 1]))) <= 1e-14


def test_p2_interpolation_reproduces_quadratics(holed):
    sys, _ = holed
    c = sys.interpolate_nodal(quadratic, "V")
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(-1, 0, 20), rng.uniform(0, 1, 20)])
    ev = sys.evaluate(c, "V", pts)
    assert np.allclose(ev["value"], quadratic(*pts.T), atol=1e-13)
    assert np.allclose(ev["grad"], grad_quadratic(*pts.T), atol=1e-12)


def test_edge_interpolation_axis_examples():
    sys = FeSystem(reference_triangle(), 0)  # edge 0 runs (0,0) -> (1,0)
    assert np.array_equal(sys.mesh.edges[0], [0, 1])
    one = sys.interpolate_edge(lambda x, y: np.stack([np.ones_like(x), 0 * x], -1))
    assert one[0] == pytest.approx(1.0, abs=1e-15)
    other = sys.interpolate_edge(lambda x, y: np.stack([0 * x, np.ones_like(x)], -1))
    assert other[0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("k", [0, 1])
def test_gradient_interpolant_is_curl_free(k):
    sys, mats = system("l_shape_with_hole", 1 / 8, k)
    a = sys.interpolate_edge(grad_quadratic)
    assert np.max(np.abs(sys.edge_curl(a))) <= 1e-12


@pytest.mark.parametrize("k", [0, 1])
def test_commuting_diagram(k):
    sys, mats = system("l_shape_with_hole", 1 / 8, k)
    a = sys.interpolate_edge(grad_quadratic)
    chi = sys.interpolate_nodal(quadratic, "V")
    # exact for P2 data; for P1/Whitney the edge integrals are endpoint differences
    assert np.max(np.abs(mats.G @ chi - a)) <= 1e-12


def test_second_kind_reproduces_linear_fields(holed):
    sys, _ = holed
    F = lambda x, y: np.stack([1 + 2 * x - y, 3 * y + x], -1)  # noqa: E731
    a = sys.interpolate_edge(F)
    q = sys.quad(6)
    assert np.max(np.abs(sys.edge_at_qp(a) - F(q.xs, q.ys))) <= 1e-13


def test_whitney_midpoint_value():
    sys = FeSystem(reference_triangle(), 0)
    for e, (a, b) in enumerate(sys.mesh.edges):
        c = np.zeros(sys.n_N)
        c[e] = 1.0
        pa, pb = sys.mesh.vertices[a], sys.mesh.vertices[b]
        mid = 0.5 * (pa + pb)
        length = np.linalg.norm(pb - pa)
        val = sys.evaluate(c, "N", mid[None])["value"][0]
        # lambda_a grad(lambda_b) - lambda_b grad(lambda_a) at the midpoint, dotted with t
        assert val @ (pb - pa) / length == pytest.approx(1.0 / length, rel=1e-14)


def test_whitney_curl_reference_edge_1_2():
    sys = FeSystem(reference_triangle(), 0)
    e = int(np.flatnonzero((sys.mesh.edges == [1, 2]).all(axis=1))[0])
    c = np.zeros(sys.n_N)
    c[e] = 1.0
    curl = sys.evaluate(c, "N", np.array([[0.2, 0.3]]))["curl"][0]
    assert curl == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize("space", ["S", "V", "N"])
def test_zero_coefficients(space, holed):
    sys, _ = holed
    out = sys.evaluate(np.zeros(sys.n_dofs(space)), space, np.array([[-0.5, 0.5], [0.3, 0.7]]))
    for v in out.values():
        assert np.all(v == 0)


def test_evaluate_outside_raises(holed):
    sys, _ = holed
    with pytest.raises(MeshError):
        sys.evaluate(np.zeros(sys.n_S), "S", np.array([[-0.6, -0.6]]))  # inside the hole


def _edge_functionals(sys):
    """Matrix of the edge dof functionals applied to every basis function,
    computed once from each adjacent triangle."""
    mesh = sys.mesh
    s, w = segment_rule(3)
    ne = mesh.n_edges
    mats = []
    for side in (0, 1):
        D = np.full((sys.n_N, sys.n_N), np.nan)
        et = mesh.edge_triangles()[:, side]
        for e in range(ne):
            t = et[e]
            if t < 0:
                t = mesh.edge_triangles()[e, 0]
            a, b = mesh.edges[e]
            loc = list(mesh.triangles[t])
            bary = np.zeros((len(s), 3))
            bary[:, loc.index(a)] = 1 - s
            bary[:, loc.index(b)] = s
            val, _ = sys.basis_N(np.full(len(s), t), bary)
            tang = val @ (mesh.vertices[b] - mesh.vertices[a])  # (P, n_local)
            row = np.zeros(sys.n_N)
            row[sys.dofs_N[t]] = w @ tang
            D[e] = row
            if sys.k == 1:
                row = np.zeros(sys.n_N)
                row[sys.dofs_N[t]] = 0.75 * ((w * (1 - 2 * s)) @ tang)
                D[ne + e] = row
        mats.append(D)
    return mats


@pytest.mark.parametrize("k", [0, 1])
def test_edge_dof_unisolvence(k):
    sys, _ = system("square", 1 / 8, k)
    for D in _edge_functionals(sys):
        assert np.max(np.abs(D - np.eye(sys.n_N))) <= 1e-12


@pytest.mark.parametrize("k", [0, 1])
def test_edge_curl_constant_per_triangle(k):
    sys, _ = system("l_shape_with_hole", 1 / 8, k)
    rng = np.random.default_rng(1)
    tri = np.arange(sys.mesh.n_triangles)
    curls = []
    for _ in range(3):
        bary = rng.dirichlet(np.ones(3), size=len(tri))
        curls.append(sys.basis_N(tri, bary)[1])
    assert np.max(np.abs(curls[0] - curls[1])) == 0 and np.max(np.abs(curls[0] - curls[2])) == 0
    # and equal to the derivative of the basis values
    h = 1e-6
    bary = np.full((len(tri), 3), 1 / 3)
    x0 = np.einsum("fk,fkd->fd", bary, sys.mesh.vertices[sys.mesh.triangles])
    inv = np.linalg.inv(np.stack([sys.mesh.vertices[sys.mesh.triangles][:, 1] - sys.mesh.vertices[sys.mesh.triangles][:, 0],
                                  sys.mesh.vertices[sys.mesh.triangles][:, 2] - sys.mesh.vertices[sys.mesh.triangles][:, 0]], axis=2))

    def vals(dx):
        lam12 = np.einsum("fij,fj->fi", inv, x0 + dx - sys.mesh.vertices[sys.mesh.triangles][:, 0])
        b = np.column_stack([1 - lam12.sum(1), lam12])
        return sys.basis_N(tri, b)[0]

    ex, ey = np.array([h, 0]), np.array([0, h])
    dvy_dx = (vals(ex)[..., 1] - vals(-ex)[..., 1]) / (2 * h)
    dvx_dy = (vals(ey)[..., 0] - vals(-ey)[..., 0]) / (2 * h)
    assert np.max(np.abs(dvy_dx - dvx_dy - curls[0])) <= 1e-6 * max(1, np.abs(curls[0]).max())


@pytest.mark.parametrize("kind,k", [("l_shape", 0), ("l_shape", 1), ("l_shape_with_hole", 0),
                                    ("l_shape_with_hole", 1)])
def test_complex_exactness_rank(kind, k):
    sys, mats = system(kind, 1 / 8, k)
    C = sys.curl_matrix().toarray()
    G = mats.G.toarray()
    defect = sys.n_N - np.linalg.matrix_rank(C) - np.linalg.matrix_rank(G)
    assert defect == sys.mesh.betti


def test_state_zeros_and_check(holed):
    sys, _ = holed
    st = State.zeros(sys)
    st.check(sys)
    assert st.psi.dtype == complex and st.t == 0.0 and st.n == 0
    with pytest.raises(ValueError):
        State(np.zeros(3, complex), st.phi, st.a).check(sys)


def test_derived_fields(holed):
    sys, _ = holed
    rng = np.random.default_rng(2)
    old = State.zeros(sys)
    new = State(old.psi, rng.normal(size=sys.n_V), rng.normal(size=sys.n_N), 1, 0.1)
    assert np.array_equal(magnetic_field(sys, new), sys.edge_curl(new.a))
    E = electric_field(sys, new, old, 0.1)
    ref = -sys.edge_at_qp(new.a / 0.1) - sys.v_grad_at_qp(new.phi)
    assert np.allclose(E, ref, atol=1e-12)
