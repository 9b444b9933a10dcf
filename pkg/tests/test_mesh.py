import numpy as np
import pytest

from tdglfem.mesh import (DomainSpec, Mesh, MeshError, build_domain, mesh_stats,
                          reference_triangle, uniform_refine)

from conftest import domain

KINDS = ["l_shape_with_hole", "l_shape", "square"]


def check_invariants(mesh, holes):
    # every edge has one or two triangles; one exactly on the boundary
    assert set(np.unique(mesh.edge_tri_count)) <= {1, 2}
    assert np.array_equal(mesh.edge_tri_count == 1, mesh.boundary_edges)
    assert np.all(mesh.areas > 0)
    assert mesh.n_vertices - mesh.n_edges + mesh.n_triangles == 1 - holes
    assert mesh.n_boundary_loops == 1 + holes
    assert mesh.quality_ratio <= 10
    assert np.all(mesh.edges[:, 0] < mesh.edges[:, 1])


@pytest.mark.parametrize("kind", KINDS)
def test_domain_invariants(kind):
    holes = int(kind == "l_shape_with_hole")
    for h in (1 / 8, 1 / 16):
        mesh = domain(kind, h)
        check_invariants(mesh, holes)
        assert mesh.h <= h * (1 + 1e-12)
        spec = DomainSpec(kind, DomainSpec().hole if holes else None, h)
        assert abs(mesh.areas.sum() - spec.area) <= 1e-12 * spec.area


def test_lshape_topology():
    m = domain("l_shape", 1 / 8)
    assert m.n_boundary_loops == 1 and m.euler_characteristic == 1 and m.betti == 0


def test_holed_topology():
    m = domain("l_shape_with_hole", 1 / 8)
    assert m.n_boundary_loops == 2 and m.euler_characteristic == 0 and m.betti == 1


def test_holed_regression_counts_h32():
    m = domain("l_shape_with_hole", 1 / 32)
    s = mesh_stats(m)
    assert (s.n_vertices, s.n_edges, s.n_triangles) == (3488, 10144, 6656)
    assert s.n_vertices - s.n_edges + s.n_triangles == 0
    assert s.h <= 1 / 32
    assert s.quality_ratio == pytest.approx(1.7677669529663753, rel=1e-12)


def test_reentrant_corner_at_origin():
    m = domain("l_shape_with_hole", 1 / 8)
    v = np.flatnonzero(np.all(m.vertices == 0.0, axis=1))
    assert len(v) == 1 and m.boundary_vertex[v[0]]
    # interior angle: sum of triangle angles at the corner
    angle = 0.0
    for t in np.flatnonzero(np.any(m.triangles == v[0], axis=1)):
        others = [w for w in m.triangles[t] if w != v[0]]
        a, b = m.vertices[others]
        angle += np.arccos(a @ b / np.linalg.norm(a) / np.linalg.norm(b))
    assert angle == pytest.approx(1.5 * np.pi, abs=1e-12)


def test_refine_counts_and_h():
    m = domain("l_shape_with_hole", 1 / 8)
    r = uniform_refine(m)
    assert r.n_triangles == 4 * m.n_triangles
    assert r.h == m.h / 2
    assert r.euler_characteristic == m.euler_characteristic
    assert r.betti == m.betti
    check_invariants(r, 1)


def test_refined_children_congruent():
    r = uniform_refine(reference_triangle())
    assert np.allclose(r.areas, 0.125, rtol=0, atol=1e-15)
    lens = np.sort(np.linalg.norm(np.diff(r.vertices[r.triangles][:, [0, 1, 2, 0]], axis=1), axis=2), axis=1)
    assert np.allclose(lens, lens[0])


def test_rebuild_bit_identical():
    spec = DomainSpec(target_h=1 / 16)
    a, b = build_domain(spec), build_domain(spec)
    assert np.array_equal(a.triangles, b.triangles)
    assert np.array_equal(a.edges, b.edges)
    assert np.array_equal(a.tri_edge_sign, b.tri_edge_sign)
    assert a.vertices.tobytes() == b.vertices.tobytes()


def test_square_betti():
    assert mesh_stats(domain("square", 1 / 8)).betti == 0


@pytest.mark.parametrize("hole", [
    ((-0.3, -0.3), (-0.1, -0.1)),   # inside the r <= 0.4 disk
    ((0.2, -0.6), (0.5, -0.3)),     # in the removed quadrant
    ((-0.75, -0.75), (-0.45, 1.2)),  # leaves the square
])
def test_rejects_bad_holes(hole):
    with pytest.raises(MeshError):
        build_domain(DomainSpec("l_shape_with_hole", hole, 1 / 8))


def test_rejects_clockwise_triangles():
    with pytest.raises(MeshError):
        Mesh(np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([[0, 2, 1]]))


def test_locate_outside_raises():
    m = domain("l_shape", 1 / 8)
    with pytest.raises(MeshError):
        m.locate([[0.5, -0.5]])


def test_tri_edge_signs_match_orientation():
    m = domain("l_shape_with_hole", 1 / 8)
    tri = m.triangles
    for k in range(3):
        a, b = tri[:, k], tri[:, (k + 1) % 3]
        e = m.edges[m.tri_edges[:, k]]
        assert np.all(np.where(a < b, 1, -1) == m.tri_edge_sign[:, k])
        assert np.all(np.sort(np.column_stack([a, b]), axis=1) == e)
