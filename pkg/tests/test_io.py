import numpy as np
import pytest

from tdglfem.fe_spaces import State
from tdglfem.io import read_vtk_header, vertex_average_edge_field, write_state_vtk, write_vtk


@pytest.mark.parametrize("k", [0, 1])
def test_vertex_average_of_constant_field(k):
    from conftest import system
    sys, _ = system("l_shape_with_hole", 1 / 8, k)
    a = sys.interpolate_edge(lambda x, y: np.stack([np.full_like(x, 2.0), np.full_like(x, -1.0)], -1))
    assert np.allclose(vertex_average_edge_field(sys, a), [2.0, -1.0], atol=1e-13)


def test_state_file_layout(holed, tmp_path):
    sys, _ = holed
    rng = np.random.default_rng(0)
    st = State(rng.normal(size=sys.n_S) + 0j, np.zeros(sys.n_V), rng.normal(size=sys.n_N), 3, 0.3)
    path = tmp_path / "s.vtk"
    write_state_vtk(path, sys, st)
    head = read_vtk_header(path)
    m = sys.mesh
    assert head == {"POINTS": m.n_vertices, "CELLS": m.n_triangles, "CELL_TYPES": m.n_triangles,
                    "POINT_DATA": m.n_vertices, "CELL_DATA": m.n_triangles}
    lines = open(path).read().splitlines()
    assert lines[0].startswith("# vtk DataFile") and lines[2] == "ASCII"
    i = lines.index(f"CELL_TYPES {m.n_triangles}")
    assert set(lines[i + 1:i + 1 + m.n_triangles]) == {"5"}
    j = lines.index("SCALARS psi_abs2 double 1")
    vals = np.array(lines[j + 2:j + 2 + m.n_vertices], dtype=float)
    assert np.allclose(vals, np.abs(st.psi) ** 2, rtol=1e-15)
    j = lines.index("SCALARS B double 1")
    vals = np.array(lines[j + 2:j + 2 + m.n_triangles], dtype=float)
    assert np.allclose(vals, sys.edge_curl(st.a), rtol=1e-15)
    assert "VECTORS A double" in lines


def test_bad_array_shape(holed, tmp_path):
    sys, _ = holed
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "x.vtk", sys.mesh, point_data={"bad": np.zeros(3)})
