"""Legacy ASCII VTK output for triangle meshes and solver states."""
from __future__ import annotations

from typing import Mapping, Optional

import numpy as np

from .fe_spaces import FeSystem, State
from .mesh import Mesh

VTK_TRIANGLE = 5


def vertex_average_edge_field(sys: FeSystem, a) -> np.ndarray:
    """A_h at the vertices, averaged over the triangles sharing each vertex."""
    mesh = sys.mesh
    nf = mesh.n_triangles
    tri = np.repeat(np.arange(nf), 3)
    bary = np.tile(np.eye(3), (nf, 1))
    val, _ = sys.basis_N(tri, bary)
    corner = np.einsum("pk,pkd->pd", np.asarray(a)[sys.dofs_N[tri]], val)
    total = np.zeros((mesh.n_vertices, 2))
    np.add.at(total, mesh.triangles.ravel(), corner)
    count = np.bincount(mesh.triangles.ravel(), minlength=mesh.n_vertices)
    return total / count[:, None]


def write_vtk(path, mesh: Mesh, point_data: Optional[Mapping] = None,
              cell_data: Optional[Mapping] = None, title: str = "tdglfem"):
    """Write an unstructured triangle grid with optional point and cell arrays.

    Scalar arrays have shape (n,), vector arrays (n, 2); vectors are padded
    with a zero z component.
    """
    nv, nf = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [f"{x:.16e} {y:.16e} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nf} {4 * nf}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nf}")
    lines += [str(VTK_TRIANGLE)] * nf

    def block(kind, n, data):
        if not data:
            return
        lines.append(f"{kind} {n}")
        for name, arr in data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape == (n,):
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(f"{v:.16e}" for v in arr)
            elif arr.shape == (n, 2):
                lines.append(f"VECTORS {name} double")
                lines.extend(f"{u:.16e} {v:.16e} 0" for u, v in arr)
            else:
                raise ValueError(f"array {name!r} has shape {arr.shape}, expected ({n},) or ({n}, 2)")

    block("POINT_DATA", nv, point_data)
    block("CELL_DATA", nf, cell_data)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_state_vtk(path, sys: FeSystem, state: State):
    """|psi_h|^2 and A_h as point data, B_h as cell data."""
    write_vtk(
        path, sys.mesh,
        point_data={"psi_abs2": np.abs(state.psi) ** 2, "A": vertex_average_edge_field(sys, state.a)},
        cell_data={"B": sys.edge_curl(state.a)},
        title=f"step {state.n} t={state.t:.6g}",
    )


def read_vtk_header(path) -> dict:
    """Counts of points and cells in a legacy VTK file (used for checks)."""
    out = {}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if parts and parts[0] in ("POINTS", "CELLS", "CELL_TYPES", "POINT_DATA", "CELL_DATA"):
                out[parts[0]] = int(parts[1])
    return out
