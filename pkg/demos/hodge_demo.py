"""Discrete harmonic field of the holed L-shape and a Hodge split of a random field.

    python3 demos/hodge_demo.py [out_dir]

Writes harmonic.vtk (vertex-averaged field, cell curl) for inspection in ParaView.
"""
import sys
from pathlib import Path

import numpy as np

from tdglfem.fe_spaces import FeSystem
from tdglfem.forms import assemble_static
from tdglfem.hodge import edge_loop_circulation, harmonic_basis, hodge_decompose
from tdglfem.io import vertex_average_edge_field, write_vtk
from tdglfem.mesh import DomainSpec, build_domain

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out")
out.mkdir(parents=True, exist_ok=True)

fe = FeSystem(build_domain(DomainSpec(target_h=1 / 16)))
mats = assemble_static(fe)
hb = harmonic_basis(fe, mats)
w = hb.fields[0]
print(f"Betti number {fe.mesh.betti}, harmonic basis size {len(hb)}")
print(f"max |curl w| = {np.abs(fe.edge_curl(w)).max():.2e}")
print(f"max |(w, grad chi)| = {np.abs(mats.B_div @ w).max():.2e}")

# circulation around the hole along a rectangle of grid lines enclosing it
x, y = fe.mesh.vertices.T
lo, hi = -0.875, -0.39375


def vid(px, py):
    return int(np.flatnonzero((np.abs(x - px) < 1e-12) & (np.abs(y - py) < 1e-12))[0])


s = np.unique(np.round(x[(x >= lo - 1e-12) & (x <= hi + 1e-12)], 12))
path = ([(v, lo) for v in s[:-1]] + [(hi, v) for v in s[:-1]]
        + [(v, hi) for v in s[::-1][:-1]] + [(lo, v) for v in s[::-1][:-1]])
print(f"circulation around the hole = {edge_loop_circulation(fe, w, [vid(*p) for p in path]):.6f}")

a = np.random.default_rng(0).normal(size=fe.n_N)
p = hodge_decompose(fe, a, hb, mats)
norm = lambda v: float(np.sqrt(v @ (mats.M_N @ v)))  # noqa: E731
print(f"|a| = {norm(a):.4f}: |c| = {norm(p.c):.4f}, |grad| = {norm(p.grad):.4f}, "
      f"|harmonic| = {norm(p.harmonic):.4f} (alpha = {p.alpha[0]:+.4f})")

write_vtk(out / "harmonic.vtk", fe.mesh, point_data={"w": vertex_average_edge_field(fe, w)},
          cell_data={"curl_w": fe.edge_curl(w)}, title="discrete harmonic field")
print(f"wrote {out / 'harmonic.vtk'}")
