"""Least-area fillings on small surfaces, real versus integer."""
import math

from coexact.complex import Chain
from coexact.dec import skeleton_metric
from coexact.filling import min_filling_area
from coexact.homology import homology_basis
from coexact.models import fixtures

mesh = fixtures.octahedron()
md = skeleton_metric(mesh.complex, mesh.vertices)
H = homology_basis(mesh.complex)
eq = Chain.edge_path(mesh.complex, fixtures.octahedron_equator())
res = min_filling_area(md, H, eq)
print(f"octahedron equator: area={res.area:.6f}  2 sqrt 3={2 * math.sqrt(3):.6f}  gap={res.integrality_gap}")

rp2 = fixtures.projective_plane()
md = skeleton_metric(rp2.complex)  # unit edges
H = homology_basis(rp2.complex)
core = Chain.edge_path(rp2.complex, fixtures.projective_plane_core_loop())
res = min_filling_area(md, H, core)
print(f"projective plane: torsion {H.torsion_orders}, core loop needs r={res.r_used}, "
      f"area per copy {res.area:.6f}, integer optimum {res.area + res.integrality_gap:.6f}")
