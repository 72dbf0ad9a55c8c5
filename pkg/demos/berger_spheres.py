"""Berger spheres: shrinking the Hopf fibers drives the first coexact
eigenvalue to zero like 4 eps^2, while fibers stay hard to fill."""
import math

from coexact.complex import Chain
from coexact.filling import min_filling_area
from coexact.homology import homology_basis
from coexact.models.berger import (berger_h1_bounds, berger_mesh, berger_spectrum_invariant,
                                   fiber_loop, invariant_laplacian)
from coexact.spectra import coexact_spectrum

print("invariant 1-forms")
for eps in (1.0, 0.5, 0.25, 0.1):
    lam = berger_spectrum_invariant(eps)
    gap = abs(invariant_laplacian(eps, route="adjoint") - invariant_laplacian(eps)).max()
    print(f"  eps={eps:<5} spectrum={lam.round(6)}  4eps^2={4 * eps * eps:.4f}  routes agree to {gap:.0e}")

print("meshed, cube subdivision 4")
for eps in (1.0, 0.5):
    md = berger_mesh(eps, 4)
    H = homology_basis(md.complex)
    lam = coexact_spectrum(md, 1, homology=H).eigenvalues[0]
    loop = Chain.edge_path(md.complex, fiber_loop(md))
    length = loop.l1(md.edge_lengths)
    area = min_filling_area(md, H, loop, backend="highs").area
    upper, lower = berger_h1_bounds(eps)
    print(f"  eps={eps}: lambda_1={lam:.4f} (4eps^2={4 * eps * eps})  fiber length={length:.4f} "
          f"(2 pi eps={2 * math.pi * eps:.4f})  filling={area:.4f} (>= {lower:.4f})  "
          f"l/A={length / area:.4f} (<= {upper})")
