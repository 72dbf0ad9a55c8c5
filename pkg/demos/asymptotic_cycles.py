"""Flow of the field dual to star(d alpha) for a torus eigenform alpha.

Trajectory averages estimate the L1 norm of d alpha (from lengths) and the
squared L2 norm of alpha (from integrals of the primitive beta). Closed
and unrolled, the family becomes a bounding cycle whose length over area
is compared with the analytic chain of inequalities.
"""
import numpy as np

from coexact.filling import min_filling_area, project_to_skeleton
from coexact.flow import lln_slope, prepare_problem, run_monte_carlo, unrolled_polyline
from coexact.homology import homology_basis
from coexact.models.torus import torus_mesh
from coexact.spectra import coexact_spectrum

md = torus_mesh(6)
H = homology_basis(md.complex)
alpha = coexact_spectrum(md, 1, homology=H).eigenforms[:, 0]
problem = prepare_problem(md, H, alpha)
print(f"lambda={problem.eigenvalue:.4f}  |d alpha|_1={problem.d_alpha_L1:.4f}  "
      f"|alpha|_2^2={problem.alpha_L2_sq:.4f}  |alpha|_inf={problem.alpha_sup:.4f}")

ns, errs = [], []
for n in (16, 64, 256, 1024):
    report, _, un = run_monte_carlo(problem, n, 1.0, seed=n)
    ns.append(n)
    errs.append(report.errors["length"])
    print(f"n={n:5d}  length est={report.estimates['length']:.4f} +/- {report.stderr['length']:.4f}  "
          f"beta est={report.estimates['beta']:.4f} +/- {report.stderr['beta']:.4f}  "
          f"connectors/nT={report.estimates['nu_fraction']:.3f}")
# one replicate per n, so this slope is noisy; the acceptance check averages eight
print(f"log-log slope of the length error: {lln_slope(ns, errs):.2f}")

report, traj, un = run_monte_carlo(problem, 256, 4.0, seed=1, record=True)
proj = project_to_skeleton(md, unrolled_polyline(traj, un))
chain = proj.chain + un.generator_chain
fill = min_filling_area(md, H, chain, r=H.r_universal, integer_check=False)
rho = chain.l1(md.edge_lengths) / fill.area
print(f"projected cycle: length={chain.l1(md.edge_lengths):.2f} area={fill.area:.2f} ratio={rho:.3f}")
print(f"|d alpha|_1 |alpha|_inf = {problem.d_alpha_L1 * problem.alpha_sup:.4f} >= "
      f"ratio |alpha|_2^2 = {rho * problem.alpha_L2_sq:.4f}")
print("pairings with the dual cocycles:", np.round(traj.integrals.sum(axis=0), 3), "->", un.coords)
