"""Acceptance checks shared by the test suite and ``verify-all``.

Each ``criterion_*`` function runs one end-to-end check and returns a
``CriterionResult``; ``run_all`` runs them in order.
"""

from __future__ import annotations

import functools
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from .complex import Chain, build_complex, load_mesh, save_mesh
from .dec import skeleton_metric
from .filling import min_filling_area, project_to_skeleton
from .flow import lln_slope, prepare_problem, run_monte_carlo, unrolled_polyline
from .homology import betti_numbers, classify_cycle, fundamental_cycle, homology_basis, spanning_forest
from .models import fixtures
from .models.berger import berger_h1_bounds, berger_mesh, berger_spectrum_invariant, fiber_loop
from .models.cusp import CuspModel, cusp_eigenvalue, cusp_mesh
from .models.torus import first_eigenvalue, torus_mesh
from .spectra import coexact_spectrum

TORUS_SIZES = (4, 8, 16)
BERGER_EPSILONS = (1.0, 0.5, 0.25, 0.1)
BERGER_MESHED = (1.0, 0.5)
BERGER_RESOLUTION = 6
CUSP_EPSILONS = (math.exp(-2), math.exp(-5), math.exp(-10))
CUSP_GRID = 2048
MC_MESH = 6
MC_T = 1.0
MC_SIZES = (16, 64, 256, 1024, 4096)
MC_REPLICATES = 8
MC_RECORD_LIMIT = 256
MC_CONVERGED = (256, 4.0)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:>2}. {self.title}: {self.summary}"

    def to_dict(self):
        return {"number": self.number, "title": self.title, "passed": bool(self.passed),
                "summary": self.summary, "measured": self.measured}


# -- shared, cached inputs -------------------------------------------------

@functools.lru_cache(maxsize=None)
def _torus(N):
    md = torus_mesh(N)
    return md, homology_basis(md.complex)


@functools.lru_cache(maxsize=None)
def _berger(eps, m=BERGER_RESOLUTION):
    md = berger_mesh(eps, m)
    return md, homology_basis(md.complex)


@functools.lru_cache(maxsize=None)
def _flow_problem(N=MC_MESH):
    md, H = _torus(N)
    spec = coexact_spectrum(md, 1, homology=H)
    return prepare_problem(md, H, spec.eigenforms[:, 0])


def _fixture_meshes():
    return {
        "single_tetrahedron": fixtures.single_tetrahedron(),
        "boundary_of_4_simplex": fixtures.boundary_of_4_simplex(),
        "octahedron": fixtures.octahedron(),
        "projective_plane": fixtures.projective_plane(),
        "torus_surface_3": fixtures.torus_surface(3),
        "torus_surface_4": fixtures.torus_surface(4),
    }


def _dd_zero(cx):
    for k in range(2, cx.dimension + 1):
        prod = (cx.boundary(k - 1) @ cx.boundary(k)).tocsr()
        prod.eliminate_zeros()
        if prod.nnz:
            return False
    return True


# -- criteria --------------------------------------------------------------

def criterion_1():
    complexes = {name: m.complex for name, m in _fixture_meshes().items()}
    complexes["three_cofaces"] = build_complex(6, fixtures.three_cofaces(), allow_nonmanifold=True)
    for N in (3, 4, 8):
        complexes[f"torus_{N}"] = _torus(N)[0].complex
    for m in (2, 4):
        complexes[f"berger_grid_{m}"] = berger_mesh(1.0, m).complex
    complexes["cusp"] = cusp_mesh(0.1).complex
    with tempfile.TemporaryDirectory() as tmp:
        for name, mesh in _fixture_meshes().items():
            for ext in ("json", "off"):
                if ext == "off" and mesh.vertices is None:
                    continue
                path = os.path.join(tmp, f"{name}.{ext}")
                save_mesh(mesh, path)
                complexes[f"ingested_{name}.{ext}"] = load_mesh(path).complex
    bad = [name for name, cx in complexes.items() if not _dd_zero(cx)]
    return len(bad) == 0, f"{len(complexes) - len(bad)}/{len(complexes)} complexes with exact dd = 0", \
        {"complexes": sorted(complexes), "failing": bad}


def criterion_2():
    checks = {}
    s3 = fixtures.boundary_of_4_simplex().complex
    checks["sphere_betti"] = betti_numbers(s3) == (1, 0, 0, 1)
    md, H = _torus(8)
    checks["torus_betti"] = H.betti == (1, 3, 3, 1) and H.rank == 3
    pair = np.array([[b.pair(c) for c in H.cycles] for b in H.dual_cocycles])
    checks["torus_dual_pairing"] = bool(np.array_equal(pair, np.eye(3, dtype=pair.dtype)))
    rp2 = fixtures.projective_plane().complex
    Hp = homology_basis(rp2)
    checks["rp2_torsion"] = Hp.torsion_orders == [2] and Hp.rank == 0
    core = Chain.edge_path(rp2, fixtures.projective_plane_core_loop())
    checks["rp2_core_order"] = classify_cycle(rp2, Hp, core).order == 2 and Hp.r_universal == 2
    ok = all(checks.values())
    return ok, ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items()), \
        {"checks": checks, "torus_betti": list(H.betti), "rp2_torsion": Hp.torsion_orders}


def criterion_3():
    target = first_eigenvalue()
    errs, lams = [], []
    for N in TORUS_SIZES:
        md, H = _torus(N)
        lam = float(coexact_spectrum(md, 1, homology=H).eigenvalues[0])
        lams.append(lam)
        errs.append(abs(lam - target) / target)
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    ok = errs[-1] <= 0.10 and decreasing
    return ok, f"rel. errors {', '.join(f'N={N}: {e:.4f}' for N, e in zip(TORUS_SIZES, errs))}", \
        {"sizes": list(TORUS_SIZES), "eigenvalues": lams, "relative_errors": errs, "target": target}


def criterion_4():
    closed = {}
    for eps in BERGER_EPSILONS:
        closed[eps] = float(berger_spectrum_invariant(eps)[0])
    closed_ok = all(abs(v - 4 * e * e) <= 1e-12 for e, v in closed.items())
    meshed = {}
    for eps in BERGER_MESHED:
        md, H = _berger(eps)
        meshed[eps] = float(coexact_spectrum(md, 1, homology=H).eigenvalues[0])
    rel = {e: abs(v - 4 * e * e) / (4 * e * e) for e, v in meshed.items()}
    ok = closed_ok and all(r <= 0.15 for r in rel.values())
    return ok, (f"closed form exact={closed_ok}; meshed rel. errors "
                + ", ".join(f"eps={e:g}: {r:.4f}" for e, r in rel.items())), \
        {"closed_form": {str(e): v for e, v in closed.items()},
         "meshed": {str(e): v for e, v in meshed.items()}, "resolution": BERGER_RESOLUTION}


def criterion_5():
    rows = {}
    ok = True
    for eps in BERGER_MESHED:
        md, H = _berger(eps)
        cx = md.complex
        loop = Chain.edge_path(cx, fiber_loop(md))
        length = loop.l1(md.edge_lengths)
        fill = min_filling_area(md, H, loop)
        upper, lower = berger_h1_bounds(eps)
        ratio = length / fill.area
        good = ratio <= upper * 1.1 and fill.area >= lower * 0.95
        ok &= good
        rows[str(eps)] = {"length": length, "area": fill.area, "ratio": ratio, "bound": upper,
                          "fiber_length": 2 * math.pi * eps}
    return ok, "; ".join(f"eps={e}: l/A={r['ratio']:.4f} (<= {1.1 * r['bound']:.3f}), "
                         f"A={r['area']:.4f} (>= {0.95 * math.pi:.4f})" for e, r in rows.items()), rows


def criterion_6():
    vals = []
    errs = []
    for eps in CUSP_EPSILONS:
        res = cusp_eigenvalue(CuspModel(eps, CUSP_GRID))
        vals.append(res.finite_difference)
        errs.append(res.relative_error)
    # epsilons are listed in decreasing order, so eigenvalues must decrease
    monotone = all(b < a for a, b in zip(vals, vals[1:]))
    ok = monotone and max(errs) <= 1e-3
    return ok, f"max rel. error {max(errs):.2e}, monotone={monotone}", \
        {"epsilons": list(CUSP_EPSILONS), "finite_difference": vals, "relative_errors": errs}


def _fixture_cycles(cx):
    H = homology_basis(cx)
    tree, parent = spanning_forest(cx)
    cycles = [fundamental_cycle(cx, parent, int(e))[0] for e in np.flatnonzero(~tree)]
    return H, [g for g in cycles if classify_cycle(cx, H, g).order != math.inf]


def criterion_7():
    rows = []
    ok = True
    extras = {"octahedron": [fixtures.octahedron_equator()],
              "projective_plane": [fixtures.projective_plane_core_loop()]}
    for name, mesh in _fixture_meshes().items():
        cx = mesh.complex
        if cx.count(2) > 40:
            continue
        md = skeleton_metric(cx, mesh.vertices)
        H, cycles = _fixture_cycles(cx)
        cycles += [Chain.edge_path(cx, p) for p in extras.get(name, [])]
        for g in cycles:
            res = min_filling_area(md, H, g, integer_check=True)
            ilp = res.area + res.integrality_gap
            torsion = classify_cycle(cx, H, g).order > 1
            tol = 1e-9 * max(1.0, ilp)
            good = res.area <= ilp + tol and (torsion or abs(res.area - ilp) <= tol)
            ok &= good
            rows.append({"fixture": name, "lp": res.area, "ilp": ilp, "r": res.r_used, "torsion": torsion})
    worst = max(abs(r["ilp"] - r["lp"]) for r in rows if not r["torsion"])
    return ok, f"{len(rows)} cycles on {len({r['fixture'] for r in rows})} fixtures, " \
               f"max |LP - ILP| (torsion-free) {worst:.1e}", {"rows": rows}


@functools.lru_cache(maxsize=None)
def _lln_runs():
    problem = _flow_problem()
    runs = {}
    for rep in range(MC_REPLICATES):
        for n in MC_SIZES:
            seed = 1000 * rep + n
            record = rep == 0 and n <= MC_RECORD_LIMIT
            report, traj, un = run_monte_carlo(problem, n, MC_T, seed, record=record)
            runs[(rep, n)] = (report, traj if record else None, un)
    return problem, runs


def criterion_8():
    problem, runs = _lln_runs()
    rms = []
    for n in MC_SIZES:
        e = [runs[(rep, n)][0].errors["length"] for rep in range(MC_REPLICATES)]
        rms.append(float(np.sqrt(np.mean(np.square(e)))))
    slope = lln_slope(MC_SIZES, rms)
    big = runs[(0, MC_SIZES[-1])][0]
    dev = abs(big.estimates["beta"] - problem.alpha_L2_sq)
    se = big.stderr["beta"]
    ok = abs(slope + 0.5) <= 0.15 and dev <= 3 * se
    return ok, f"slope {slope:.3f} (target -0.5 +/- 0.15); item (4) |dev| {dev:.4f} <= 3 x {se:.4f}", \
        {"sizes": list(MC_SIZES), "rms_length_error": rms, "slope": slope, "beta_estimate": big.estimates["beta"],
         "beta_target": problem.alpha_L2_sq, "beta_stderr": se}


def _projected_chain(problem, traj, un):
    proj = project_to_skeleton(problem.metric, unrolled_polyline(traj, un))
    return proj, proj.chain + un.generator_chain


def criterion_9():
    problem, runs = _lln_runs()
    md, H = problem.metric, problem.homology
    worst = 0.0
    fillable = 0
    checked = 0
    for (rep, n), (report, traj, un) in sorted(runs.items()):
        gamma_len = un.total_length
        worst = max(worst, un.residual / gamma_len)
        if traj is not None:
            checked += 1
            _, chain = _projected_chain(problem, traj, un)
            res = min_filling_area(md, H, chain, r=H.r_universal, integer_check=False)
            fillable += res.lp_status == "optimal"
    ok = worst <= 1e-6 and fillable == checked
    return ok, f"max |<beta_j, Gamma>| / l(Gamma) = {worst:.1e} over {len(runs)} curves; " \
               f"{fillable}/{checked} projections LP-fillable", \
        {"max_relative_pairing": worst, "fillable": fillable, "checked": checked}


def criterion_10():
    problem = _flow_problem()
    n, T = MC_CONVERGED
    report, traj, un = run_monte_carlo(problem, n, T, 2024, record=True)
    md, H = problem.metric, problem.homology
    proj, chain = _projected_chain(problem, traj, un)
    fill = min_filling_area(md, H, chain, r=H.r_universal, integer_check=False)
    rho = chain.l1(md.edge_lengths) / fill.area
    rel_se = report.stderr["beta"] / abs(report.estimates["beta"])
    lhs = problem.d_alpha_L1 * problem.alpha_sup
    rhs = rho * problem.alpha_L2_sq * (1 - 5 * rel_se)
    ok = lhs >= rhs
    return ok, f"|d alpha|_1 |alpha|_inf = {lhs:.4f} >= rho {rho:.4f} x |alpha|_2^2 x (1 - 5 se) = {rhs:.4f}", \
        {"lhs": lhs, "rhs": rhs, "rho": rho, "relative_stderr": rel_se, "n": n, "T": T,
         "area": fill.area, "chain_length": chain.l1(md.edge_lengths)}


def criterion_11():
    from . import cli

    outputs = []
    commands = [["montecarlo", "--model", "torus", "--n", "4", "--n-traj", "64", "--T", "2", "--seed", "7"],
                ["cheeger", "--model", "torus", "--n", "3", "--seed", "3"]]
    same = []
    with tempfile.TemporaryDirectory() as tmp:
        for ci, cmd in enumerate(commands):
            blobs = []
            for rep in range(2):
                out = os.path.join(tmp, f"c{ci}r{rep}.json")
                code = cli.main(cmd + ["--out", out, "--quiet"])
                if code != 0:
                    return False, f"command {cmd[0]} exited with {code}", {}
                blobs.append(open(out, "rb").read())
            same.append(blobs[0] == blobs[1])
            outputs.append(cmd[0])
    ok = all(same)
    return ok, ", ".join(f"{c}: {'identical' if s else 'DIFFERENT'}" for c, s in zip(outputs, same)), \
        {"commands": outputs, "identical": same}


CRITERIA = [
    (1, "exact chain-complex identity", criterion_1),
    (2, "homology oracles", criterion_2),
    (3, "flat-torus coexact spectrum", criterion_3),
    (4, "Berger closed form and meshed eigenvalue", criterion_4),
    (5, "Berger Cheeger bounds", criterion_5),
    (6, "cusp collapse", criterion_6),
    (7, "filling LP vs integer optimum", criterion_7),
    (8, "Monte Carlo law of large numbers", criterion_8),
    (9, "homological triviality of constructed curves", criterion_9),
    (10, "empirical inequality chain", criterion_10),
    (11, "determinism", criterion_11),
]


def run_criterion(number) -> CriterionResult:
    num, title, fn = CRITERIA[number - 1]
    t0 = time.perf_counter()
    try:
        ok, summary, measured = fn()
    except Exception as exc:  # reported as a failure, not raised
        ok, summary, measured = False, f"error: {type(exc).__name__}: {exc}", {}
    return CriterionResult(num, title, bool(ok), summary, measured, time.perf_counter() - t0)


def run_all(numbers=None):
    return [run_criterion(k) for k in (numbers or [c[0] for c in CRITERIA])]


def results_json(results):
    return json.dumps([r.to_dict() for r in results], indent=1, sort_keys=True, default=float)
