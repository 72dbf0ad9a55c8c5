"""Trajectories of the divergence-free field dual to d(alpha), closing and
unrolling of trajectory families, and Monte Carlo averages along them.

On each tetrahedron the field is constant, so a trajectory is a straight
segment until it reaches a face, where it continues in the neighbouring
tetrahedron. Integration is exact up to rounding.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .complex import Chain
from .dec import LOCAL_EDGES, MetricData, norms
from .filling import Polyline, _weighted_graph, edge_path_polyline, shortest_path
from .homology import HomologyBasis

JITTER = 1e-12


class FlowError(ArithmeticError):
    pass


@dataclass
class VectorField:
    """Piecewise-constant field given by its reference-coordinate components."""

    metric: MetricData
    velocity: np.ndarray
    flux: np.ndarray

    def __post_init__(self):
        v = self.velocity
        self.bary_velocity = np.column_stack([-v.sum(axis=1), v])
        self.neighbors, self.maps = _neighbor_tables(self.metric)

    def reversed(self):
        return VectorField(self.metric, -self.velocity, -self.flux)

    def speed(self):
        """Pointwise norm of the field on each tetrahedron."""
        md = self.metric
        return np.sqrt(np.einsum("ti,tij,tj->t", self.velocity, md.gram, self.velocity))


def _neighbor_tables(md):
    if "nbr" in md._cache:
        return md._cache["nbr"]
    cx = md.complex
    tets = cx.simplices[3]
    T = len(tets)
    faces = cx.faces(3, 2)
    d3 = abs(cx.boundary(3)).tocsr()
    nbr = np.full((T, 4), -1, dtype=np.int64)
    maps = np.zeros((T, 4, 4), dtype=np.int64)
    for t in range(T):
        for i in range(4):
            f = faces[t, 3 - i]
            cof = d3.indices[d3.indptr[f]:d3.indptr[f + 1]]
            other = [u for u in cof if u != t]
            if not other:
                continue
            u = int(other[0])
            nbr[t, i] = u
            tu = list(tets[u])
            for j in range(4):
                if j != i:
                    maps[t, i, j] = tu.index(tets[t][j])
            missing = [k for k in range(4) if tets[u][k] not in tets[t]]
            maps[t, i, i] = missing[0]
    md._cache["nbr"] = (nbr, maps)
    return nbr, maps


def build_vector_field(md: MetricData, alpha) -> VectorField:
    """Field whose flux 2-cochain is d(alpha)."""
    c2 = md.d(1) @ np.asarray(alpha, dtype=float)
    return VectorField(md, md.velocity(c2), c2)


def field_from_flux(md: MetricData, c2, *, tol=1e-10) -> VectorField:
    c2 = np.asarray(c2, dtype=float)
    div = md.d(2) @ c2
    if np.abs(div).max() > tol * max(1.0, np.abs(c2).max()):
        raise FlowError("flux cochain is not closed, so the field is not divergence free")
    return VectorField(md, md.velocity(c2), c2)


@dataclass
class Trajectories:
    """A batch of trajectories run for the same time ``T``."""

    T: float
    start_tet: np.ndarray
    start_bary: np.ndarray
    end_tet: np.ndarray
    end_bary: np.ndarray
    length: np.ndarray
    integrals: np.ndarray
    steps: np.ndarray
    jitters: int
    polylines: list | None = None
    times: list | None = None
    time_integrals: np.ndarray | None = None

    def __len__(self):
        return len(self.start_tet)


def _segment_integrals(md, tets, b0, b1, cochains):
    """Exact integrals of Whitney 1-forms along straight segments, shape (k, m)."""
    if cochains is None or cochains.shape[1] == 0:
        return np.zeros((len(tets), 0))
    mid = 0.5 * (b0 + b1)
    db = b1 - b0
    w = np.empty((len(tets), 6))
    for e, (a, c) in enumerate(LOCAL_EDGES):
        w[:, e] = mid[:, a] * db[:, c] - mid[:, c] * db[:, a]
    loc = cochains[md.complex.faces(3, 1)[tets]]  # (k, 6, m)
    return np.einsum("ke,kem->km", w, loc)


def integrate(field: VectorField, start_tet, start_bary, T, *, cochains=None, rates=None, record=False,
              max_steps=None) -> Trajectories:
    """Flow every start point for time T (negative T flows backwards).

    ``cochains`` (E x m) are integrated as Whitney 1-forms along each
    trajectory; ``rates`` (one value per tetrahedron) are integrated in time.
    """
    md = field.metric
    if T < 0:
        out = integrate(field.reversed(), start_tet, start_bary, -T, cochains=cochains, rates=rates,
                        record=record, max_steps=max_steps)
        out.T = T
        return out
    tet = np.array(start_tet, dtype=np.int64).copy()
    b = np.array(start_bary, dtype=float).copy()
    n = len(tet)
    cochains = None if cochains is None else np.asarray(cochains, dtype=float).reshape(md.complex.count(1), -1)
    m = 0 if cochains is None else cochains.shape[1]
    t_left = np.full(n, float(T))
    length = np.zeros(n)
    integ = np.zeros((n, m))
    tint = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    stuck = np.zeros(n, dtype=np.int64)
    jitters = 0
    rec = [] if record else None
    active = np.flatnonzero(t_left > 0)
    bv = field.bary_velocity
    vmax = np.abs(bv).max() if bv.size else 0.0
    limit = max_steps or 10_000_000
    while len(active):
        tt = tet[active]
        bb = b[active]
        v = bv[tt]
        neg = v < -1e-14 * max(vmax, 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(neg, np.maximum(bb, 0.0) / -v, np.inf)
        face = np.argmin(tau, axis=1)
        tmin = tau[np.arange(len(active)), face]
        hit = tmin <= t_left[active]
        dt = np.where(hit, tmin, t_left[active])
        nb = bb + v * dt[:, None]
        rows = np.flatnonzero(hit)
        nb[rows, face[rows]] = 0.0
        np.maximum(nb, 0.0, out=nb)
        nb /= nb.sum(axis=1, keepdims=True)
        du = (nb - bb)[:, 1:]
        length[active] += np.sqrt(np.maximum(np.einsum("ki,kij,kj->k", du, md.gram[tt], du), 0.0))
        if m:
            integ[active] += _segment_integrals(md, tt, bb, nb, cochains)
        if rates is not None:
            tint[active] += rates[tt] * dt
        if record:
            moved = dt > 0
            rec.append((active[moved], tt[moved], bb[moved], nb[moved], (T - t_left[active])[moved], dt[moved]))
        t_left[active] -= dt
        steps[active] += 1
        # cross faces
        hr = active[rows]
        if len(rows):
            f = face[rows]
            src = tt[rows]
            new_t = field.neighbors[src, f]
            if np.any(new_t < 0):
                raise FlowError("trajectory reached a boundary face")
            mp = field.maps[src, f]  # (h, 4)
            moved_b = np.zeros((len(rows), 4))
            np.put_along_axis(moved_b, mp, nb[rows], axis=1)
            tet[hr] = new_t
            nb[rows] = moved_b
        b[active] = nb
        stuck[active] = np.where(dt <= 0, stuck[active] + 1, 0)
        bad = active[stuck[active] > 8]
        if len(bad):
            # repeated zero-length steps: the point sits on a lower-dimensional face
            b[bad] = (1 - JITTER) * b[bad] + JITTER * 0.25
            stuck[bad] = 0
            jitters += len(bad)
        if steps.max() > limit:
            raise FlowError("step limit exceeded")
        active = active[t_left[active] > 0]
    polys = times = None
    if record:
        polys, times = _group_records(rec, n)
    return Trajectories(float(T), np.array(start_tet), np.array(start_bary, dtype=float), tet, b, length,
                        integ, steps, jitters, polys, times, tint)


def _group_records(rec, n):
    if not rec:
        empty = Polyline(np.zeros(0, dtype=np.int64), np.zeros((0, 4)), np.zeros((0, 4)))
        return [empty] * n, [np.zeros((0, 2))] * n
    idx = np.concatenate([r[0] for r in rec])
    tets = np.concatenate([r[1] for r in rec])
    b0 = np.vstack([r[2] for r in rec])
    b1 = np.vstack([r[3] for r in rec])
    t0 = np.concatenate([r[4] for r in rec])
    dt = np.concatenate([r[5] for r in rec])
    order = np.argsort(idx, kind="stable")
    idx, tets, b0, b1, t0, dt = idx[order], tets[order], b0[order], b1[order], t0[order], dt[order]
    cuts = np.searchsorted(idx, np.arange(n + 1))
    polys, times = [], []
    for i in range(n):
        s = slice(cuts[i], cuts[i + 1])
        polys.append(Polyline(tets[s], b0[s], b1[s]))
        times.append(np.column_stack([t0[s], t0[s] + dt[s]]))
    return polys, times


def integrate_trajectory(field: VectorField, tet, bary, T, **kw) -> Trajectories:
    return integrate(field, [tet], [bary], T, **kw)


def sample_points(md: MetricData, n, seed):
    """n points distributed by the Riemannian volume; point i depends only on (seed, i)."""
    cdf = np.cumsum(md.volumes)
    cdf /= cdf[-1]
    tets = np.empty(n, dtype=np.int64)
    bary = np.empty((n, 4))
    for i in range(n):
        rng = np.random.default_rng([int(seed), i])
        tets[i] = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(cdf) - 1)
        e = rng.exponential(size=4)
        bary[i] = e / e.sum()
    return tets, bary


def trajectory_csv(md, traj: Trajectories) -> str:
    """Rows ``traj,t,x,y,z,cell`` at every recorded segment endpoint."""
    if traj.polylines is None:
        raise FlowError("trajectories were integrated without recording")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["traj", "t", "x", "y", "z", "cell"])
    for i, (p, tm) in enumerate(zip(traj.polylines, traj.times)):
        for k in range(len(p)):
            for bb, t in ((p.starts[k], tm[k, 0]),) + (((p.ends[k], tm[k, 1]),) if k == len(p) - 1 else ()):
                x = md.ambient_point(int(p.tets[k]), bb) if md.cell_coords is not None else np.full(3, np.nan)
                w.writerow([i, repr(float(t))] + [repr(float(c)) for c in x[:3]] + [int(p.tets[k])])
    return buf.getvalue()


# ------------------------------------------------------ closing, unrolling

@dataclass
class Unrolled:
    """A closed family of trajectories made null-homologous over the reals.

    ``coords[j]`` is the rounded pairing of the closed curve with cocycle j
    and ``residual`` the largest rounding error. ``generator_chain`` is
    ``-sum_j coords[j] * cycles[j]``.
    """

    coords: np.ndarray
    residual: float
    gamma_length: float
    connector_length: float
    generator_length: float
    connectors: list
    generator_chain: Chain
    n: int
    T: float

    @property
    def nu_length(self):
        return self.connector_length + self.generator_length

    @property
    def total_length(self):
        return self.gamma_length + self.nu_length


def _snap_vertex(md, tet, bary):
    verts = md.complex.simplices[3][tet]
    best = np.flatnonzero(bary >= bary.max() - 1e-12)
    return min(int(verts[i]) for i in best)


def _point_segment(md, tet, b0, b1):
    return Polyline(np.array([tet]), np.array([b0], dtype=float), np.array([b1], dtype=float))


def _vertex_bary(md, tet, v):
    b = np.zeros(4)
    b[list(md.complex.simplices[3][tet]).index(v)] = 1.0
    return b


def close_and_unroll(md: MetricData, H: HomologyBasis, traj: Trajectories, *, graph=None) -> Unrolled:
    """Join trajectory i's end to trajectory i+1's start and cancel homology.

    Each connector is a straight piece to the nearest vertex, a shortest
    edge path, and a straight piece to the next start. The pairings of the
    closed curve with the dual cocycles are rounded to integers; that many
    copies of the basis cycles are subtracted, reached from a base vertex by
    a path run forward and back.
    """
    n = len(traj)
    k = H.rank
    graph = _weighted_graph(md) if graph is None else graph
    beta = H.cocycle_matrix(md.complex.count(1)).T if k else np.zeros((md.complex.count(1), 0))
    if traj.integrals.shape[1] != k:
        raise FlowError("trajectories must carry the integrals of the dual cocycles")
    pair = traj.integrals.sum(axis=0).astype(float)
    connectors = []
    conn_len = 0.0
    base = None
    for i in range(n):
        j = (i + 1) % n
        et, eb = int(traj.end_tet[i]), traj.end_bary[i]
        st, sb = int(traj.start_tet[j]), traj.start_bary[j]
        if et == st and np.abs(eb - sb).max() < 1e-9:
            continue
        a = _snap_vertex(md, et, eb)
        c = _snap_vertex(md, st, sb)
        if base is None:
            base = a
        path, _ = shortest_path(md, a, c, graph)
        parts = [_point_segment(md, et, eb, _vertex_bary(md, et, a)), edge_path_polyline(md, path),
                 _point_segment(md, st, _vertex_bary(md, st, c), sb)]
        poly = Polyline.concat(parts)
        connectors.append(poly)
        conn_len += poly.length(md)
        if k:
            pair += _segment_integrals(md, poly.tets, poly.starts, poly.ends, beta).sum(axis=0)
    coords = np.round(pair).astype(np.int64)
    residual = float(np.abs(pair - coords).max()) if k else 0.0
    if residual >= 0.1:
        raise FlowError(f"homology pairing is not near an integer (residual {residual:.3f})")
    gen = Chain(1)
    gen_len = 0.0
    if base is None:
        base = _snap_vertex(md, int(traj.start_tet[0]), traj.start_bary[0])
    for j in range(k):
        if coords[j] == 0:
            continue
        cyc = H.cycles[j]
        v = int(md.complex.simplices[1][cyc.support()[0]][0])
        _, dist = shortest_path(md, base, v, graph)
        gen = gen - int(coords[j]) * cyc
        gen_len += 2 * dist + abs(int(coords[j])) * cyc.l1(md.edge_lengths)
    return Unrolled(coords, residual, float(traj.length.sum()), conn_len, gen_len, connectors, gen, n, traj.T)


def unrolled_polyline(traj: Trajectories, un: Unrolled) -> Polyline:
    """Trajectories and connectors in order, as one closed polyline."""
    if traj.polylines is None:
        raise FlowError("trajectories were integrated without recording")
    parts = []
    ci = 0
    n = len(traj)
    for i in range(n):
        parts.append(traj.polylines[i])
        j = (i + 1) % n
        same = traj.end_tet[i] == traj.start_tet[j] and np.abs(traj.end_bary[i] - traj.start_bary[j]).max() < 1e-9
        if not same:
            parts.append(un.connectors[ci])
            ci += 1
    return Polyline.concat(parts)


# --------------------------------------------------------- primitives

def eigen_primitive(md: MetricData, alpha, *, tol=1e-6):
    """Primitive of star(alpha) for an eigenform alpha, as one covector per tetrahedron.

    With ``lam`` the Rayleigh quotient, ``beta = star(d alpha) / lam``
    satisfies the weak identity ``integral(beta ^ d phi) = <alpha, phi>``
    for every Whitney 1-form phi, because ``K alpha = lam M alpha``. Along
    a trajectory of the field X dual to star(d alpha), ``beta(X) = |X|^2 / lam``.

    Returns ``(lam, covectors)`` with covectors of shape (T, 3).
    """
    alpha = np.asarray(alpha, dtype=float)
    D1 = md.d(1)
    Ka = D1.T @ (md.mass[2] @ (D1 @ alpha))
    Ma = md.mass[1] @ alpha
    lam = float(alpha @ Ka / (alpha @ Ma))
    rel = np.linalg.norm(Ka - lam * Ma) / max(np.linalg.norm(Ka), 1e-300)
    if not lam > 0 or rel > tol:
        raise FlowError(f"alpha is not an eigenform of the coexact Laplacian (relative residual {rel:.2e})")
    w = md.exterior_derivative_axial(alpha)
    cov = md.orientation[:, None] * np.einsum("tij,tj->ti", md.gram, w) / np.sqrt(md.det_gram)[:, None]
    return lam, cov / lam


def wedge_with_exterior_derivative(md: MetricData, covectors, phi):
    """Integral of beta ^ d(phi) for piecewise-constant beta and a Whitney 1-form phi."""
    w = md.exterior_derivative_axial(phi)
    # beta ^ w = (beta . w) du1du2du3, and the reference cell has volume 1/6
    return float(np.sum(md.orientation * np.einsum("ti,ti->t", covectors, w)) / 6.0)


# --------------------------------------------------------- Monte Carlo

@dataclass
class MonteCarloReport:
    n: int
    T: float
    seed: int
    estimates: dict
    targets: dict
    errors: dict
    stderr: dict
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"n": self.n, "T": self.T, "seed": self.seed, "estimates": self.estimates,
                "targets": self.targets, "errors": self.errors, "stderr": self.stderr,
                "diagnostics": self.diagnostics}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def batch_stderr(samples, batches=16):
    """Standard error of the mean of ``samples`` from batch means."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    B = min(batches, n)
    if B < 2:
        return float("nan")
    means = np.array([c.mean() for c in np.array_split(x, B)])
    return float(means.std(ddof=1) / math.sqrt(B))


@dataclass
class FlowProblem:
    """An eigenform alpha (unit L2), its field and the primitive beta of star(alpha)."""

    metric: MetricData
    homology: HomologyBasis
    alpha: np.ndarray
    eigenvalue: float
    beta: np.ndarray
    field: VectorField
    d_alpha_L1: float
    alpha_L2_sq: float
    alpha_sup: float


def prepare_problem(md: MetricData, H: HomologyBasis, alpha) -> FlowProblem:
    alpha = np.asarray(alpha, dtype=float)
    alpha = alpha / math.sqrt(alpha @ (md.mass[1] @ alpha))
    lam, beta = eigen_primitive(md, alpha)
    fld = build_vector_field(md, alpha)
    d_l1 = float(np.sum(md.volumes * fld.speed()))
    a_norms = norms(md, alpha, 1)
    return FlowProblem(md, H, alpha, lam, beta, fld, d_l1, a_norms["L2"] ** 2, a_norms["Linf"])


def run_monte_carlo(problem: FlowProblem, n, T, seed, *, record=False, batches=16, unroll=True):
    """Averages along n volume-distributed trajectories of length T.

    Returns a ``MonteCarloReport`` and the raw ``Trajectories``. The
    estimates are scaled by the total volume so that they approximate
    spatial integrals:

    * ``length``: vol * mean(length_i / T), target the L1 norm of d(alpha);
    * ``beta``: vol * mean(integral of beta along trajectory i / T),
      target the squared L2 norm of alpha;
    * ``homology``: largest |coordinate| of the closed curve over nT;
    * ``nu_fraction``: length of connectors and unrolling paths over nT.
    """
    md, H = problem.metric, problem.homology
    tets, bary = sample_points(md, n, seed)
    k = H.rank
    cochains = H.cocycle_matrix(md.complex.count(1)).T if k else None
    # beta(X) is constant on each tetrahedron
    rate = np.einsum("ti,ti->t", problem.beta, problem.field.velocity)
    traj = integrate(problem.field, tets, bary, T, cochains=cochains, rates=rate, record=record)
    beta_int = traj.time_integrals
    if not k:
        traj.integrals = np.zeros((n, 0))
    vol = md.total_volume
    s_len = vol * traj.length / T
    s_beta = vol * beta_int / T
    est = {"length": float(s_len.mean()), "beta": float(s_beta.mean())}
    se = {"length": batch_stderr(s_len, batches), "beta": batch_stderr(s_beta, batches)}
    diag = {"jitters": int(traj.jitters), "mean_steps": float(traj.steps.mean())}
    un = None
    if unroll:
        un = close_and_unroll(md, H, traj)
        est["homology"] = float(np.abs(un.coords).max() / (n * T)) if k else 0.0
        est["nu_fraction"] = float(un.nu_length / (n * T))
        diag["homology_residual"] = un.residual
        diag["coords"] = [int(c) for c in un.coords]
        diag["gamma_length"] = un.gamma_length
        diag["nu_length"] = un.nu_length
    targets = {"length": problem.d_alpha_L1, "beta": problem.alpha_L2_sq, "homology": 0.0, "nu_fraction": 0.0}
    errors = {key: abs(est[key] - targets[key]) for key in est}
    report = MonteCarloReport(int(n), float(T), int(seed), est, {k_: targets[k_] for k_ in est}, errors, se, diag)
    return report, traj, un


def lln_slope(ns, errors):
    """Least-squares slope of log(error) against log(n)."""
    x, y = np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
