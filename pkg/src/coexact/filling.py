"""Least-area fillings of 1-cycles, projection of curves to the 1-skeleton,
and upper estimates of the isoperimetric ratio length/area."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .complex import Chain
from .dec import MetricData
from .homology import HomologyBasis, HomologyError, classify_cycle, fundamental_cycle, spanning_forest
from .lp import solve_ilp, solve_lp

ILP_TRIANGLE_LIMIT = 40


class FillingError(ValueError):
    """No real filling exists for the requested multiple."""


@dataclass
class FillingResult:
    """Least area of a real 2-chain bounding ``r_used`` times a cycle, divided by r.

    ``chain`` holds the optimal real coefficients per triangle.
    ``integrality_gap`` is (integer optimum - real optimum) / r when the
    integer program was solved, else None.
    """

    area: float
    chain: np.ndarray
    r_used: int
    lp_status: str
    integrality_gap: float | None
    backend: str
    residual: float


def _cycle_chain(md, gamma):
    if isinstance(gamma, Chain):
        return gamma
    arr = np.asarray(gamma)
    return Chain.from_array(1, np.round(arr).astype(np.int64))


def filling_lp(md: MetricData, rhs):
    """LP data for min sum(area |x|) with d x = rhs, split as x = x+ - x-."""
    d2 = md.complex.boundary(2).astype(float)
    A = sp.hstack([d2, -d2]).tocsr()
    c = np.concatenate([md.triangle_areas, md.triangle_areas])
    return c, A, np.asarray(rhs, dtype=float)


def min_filling_area(md: MetricData, H: HomologyBasis, gamma, *, r=None, backend="auto",
                     integer_check=None) -> FillingResult:
    """Least area of a real filling of ``r * gamma``, normalized by r.

    ``r`` defaults to the order of the class of ``gamma``; ``"universal"``
    uses the least common multiple of all torsion orders. A cycle whose
    class has infinite order, or an ``r`` that does not kill the class,
    raises ``FillingError``.
    """
    cx = md.complex
    g = _cycle_chain(md, gamma)
    if not g.boundary(cx).is_zero():
        raise HomologyError("input is not a cycle")
    cls = classify_cycle(cx, H, g)
    if cls.order == math.inf:
        raise FillingError(f"no multiple of the cycle bounds (free coordinates {cls.coords})")
    if r is None:
        r_used = int(cls.order)
    elif r == "universal":
        r_used = H.r_universal
    else:
        r_used = int(r)
    if r_used <= 0 or r_used % int(cls.order):
        raise FillingError(f"{r_used} times the cycle is not a boundary (class order {cls.order})")
    F = cx.count(2)
    if g.is_zero():
        return FillingResult(0.0, np.zeros(F), r_used, "optimal", 0.0, "trivial", 0.0)
    rhs = r_used * g.to_array(cx.count(1))
    c, A, b = filling_lp(md, rhs)
    res = solve_lp(c, A, b, backend=backend)
    if res.status != "optimal":
        raise FillingError(f"filling LP ended with status {res.status}")
    x = res.x[:F] - res.x[F:]
    resid = float(np.abs(cx.boundary(2) @ x - rhs).max())
    area = float(md.triangle_areas @ np.abs(x)) / r_used
    gap = None
    if integer_check or (integer_check is None and F <= ILP_TRIANGLE_LIMIT):
        ilp = solve_ilp(c, A, b)
        if ilp.status == "optimal":
            gap = ilp.fun / r_used - area
    return FillingResult(area, x, r_used, res.status, gap, res.backend, resid)


# ----------------------------------------------------------- polylines

@dataclass
class Polyline:
    """Piecewise-straight curve: segment k runs inside tetrahedron ``tets[k]``
    from barycentric point ``starts[k]`` to ``ends[k]``. Consecutive
    segments meet at the same physical point."""

    tets: np.ndarray
    starts: np.ndarray
    ends: np.ndarray

    def __len__(self):
        return len(self.tets)

    @classmethod
    def concat(cls, parts):
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 4)), np.zeros((0, 4)))
        return cls(np.concatenate([p.tets for p in parts]), np.vstack([p.starts for p in parts]),
                   np.vstack([p.ends for p in parts]))

    def segment_lengths(self, md):
        d = (self.ends - self.starts)[:, 1:]
        G = md.gram[self.tets]
        return np.sqrt(np.maximum(np.einsum("si,sij,sj->s", d, G, d), 0.0))

    def length(self, md):
        return float(self.segment_lengths(md).sum())


def vertex_point(md, tet, vertex):
    """Barycentric coordinates of a mesh vertex inside a tetrahedron containing it."""
    b = np.zeros(4)
    b[list(md.complex.simplices[3][tet]).index(vertex)] = 1.0
    return b


def edge_path_polyline(md, path):
    """Polyline along a vertex path of mesh edges."""
    cx = md.complex
    tets, starts, ends = [], [], []
    e2t = _edge_to_tet(md)
    for a, b in zip(path[:-1], path[1:]):
        if a == b:
            continue
        t = e2t[cx.index((a, b))]
        tets.append(t)
        starts.append(vertex_point(md, t, a))
        ends.append(vertex_point(md, t, b))
    if not tets:
        return Polyline.concat([])
    return Polyline(np.array(tets), np.array(starts), np.array(ends))


def _edge_to_tet(md):
    if "e2t" not in md._cache:
        fe = md.complex.faces(3, 1)
        e2t = np.empty(md.complex.count(1), dtype=np.int64)
        e2t[fe.ravel()[::-1]] = np.repeat(np.arange(len(fe)), 6)[::-1]
        md._cache["e2t"] = e2t
    return md._cache["e2t"]


def _tri_area(G, p, q, r):
    u, v = (q - p)[1:], (r - p)[1:]
    uu, vv, uv = u @ G @ u, v @ G @ v, u @ G @ v
    return 0.5 * math.sqrt(max(uu * vv - uv * uv, 0.0))


@dataclass
class SkeletonProjection:
    """Edge chain homotopic to a polyline, with the cone triangles between them."""

    chain: Chain
    correction_area: float
    correction_triangles: list = field(repr=False)
    curve_length: float = 0.0
    chain_length: float = 0.0

    @property
    def constant(self):
        """Ratio bound max(l(chain), area) / l(curve)."""
        if self.curve_length == 0:
            return 0.0
        return max(self.chain_length, self.correction_area) / self.curve_length


def project_to_skeleton(md: MetricData, poly: Polyline, *, closed=True) -> SkeletonProjection:
    """Push a polyline onto mesh edges.

    Every segment endpoint is sent to the vertex carrying its largest
    barycentric weight (among vertices shared by the adjoining segments);
    consecutive images are joined by the edge of the common tetrahedron.
    The region swept in between is covered by two cone triangles per
    segment, whose total area is reported.
    """
    cx = md.complex
    tets = md.complex.simplices[3]
    s = len(poly)
    if s == 0:
        return SkeletonProjection(Chain(1), 0.0, [], 0.0, 0.0)
    # snapped vertex for every junction point: junction k is the start of segment k
    snaps = np.empty(s + 1, dtype=np.int64)
    for k in range(s + 1):
        if k == s and closed:
            snaps[k] = snaps[0]
            continue
        if k < s:
            t, b = poly.tets[k], poly.starts[k]
        else:
            t, b = poly.tets[k - 1], poly.ends[k - 1]
        verts = tets[t]
        allowed = np.ones(4, dtype=bool)
        prev = k - 1 if k > 0 else (s - 1 if closed else None)
        if k < s and prev is not None:
            allowed &= np.isin(verts, tets[poly.tets[prev]])
        w = np.where(allowed, b, -1.0)
        best = np.flatnonzero(w >= w.max() - 1e-12)
        snaps[k] = min(int(verts[i]) for i in best)
    coeffs = {}
    area = 0.0
    tris = []
    for k in range(s):
        t = int(poly.tets[k])
        G = md.gram[t]
        verts = list(tets[t])
        a, bv = int(snaps[k]), int(snaps[k + 1])
        if a not in verts or bv not in verts:
            raise ValueError(f"snap vertex outside tetrahedron {t} at segment {k}")
        p, q = poly.starts[k], poly.ends[k]
        pa, pb = np.zeros(4), np.zeros(4)
        pa[verts.index(a)] = 1.0
        pb[verts.index(bv)] = 1.0
        for tri in ((p, q, pb), (p, pb, pa)):
            ar = _tri_area(G, *tri)
            if ar > 0:
                area += ar
                tris.append((t, np.array(tri)))
        if a != bv:
            e = cx.index((a, bv))
            coeffs[e] = coeffs.get(e, 0) + (1 if a < bv else -1)
    chain = Chain(1, coeffs)
    return SkeletonProjection(chain, area, tris, poly.length(md), chain.l1(md.edge_lengths))


# ------------------------------------------------------ Cheeger estimate

@dataclass
class CheegerEstimate:
    """Running minimum of length/area over bounding cycles examined."""

    ratio: float
    best_cycle: Chain | None
    best_length: float
    best_area: float
    best_r: int
    table: list
    history: list

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cycle_id", "source", "length", "r", "area", "ratio"])
        for row in self.table:
            w.writerow([row["cycle_id"], row["source"], repr(row["length"]), row["r"],
                        repr(row["area"]), repr(row["ratio"])])
        return buf.getvalue()

    def to_dict(self):
        return {"ratio": self.ratio, "best_length": self.best_length, "best_area": self.best_area,
                "best_r": self.best_r, "cycles_examined": len(self.table), "history": self.history}


@dataclass
class SamplerConfig:
    seed: int = 0
    tree_cycles: int = 64
    short_cycles: int = 64
    curves: list = field(default_factory=list)
    extra_cycles: list = field(default_factory=list)
    backend: str = "auto"
    r: object = None


def _weighted_graph(md):
    e = md.complex.simplices[1]
    n = md.complex.n_vertices
    w = md.edge_lengths
    g = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]),
                                               np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n))
    return g.tocsr()


def shortest_path(md, a, b, graph=None):
    g = _weighted_graph(md) if graph is None else graph
    dist, pred = dijkstra(g, indices=a, return_predecessors=True)
    if not np.isfinite(dist[b]):
        raise ValueError(f"no edge path from {a} to {b}")
    path = [b]
    while path[-1] != a:
        path.append(int(pred[path[-1]]))
    return path[::-1], float(dist[b])


def short_cycle_through(md, edge, graph=None):
    """Shortest closed edge path using a given edge (edge plus detour)."""
    g = (_weighted_graph(md) if graph is None else graph).tolil(copy=True)
    a, b = (int(v) for v in md.complex.simplices[1][edge])
    g[a, b] = 0
    g[b, a] = 0
    g = g.tocsr()
    g.eliminate_zeros()
    dist, pred = dijkstra(g, indices=b, return_predecessors=True)
    if not np.isfinite(dist[a]):
        return None
    path = [a]
    while path[-1] != b:
        path.append(int(pred[path[-1]]))
    # path runs a <- ... <- b, so b..a then back along the edge
    return [a] + path[::-1]


def cheeger_estimate(md: MetricData, H: HomologyBasis, config: SamplerConfig | None = None) -> CheegerEstimate:
    """Least length/area over sampled bounding cycles, as an upper bound.

    Candidate cycles come from fundamental cycles of a spanning tree, short
    cycles through sampled edges, skeleton projections of supplied curves,
    and any explicitly supplied cycles.
    """
    cfg = config or SamplerConfig()
    cx = md.complex
    rng = np.random.default_rng(cfg.seed)
    cands = []
    for i, c in enumerate(cfg.extra_cycles):
        cands.append(("given", c))
    tree, parent = spanning_forest(cx)
    non_tree = np.flatnonzero(~tree)
    pick = rng.permutation(non_tree)[:cfg.tree_cycles]
    for e in sorted(pick.tolist()):
        cands.append(("tree", fundamental_cycle(cx, parent, int(e))[0]))
    graph = _weighted_graph(md)
    for e in sorted(rng.permutation(cx.count(1))[:cfg.short_cycles].tolist()):
        path = short_cycle_through(md, int(e), graph)
        if path is not None:
            cands.append(("short", Chain.edge_path(cx, path)))
    for poly in cfg.curves:
        proj = project_to_skeleton(md, poly)
        cands.append(("curve", proj.chain))
    table, history = [], []
    best = (math.inf, None, 0.0, 0.0, 0)
    for i, (src, g) in enumerate(cands):
        if g.is_zero():
            continue
        cls = classify_cycle(cx, H, g)
        if cls.order == math.inf:
            continue
        res = min_filling_area(md, H, g, r=cfg.r, backend=cfg.backend, integer_check=False)
        length = g.l1(md.edge_lengths)
        ratio = length / res.area if res.area > 0 else math.inf
        table.append({"cycle_id": i, "source": src, "length": length, "r": res.r_used,
                      "area": res.area, "ratio": ratio})
        if ratio < best[0]:
            best = (ratio, g, length, res.area, res.r_used)
        history.append(best[0])
    if not table:
        raise FillingError(f"none of the {len(cands)} sampled cycles bounds; "
                           "increase tree_cycles or short_cycles")
    return CheegerEstimate(best[0], best[1], best[2], best[3], best[4], table, history)
