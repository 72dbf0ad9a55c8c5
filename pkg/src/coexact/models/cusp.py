"""A long warped tube capped by round half-spheres, topologically a 3-sphere.

The central part is ``[ln eps, -ln eps] x S^2`` with metric
``dt^2 + (eps cosh t)^2 g_S2``. Coclosed test forms ``f(t) alpha`` with
``alpha`` coclosed on the 2-sphere have Rayleigh quotient equal to that of
``f`` on the interval, so the first Dirichlet eigenvalue of the interval
bounds the first coexact eigenvalue from above and goes to 0 like
``(pi / (2 ln(1/eps)))^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ..complex import build_complex
from ..dec import assemble_metric
from .torus import align_cells

MIN_GRID = 16


@dataclass(frozen=True)
class CuspModel:
    epsilon: float
    grid_size: int = 2048

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def half_length(self):
        return math.log(1.0 / self.epsilon)

    def profile(self, t):
        return self.epsilon * np.cosh(t)


@dataclass
class CuspEigenvalue:
    finite_difference: float
    analytic: float
    grid: np.ndarray
    eigenfunction: np.ndarray

    @property
    def relative_error(self):
        return abs(self.finite_difference - self.analytic) / self.analytic

    def rayleigh_quotient(self):
        """``|f'|^2 / |f|^2`` for the discrete eigenfunction with zero end values."""
        h = self.grid[1] - self.grid[0]
        f = np.concatenate([[0.0], self.eigenfunction, [0.0]])
        return float(np.sum(np.diff(f) ** 2) / h ** 2 / np.sum(f ** 2))


def analytic_eigenvalue(epsilon):
    return (math.pi / (2.0 * math.log(1.0 / epsilon))) ** 2


def cusp_eigenvalue(model: CuspModel) -> CuspEigenvalue:
    """Smallest Dirichlet eigenvalue of ``-f''`` on ``[ln eps, -ln eps]``.

    Second-order differences on ``grid_size`` interior nodes.
    """
    N = int(model.grid_size)
    if N < MIN_GRID:
        raise ValueError(f"grid_size must be at least {MIN_GRID}, got {N}")
    L = model.half_length
    h = 2.0 * L / (N + 1)
    t = -L + h * np.arange(1, N + 1)
    diag = np.full(N, 2.0 / h ** 2)
    off = np.full(N - 1, -1.0 / h ** 2)
    w, v = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    f = v[:, 0] * np.sign(v[N // 2, 0])
    return CuspEigenvalue(float(w[0]), analytic_eigenvalue(model.epsilon), t, f)


# -- mesh -----------------------------------------------------------------

def octahedral_sphere(level):
    """Unit-sphere triangulation by ``level`` midpoint refinements of the octahedron."""
    pts = [np.array(p, dtype=float) for p in
           [(1, 0, 0), (0, 1, 0), (-1, 0, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]]
    tris = [(i, (i + 1) % 4, top) for top in (4, 5) for i in range(4)]
    for _ in range(level):
        mid = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in mid:
                p = pts[a] + pts[b]
                pts.append(p / np.linalg.norm(p))
                mid[key] = len(pts) - 1
            return mid[key]

        new = []
        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = new
    return np.array(pts), np.array([sorted(t) for t in tris])


def polyhedral_area(points, tris):
    a, b, c = (points[tris[:, i]] for i in range(3))
    return float(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1).sum())


def _prism_tets(tri, lower, upper):
    """Three tetrahedra filling a prism over a sorted triangle.

    The split depends only on the vertex order, so neighbouring prisms agree
    on their shared quadrilaterals.
    """
    a, b, c = tri
    return [
        (lower[a], lower[b], lower[c], upper[c]),
        (lower[a], lower[b], upper[b], upper[c]),
        (lower[a], upper[a], upper[b], upper[c]),
    ]


@dataclass(frozen=True)
class CuspMeshSpec:
    sphere_level: int = 2
    t_step: float = 0.25
    cap_layers: int = 2


def cusp_mesh(epsilon, resolution: CuspMeshSpec | None = None, name=None):
    """Triangulated cusp-like 3-sphere with per-cell metric tensors.

    Central cells use chart coordinates ``(t, x)`` with ``x`` on a
    polyhedral sphere scaled to area 4 pi, and tensor ``diag(1, s^2, s^2, s^2)``
    frozen at the cell centroid, ``s = eps cosh t``. Each end is capped by a round
    half 3-sphere of radius ``s(L)`` built from ``cap_layers`` latitude
    shells and a cone to the pole; the first shell acts as the collar.
    """
    model = CuspModel(float(epsilon))
    spec = resolution or CuspMeshSpec()
    if spec.sphere_level < 1 or spec.cap_layers < 1 or spec.t_step <= 0:
        raise ValueError(f"invalid cusp resolution {spec}")
    L = model.half_length
    K = max(2, 2 * math.ceil(L / spec.t_step))  # even, so t = 0 is a layer
    ts = np.linspace(-L, L, K + 1)
    sph, tris = octahedral_sphere(spec.sphere_level)
    # rescale so the polyhedral sphere has the round area 4 pi
    sph = sph * math.sqrt(4.0 * math.pi / polyhedral_area(sph, tris))
    ns = len(sph)
    J = spec.cap_layers
    R = float(model.profile(L))

    n_layers = K + 1 + 2 * (J - 1)
    # layer order: left cap shells (outermost first), tube layers, right cap shells
    layer_ids = [np.arange(ns) + i * ns for i in range(n_layers)]
    poles = (n_layers * ns, n_layers * ns + 1)
    left = layer_ids[:J]            # left[J-1] is the tube end t = -L
    tube = layer_ids[J - 1:J + K]
    right = layer_ids[J + K - 1:]   # right[0] is the tube end t = +L

    tets, cells, tensors, part = [], [], [], []
    phis = np.linspace(0.0, np.pi / 2, J + 1)[:J]

    def cap_point(shell, v):
        phi = phis[shell]
        return np.concatenate([R * np.cos(phi) * sph[v], [R * np.sin(phi)]])

    def add(tet, coords, tensor, where):
        tets.append(tet)
        cells.append(coords)
        tensors.append(tensor)
        part.append(where)

    for k in range(K):
        lo, hi = tube[k], tube[k + 1]
        for tri in tris:
            for tet in _prism_tets(tri, lo, hi):
                pts = []
                for g in tet:
                    layer, v = divmod(g, ns)
                    pts.append(np.concatenate([[ts[layer - (J - 1)]], sph[v]]))
                pts = np.array(pts)
                s = float(model.profile(pts[:, 0].mean()))
                add(tet, pts, np.diag([1.0, s * s, s * s, s * s]), "central")

    for shells, where in ((right, "right"), (left[::-1], "left")):
        level = {int(x): j for j, shell in enumerate(shells) for x in shell}
        pole = poles[0] if where == "right" else poles[1]
        for j in range(J):
            lo = shells[j]
            for tri in tris:
                if j + 1 < J:
                    simplices = _prism_tets(tri, lo, shells[j + 1])
                else:
                    simplices = [(lo[tri[0]], lo[tri[1]], lo[tri[2]], pole)]
                for tet in simplices:
                    pts = []
                    for g in tet:
                        if g in poles:
                            pts.append(np.array([0.0, 0.0, 0.0, R]))
                        else:
                            pts.append(cap_point(level[int(g)], g % ns))
                    add(tet, np.array(pts), np.eye(4), where)

    sorted_tets = [tuple(sorted(int(x) for x in t)) for t in tets]
    order = [np.argsort([int(x) for x in t]) for t in tets]
    cells = np.array([c[o] for c, o in zip(cells, order)])
    cx = build_complex(n_layers * ns + 2, sorted_tets)
    cells = align_cells(cx, sorted_tets, cells)
    tensors = align_cells(cx, sorted_tets, np.array(tensors))
    labels = np.empty(len(part), dtype=object)
    for t, p in zip(sorted_tets, part):
        labels[cx.index(t)] = p
    md = assemble_metric(cx, cell_coords=cells, tensors=tensors,
                         name=name or f"cusp-{model.epsilon:g}")
    md.extra.update(epsilon=model.epsilon, part=labels, tube_layers=tube, times=ts,
                    sphere=sph, sphere_triangles=tris, resolution=spec)
    return md


def central_volume(md):
    return float(md.volumes[md.extra["part"] == "central"].sum())


def central_volume_exact(epsilon):
    """``integral of (eps cosh t)^2 * 4 pi`` over the central interval."""
    L = math.log(1.0 / epsilon)
    return 4.0 * math.pi * epsilon ** 2 * (L + math.sinh(2 * L) / 2.0)


def equator_loop(md, t=0.0):
    """Closed edge path along the equator of the 2-sphere slice at time ``t``."""
    ts = md.extra["times"]
    k = int(np.argmin(np.abs(ts - t)))
    sph = md.extra["sphere"]
    on = np.flatnonzero(np.abs(sph[:, 2]) < 1e-12)
    ring = on[np.argsort(np.arctan2(sph[on, 1], sph[on, 0]))]
    ids = [int(md.extra["tube_layers"][k][v]) for v in ring]
    return ids + ids[:1]
