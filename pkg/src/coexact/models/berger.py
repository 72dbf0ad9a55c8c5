"""Berger spheres: the round unit 3-sphere shrunk by epsilon along Hopf fibers.

On the unit sphere viewed as SU(2), take the left-invariant coframe
``sigma_0, sigma_1, sigma_2`` where ``sigma_0`` is dual to the Hopf field
``X(z) = i z``. The Maurer-Cartan relations are

    d sigma_0 = 2 sigma_1 ^ sigma_2,
    d sigma_1 = 2 sigma_2 ^ sigma_0,
    d sigma_2 = 2 sigma_0 ^ sigma_1,

and the Berger metric is ``eps^2 sigma_0^2 + sigma_1^2 + sigma_2^2``. With
these constants the fiber form ``sigma_0`` has eigenvalue ``4 eps^2``, and
``d sigma_0`` is twice the pulled-back area form of the base sphere of area pi.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..algebra import PointFrame, compound, form
from ..complex import build_complex
from ..dec import assemble_metric
from .torus import align_cells

STRUCTURE_CONSTANT = 2.0
# minimum cube subdivision of the mesh generator, and the one used for checks
MIN_RESOLUTION = 2
DOCUMENTED_RESOLUTION = 6


@dataclass(frozen=True)
class BergerModel:
    epsilon: float

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    @property
    def invariant_metric(self):
        return np.diag([self.epsilon ** 2, 1.0, 1.0])

    @property
    def structure_constants(self):
        """``C[i]`` holds the 2-form coefficients of ``d sigma_i`` in the basis
        ``sigma_0^sigma_1, sigma_0^sigma_2, sigma_1^sigma_2``."""
        c = STRUCTURE_CONSTANT
        return np.array([[0.0, 0.0, c], [0.0, -c, 0.0], [c, 0.0, 0.0]])

    def differential(self):
        """Matrix of d from invariant 1-forms to invariant 2-forms (columns are d sigma_i)."""
        return self.structure_constants.T


def _as_model(model):
    return model if isinstance(model, BergerModel) else BergerModel(float(model))


def invariant_laplacian(model, *, route="star"):
    """Hodge Laplacian on left-invariant 1-forms as a 3x3 matrix.

    Invariant functions are constant, so ``d delta`` vanishes and only
    ``delta d`` contributes. ``route="star"`` builds ``delta = star d star``
    from the pointwise Hodge star; ``route="adjoint"`` takes the adjoint of d
    in the invariant inner products. The two must agree.
    """
    m = _as_model(model)
    D = m.differential()
    frame = PointFrame(m.invariant_metric)
    if route == "star":
        L = np.zeros((3, 3))
        for i in range(3):
            two = form(3, 2, D[:, i])
            # on 2-forms in dimension 3, delta = star d star; star(two) is a 1-form
            L[:, i] = frame.star(form(3, 2, D @ frame.star(two).coeffs)).coeffs
        return L
    if route == "adjoint":
        ginv = np.linalg.inv(m.invariant_metric)
        M1, M2 = ginv, compound(ginv, 2)
        return np.linalg.solve(M1, D.T @ M2 @ D)
    raise ValueError(f"unknown route {route!r}")


def berger_spectrum_invariant(model):
    """Eigenvalues of the Hodge Laplacian on invariant 1-forms, ascending.

    Every invariant 1-form is coclosed, hence coexact on the 3-sphere; the
    smallest entry is ``4 eps^2`` and belongs to the fiber form.
    """
    L = invariant_laplacian(model)
    return np.sort(np.linalg.eigvals(L).real)


def fiber_form_eigenvalue(model):
    """Rayleigh quotient of the fiber form ``sigma_0``."""
    L = invariant_laplacian(model)
    return float(L[0, 0])


def hopf_identities(model):
    """Numbers behind ``d alpha = 2 pi^* Omega``.

    ``alpha`` is ``sigma_0`` (the round-metric dual of X). Returns the factor
    of ``d alpha`` against the unit horizontal area form, the fiber length for
    ``alpha`` (integral of alpha over a fiber), and the base area obtained as
    volume of the round sphere divided by fiber length.
    """
    m = _as_model(model)
    d_alpha = m.differential()[:, 0]
    horizontal = form(3, 2, [0.0, 0.0, 1.0])
    frame = PointFrame(m.invariant_metric)
    factor = float(d_alpha @ horizontal.coeffs)
    return {
        "d_alpha_factor": factor,
        "pullback_area_norm": frame.norm(horizontal),
        "alpha_on_fiber": 2 * np.pi,
        "base_area": 2 * np.pi ** 2 / (2 * np.pi),
        "fiber_length": 2 * np.pi * m.epsilon,
    }


def berger_h1_bounds(model):
    """Upper bound ``2 eps`` on the Cheeger constant and lower bound ``pi``
    on the filling area of a Hopf fiber."""
    m = _as_model(model)
    return 2.0 * m.epsilon, float(np.pi)


# -- mesh -----------------------------------------------------------------

def _cube_boundary(m):
    """Kuhn-split 3-cubes covering the boundary of [-1,1]^4, m cubes per side.

    Returns tetrahedra as tuples of integer lattice points in {0..m}^4.
    """
    perms3 = list(itertools.permutations(range(3)))
    tets = []
    for axis in range(4):
        free = [a for a in range(4) if a != axis]
        for side in (0, m):
            for cell in itertools.product(range(m), repeat=3):
                base = np.zeros(4, dtype=int)
                base[axis] = side
                base[free] = cell
                for p in perms3:
                    pts = [base.copy()]
                    for k in p:
                        nxt = pts[-1].copy()
                        nxt[free[k]] += 1
                        pts.append(nxt)
                    tets.append(tuple(tuple(int(x) for x in q) for q in pts))
    return tets


def sphere_points(lattice, m):
    """Map lattice points on the cube boundary to the unit 3-sphere.

    The tangent warp makes the cube's grid lines through the origin land on
    great circles at equal angles.
    """
    u = 2.0 * np.asarray(lattice, dtype=float) / m - 1.0
    w = np.tan(np.pi * u / 4.0)
    return w / np.linalg.norm(w, axis=-1, keepdims=True)


def hopf_field(x):
    """``X(z) = i z`` in real coordinates ``(x0 + i x1, x2 + i x3)``."""
    x = np.asarray(x, dtype=float)
    return np.stack([-x[..., 1], x[..., 0], -x[..., 3], x[..., 2]], axis=-1)


def berger_tensor(x, epsilon):
    """Ambient 4x4 tensor whose restriction to the sphere is the Berger metric."""
    v = hopf_field(x)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return np.eye(4) - (1.0 - epsilon ** 2) * v[..., :, None] * v[..., None, :]


def berger_mesh(epsilon, resolution=DOCUMENTED_RESOLUTION, name=None):
    """Triangulated Berger sphere.

    Vertices sit on the unit sphere in R^4; each tetrahedron carries the
    Berger tensor frozen at its normalized centroid. The chords are only
    used as a local chart, so no isometric embedding is claimed.
    """
    model = _as_model(epsilon)
    m = int(resolution)
    if m < MIN_RESOLUTION or m % 2:
        raise ValueError(f"Berger resolution must be even and >= {MIN_RESOLUTION}, got {resolution}")
    lattice_tets = _cube_boundary(m)
    points = sorted({q for t in lattice_tets for q in t})
    ids = {q: i for i, q in enumerate(points)}
    tets = [tuple(ids[q] for q in t) for t in lattice_tets]
    sorted_tets = [tuple(sorted(t)) for t in tets]
    coords = sphere_points(points, m)
    cells = coords[np.array(sorted_tets)]
    cx = build_complex(len(points), sorted_tets)
    cells = align_cells(cx, sorted_tets, cells)
    centroid = cells.mean(axis=1)
    centroid /= np.linalg.norm(centroid, axis=1, keepdims=True)
    md = assemble_metric(cx, cell_coords=cells, tensors=berger_tensor(centroid, model.epsilon),
                         name=name or f"berger-{model.epsilon:g}-{m}")
    md.extra.update(vertex_coords=coords, epsilon=model.epsilon, resolution=m)
    return md


def fiber_loop(md):
    """Closed edge path tracing the Hopf fiber through (1, 0, 0, 0).

    That fiber is the great circle in the ``x0 x1`` plane, which the mesh
    contains as a chain of edges. Returns the vertex sequence, closed.
    """
    x = md.extra["vertex_coords"]
    on = np.flatnonzero((np.abs(x[:, 2]) < 1e-12) & (np.abs(x[:, 3]) < 1e-12))
    angle = np.arctan2(x[on, 1], x[on, 0])
    ring = [int(v) for v in on[np.argsort(angle)]]
    cx = md.complex
    for a, b in zip(ring, ring[1:] + ring[:1]):
        if not cx.has((min(a, b), max(a, b))):
            raise RuntimeError("fiber circle is not a chain of mesh edges")
    return ring + ring[:1]

