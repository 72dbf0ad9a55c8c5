"""Cochains, Whitney forms and Galerkin mass matrices on a tetrahedral mesh.

The metric on each tetrahedron is constant and stored as the Gram matrix of
its three edge vectors ``v1 - v0, v2 - v0, v3 - v0`` (local vertices sorted by
global index). Everything else is expressed in the reference coordinates
``u`` with barycentric coordinates ``(1 - u1 - u2 - u3, u1, u2, u3)``:

* 1-forms are covectors ``a`` with pointwise norm ``sqrt(a G^-1 a)``;
* 2-forms are axial vectors ``w`` (coefficients of ``du2^du3, du3^du1,
  du1^du2``) with pointwise norm ``sqrt(w G w / det G)``;
* the volume form is ``sqrt(det G) du1^du2^du3`` times the orientation sign.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .complex import SimplicialComplex

LOCAL_EDGES = tuple(itertools.combinations(range(4), 2))
LOCAL_FACES = tuple(itertools.combinations(range(4), 3))

# gradients of the barycentric coordinates in reference coordinates
GRAD_BARY = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
REF_VERTS = np.vstack([np.zeros(3), np.eye(3)])

_QA, _QB = 0.5854101966249685, 0.1381966011250105
QUAD_POINTS = np.array([[_QA, _QB, _QB, _QB], [_QB, _QA, _QB, _QB],
                        [_QB, _QB, _QA, _QB], [_QB, _QB, _QB, _QA]])
QUAD_WEIGHTS = np.full(4, 0.25)


class GeometryError(ValueError):
    """Raised for degenerate or inconsistent metric input."""


def whitney1(bary):
    """Local Whitney 1-forms at barycentric point(s): shape (..., 6, 3)."""
    b = np.asarray(bary, dtype=float)
    out = np.empty(b.shape[:-1] + (6, 3))
    for i, (a, c) in enumerate(LOCAL_EDGES):
        out[..., i, :] = b[..., a, None] * GRAD_BARY[c] - b[..., c, None] * GRAD_BARY[a]
    return out


def _cross(i, j):
    return np.cross(GRAD_BARY[i], GRAD_BARY[j])


def whitney2(bary):
    """Local Whitney 2-forms (axial vectors) at barycentric point(s): (..., 4, 3)."""
    b = np.asarray(bary, dtype=float)
    out = np.empty(b.shape[:-1] + (4, 3))
    for i, (a, c, d) in enumerate(LOCAL_FACES):
        out[..., i, :] = 2.0 * (b[..., a, None] * _cross(c, d)
                                - b[..., c, None] * _cross(a, d)
                                + b[..., d, None] * _cross(a, c))
    return out


def dwhitney1():
    """Exterior derivative of each local Whitney 1-form, constant axial vectors (6, 3)."""
    return np.array([2.0 * _cross(a, c) for a, c in LOCAL_EDGES])


@dataclass(eq=False)
class MetricData:
    """Piecewise-flat metric on an oriented tetrahedral complex.

    Attributes
    ----------
    complex : SimplicialComplex
    gram : (T, 3, 3) array
        Per-tetrahedron Gram matrix of edge vectors.
    orientation : (T,) int array
        +1 when the sorted vertex order of a tetrahedron is positively oriented.
    volumes, edge_lengths, triangle_areas : arrays
    mass : list of four sparse matrices, for 0- to 3-cochains
    cell_coords : (T, 4, d) array or None
        Vertex positions of each tetrahedron in some ambient or chart space,
        used only for plotting and trajectory dumps.
    extra : dict
        Generator-specific data such as vertex positions or model parameters.
    """

    complex: SimplicialComplex
    gram: np.ndarray
    orientation: np.ndarray
    volumes: np.ndarray
    edge_lengths: np.ndarray
    triangle_areas: np.ndarray
    mass: list
    cell_coords: np.ndarray | None = None
    name: str = ""
    extra: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def total_volume(self) -> float:
        return float(self.volumes.sum())

    @property
    def det_gram(self):
        if "det" not in self._cache:
            self._cache["det"] = np.linalg.det(self.gram)
        return self._cache["det"]

    @property
    def inv_gram(self):
        if "inv" not in self._cache:
            self._cache["inv"] = np.linalg.inv(self.gram)
        return self._cache["inv"]

    def d(self, k: int) -> sp.csr_matrix:
        """Coboundary from k-cochains to (k+1)-cochains as a float matrix."""
        key = ("d", k)
        if key not in self._cache:
            self._cache[key] = self.complex.boundary(k + 1).T.astype(float).tocsr()
        return self._cache[key]

    def mass_solver(self, k):
        key = ("msolve", k)
        if key not in self._cache:
            self._cache[key] = MassSolver(self.mass[k])
        return self._cache[key]

    def ambient_point(self, tet, bary):
        if self.cell_coords is None:
            raise GeometryError("no coordinates attached to this metric")
        return np.einsum("...i,...ij->...j", bary, self.cell_coords[tet])

    def local(self, k, cochain):
        """Gather a k-cochain onto the local simplices of every tetrahedron."""
        cx = self.complex
        idx = cx.faces(3, k)
        return np.asarray(cochain, dtype=float)[idx]

    def one_form_at(self, cochain, bary):
        """Covectors of a Whitney 1-form at barycentric points, shape (T, ..., 3)."""
        loc = self.local(1, cochain)
        W = whitney1(bary)
        return np.einsum("te,...ec->t...c", loc, W)

    def two_form_at(self, cochain, bary):
        loc = self.local(2, cochain)
        W = whitney2(bary)
        return np.einsum("tf,...fc->t...c", loc, W)

    def exterior_derivative_axial(self, cochain):
        """The constant 2-form d(alpha) of a Whitney 1-form, per tetrahedron."""
        return self.local(1, cochain) @ dwhitney1()

    def one_form_norm(self, a):
        # a: (T, ..., 3)
        q = np.einsum("t...i,tij,t...j->t...", a, self.inv_gram, a)
        return np.sqrt(np.maximum(q, 0.0))

    def two_form_norm(self, w):
        q = np.einsum("t...i,tij,t...j->t...", w, self.gram, w)
        det = self.det_gram.reshape((-1,) + (1,) * (w.ndim - 2))
        return np.sqrt(np.maximum(q, 0.0) / det)

    def velocity(self, cochain2):
        """Reference-coordinate components of the vector field dual to a 2-cochain.

        The field is the metric dual of the Hodge star of the (constant)
        2-form, so its flux through each face equals the cochain value.
        """
        w = self.local(2, cochain2) @ whitney2(np.full(4, 0.25))
        return self.orientation[:, None] * w / np.sqrt(self.det_gram)[:, None]

    def pairing_matrix(self):
        """Matrix of the wedge pairing of Whitney 2-forms with Whitney 1-forms."""
        if "pair" not in self._cache:
            cx = self.complex
            W1 = whitney1(QUAD_POINTS)
            W2 = whitney2(QUAD_POINTS)
            loc = np.einsum("q,qfc,qec->fe", QUAD_WEIGHTS, W2, W1) / 6.0
            T = cx.count(3)
            vals = self.orientation[:, None, None] * loc[None]
            fi = cx.faces(3, 2)
            ei = cx.faces(3, 1)
            rows = np.repeat(fi, 6, axis=1).ravel()
            cols = np.tile(ei, (1, 4)).ravel()
            P = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(cx.count(2), cx.count(1))).tocsr()
            P.sum_duplicates()
            self._cache["pair"] = P
        return self._cache["pair"]


def _gram_from_coords(cell_coords, tensors=None):
    E = cell_coords[:, 1:, :] - cell_coords[:, :1, :]
    if tensors is None:
        return np.einsum("tid,tjd->tij", E, E)
    return np.einsum("tid,tde,tje->tij", E, tensors, E)


def _gram_from_lengths(cx, edge_lengths):
    L = np.asarray(edge_lengths, dtype=float)[cx.faces(3, 1)]
    sq = L ** 2
    # local edges: (0,1),(0,2),(0,3),(1,2),(1,3),(2,3)
    l0 = sq[:, :3]
    cross = {(0, 1): 3, (0, 2): 4, (1, 2): 5}
    G = np.empty((len(L), 3, 3))
    for i in range(3):
        G[:, i, i] = l0[:, i]
    for (i, j), e in cross.items():
        G[:, i, j] = G[:, j, i] = 0.5 * (l0[:, i] + l0[:, j] - sq[:, e])
    return G


class MassSolver:
    """Applies the inverse of a mass matrix by Jacobi-preconditioned CG.

    Mass matrices are well conditioned after diagonal scaling, while their
    sparse factors fill in badly on 3D meshes. All right-hand-side columns
    are iterated together; the result is deterministic.
    """

    def __init__(self, M, tol=1e-13, maxiter=5000):
        self.M = sp.csr_matrix(M)
        self.dinv = 1.0 / self.M.diagonal()
        self.tol = tol
        self.maxiter = maxiter

    def solve(self, B):
        B = np.asarray(B, dtype=float)
        B2 = B.reshape(B.shape[0], -1)
        d = self.dinv[:, None]
        X = d * B2
        R = B2 - self.M @ X
        Z = d * R
        P = Z.copy()
        rz = np.einsum("ij,ij->j", R, Z)
        bound = self.tol * np.linalg.norm(B2, axis=0)
        for _ in range(self.maxiter):
            active = np.linalg.norm(R, axis=0) > bound
            if not active.any():
                return X.reshape(B.shape)
            Q = self.M @ P
            pq = np.einsum("ij,ij->j", P, Q)
            a = np.where(active, rz / np.where(active, pq, 1.0), 0.0)
            X += a * P
            R -= a * Q
            Z = d * R
            rz_new = np.einsum("ij,ij->j", R, Z)
            beta = np.where(active, rz_new / np.where(active, rz, 1.0), 0.0)
            P = Z + beta * P
            rz = rz_new
        raise ArithmeticError("mass matrix solve did not converge")


def assemble_metric(cx: SimplicialComplex, coords=None, *, cell_coords=None, tensors=None,
                    edge_lengths=None, orient=True, name="") -> MetricData:
    """Attach a piecewise-flat metric to a closed or bordered 3-complex.

    Exactly one geometry source is used:

    * ``coords``: vertex coordinates in R^d (an embedding or immersion);
    * ``cell_coords``: per-tetrahedron vertex coordinates in a chart of
      dimension d, optionally with per-tetrahedron metric ``tensors`` (d x d);
    * ``edge_lengths``: one length per edge.

    With a 3- or 4-dimensional ``coords`` embedding (or 3-dimensional chart
    coordinates without tensors) the orientation is flipped globally so that
    embedded tetrahedra have positive volume; a tetrahedron whose sign
    disagrees with its neighbours raises ``GeometryError``.
    """
    if cx.count(3) == 0:
        raise GeometryError("metric assembly needs tetrahedra")
    if cx.orientation is None:
        raise GeometryError("complex has no coherent orientation")
    tets = cx.simplices[3]
    ambient = None
    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        if coords.shape[0] != cx.n_vertices:
            raise GeometryError("coordinate count does not match vertex count")
        ambient = coords[tets]
        gram = _gram_from_coords(ambient)
    elif cell_coords is not None:
        ambient = np.asarray(cell_coords, dtype=float)
        gram = _gram_from_coords(ambient, None if tensors is None else np.asarray(tensors, dtype=float))
    elif edge_lengths is not None:
        gram = _gram_from_lengths(cx, edge_lengths)
    else:
        raise GeometryError("no geometry given")
    det = np.linalg.det(gram)
    scale = np.einsum("tii->t", gram) / 3.0
    bad = np.flatnonzero(~(det > 1e-20 * scale ** 3))
    if len(bad):
        t = int(bad[0])
        raise GeometryError(f"tetrahedron {t} with vertices {tuple(int(v) for v in tets[t])} "
                            f"has zero or negative volume")
    orientation = np.array(cx.orientation, dtype=np.int64)
    if orient and ambient is not None and tensors is None and ambient.shape[2] in (3, 4):
        E = ambient[:, 1:, :] - ambient[:, :1, :]
        if ambient.shape[2] == 4:
            centroid = ambient.mean(axis=1)
            E = np.concatenate([centroid[:, None, :], E], axis=1)
        s = np.sign(np.linalg.det(E)).astype(np.int64)
        rel = s * orientation
        flip = rel[0]
        wrong = np.flatnonzero(rel != flip)
        if len(wrong):
            t = int(wrong[0])
            raise GeometryError(f"tetrahedron {t} with vertices {tuple(int(v) for v in tets[t])} "
                                f"is inverted relative to its neighbours")
        orientation = orientation * flip
    volumes = np.sqrt(det) / 6.0
    orientation.setflags(write=False)
    lengths, areas = _lengths_and_areas(cx, gram, coords)
    md = MetricData(cx, gram, orientation, volumes, lengths, areas, [None] * 4,
                    cell_coords=ambient, name=name)
    md.mass = _mass_matrices(md)
    return md


def _lengths_and_areas(cx, gram, coords):
    T = cx.count(3)
    if coords is not None:
        e = cx.simplices[1]
        lengths = np.linalg.norm(coords[e[:, 1]] - coords[e[:, 0]], axis=1)
        f = cx.simplices[2]
        u = coords[f[:, 1]] - coords[f[:, 0]]
        v = coords[f[:, 2]] - coords[f[:, 0]]
        uu, vv, uv = (u * u).sum(1), (v * v).sum(1), (u * v).sum(1)
        areas = 0.5 * np.sqrt(np.maximum(uu * vv - uv ** 2, 0.0))
        return lengths, areas
    R = REF_VERTS
    el = np.empty((T, 6))
    for i, (a, b) in enumerate(LOCAL_EDGES):
        d = R[b] - R[a]
        el[:, i] = np.sqrt(np.einsum("i,tij,j->t", d, gram, d))
    fa = np.empty((T, 4))
    for i, (a, b, c) in enumerate(LOCAL_FACES):
        u, v = R[b] - R[a], R[c] - R[a]
        uu = np.einsum("i,tij,j->t", u, gram, u)
        vv = np.einsum("i,tij,j->t", v, gram, v)
        uv = np.einsum("i,tij,j->t", u, gram, v)
        fa[:, i] = 0.5 * np.sqrt(np.maximum(uu * vv - uv ** 2, 0.0))
    lengths = _average(cx.faces(3, 1), el, cx.count(1))
    areas = _average(cx.faces(3, 2), fa, cx.count(2))
    return lengths, areas


def _average(idx, vals, n):
    s = np.bincount(idx.ravel(), vals.ravel(), minlength=n)
    c = np.bincount(idx.ravel(), minlength=n)
    out = np.zeros(n)
    np.divide(s, c, out=out, where=c > 0)
    return out


def _scatter(idx, local, n):
    k = idx.shape[1]
    rows = np.repeat(idx, k, axis=1).ravel()
    cols = np.tile(idx, (1, k)).ravel()
    M = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    return M


def _mass_matrices(md: MetricData):
    cx = md.complex
    vol = md.volumes
    m0 = (np.ones((4, 4)) + np.eye(4)) / 20.0
    M0 = _scatter(cx.faces(3, 0), vol[:, None, None] * m0[None], cx.count(0))
    W1 = whitney1(QUAD_POINTS)
    loc1 = np.einsum("q,qec,tcd,qfd->tef", QUAD_WEIGHTS, W1, md.inv_gram, W1) * vol[:, None, None]
    M1 = _scatter(cx.faces(3, 1), loc1, cx.count(1))
    W2 = whitney2(QUAD_POINTS)
    loc2 = np.einsum("q,qec,tcd,qfd->tef", QUAD_WEIGHTS, W2, md.gram, W2)
    loc2 *= (vol / md.det_gram)[:, None, None]
    M2 = _scatter(cx.faces(3, 2), loc2, cx.count(2))
    M3 = sp.diags(1.0 / vol).tocsr()
    return [M0, M1, M2, M3]


# ------------------------------------------------------------- norms

def norms(md: MetricData, cochain, degree: int) -> dict:
    """L1, L2, sup and mass (sup of comass) norms of a Whitney form.

    L1 uses the 4-point degree-2 rule. L2 is the Galerkin norm, which the
    same rule integrates exactly. The pointwise norm and the comass are
    convex in the point, so their suprema are attained at vertices.
    """
    c = np.asarray(cochain, dtype=float)
    vol = md.volumes
    if degree == 0:
        q = md.local(0, c) @ QUAD_POINTS.T
        pv = np.abs(md.local(0, c))
        qv, vv, cv = np.abs(q), pv, pv
    elif degree == 1:
        qv = md.one_form_norm(md.one_form_at(c, QUAD_POINTS))
        vv = md.one_form_norm(md.one_form_at(c, np.eye(4)))
        cv = vv
    elif degree == 2:
        qv = md.two_form_norm(md.two_form_at(c, QUAD_POINTS))
        vv = md.two_form_norm(md.two_form_at(c, np.eye(4)))
        # in three dimensions every 2-form is simple, so comass equals the norm
        cv = vv
    elif degree == 3:
        v = np.abs(c) / vol
        qv, vv, cv = v[:, None], v[:, None], v[:, None]
    else:
        raise ValueError("degree must be 0..3")
    L1 = float(np.sum(vol * qv.mean(axis=1)))
    L2 = float(np.sqrt(max(c @ (md.mass[degree] @ c), 0.0)))
    return {"L1": L1, "L2": L2, "Linf": float(vv.max()), "mass": float(cv.max())}


# ----------------------------------------------------- Hodge decomposition

@dataclass
class HodgeParts:
    exact: np.ndarray
    coexact: np.ndarray
    harmonic: np.ndarray
    potential: np.ndarray
    copotential: np.ndarray


def _pinned_laplacian_solve(md, rhs):
    """Solve D0^T M1 D0 phi = rhs with one vertex pinned per component."""
    key = "L0lu"
    cx = md.complex
    if key not in md._cache:
        from scipy.sparse.csgraph import connected_components

        D0 = md.d(0)
        L = (D0.T @ md.mass[1] @ D0).tocsr()
        _, labels = connected_components(cx.edge_graph(), directed=False)
        pins = np.unique(labels, return_index=True)[1]
        keep = np.setdiff1d(np.arange(cx.n_vertices), pins)
        lu = spla.splu(L[keep][:, keep].tocsc(), permc_spec="MMD_AT_PLUS_A")
        md._cache[key] = (lu, keep, labels)
    lu, keep, labels = md._cache[key]
    phi = np.zeros((cx.n_vertices,) + rhs.shape[1:])
    phi[keep] = lu.solve(np.ascontiguousarray(rhs[keep]))
    return phi


def exact_part(md, omega):
    """M1-orthogonal projection of a 1-cochain onto the image of d."""
    D0 = md.d(0)
    phi = _pinned_laplacian_solve(md, D0.T @ (md.mass[1] @ omega))
    return D0 @ phi, phi


def hodge_decompose(md: MetricData, omega, degree: int = 1, *, tol=1e-12) -> HodgeParts:
    """Split a cochain into exact, coexact and harmonic parts.

    The parts are orthogonal in the Galerkin inner product. The coexact
    part is ``M^-1 d^T y`` with ``y`` solving ``d M^-1 d^T y = d omega``.
    """
    omega = np.asarray(omega, dtype=float)
    n = md.complex.count(degree)
    if degree == 1:
        exact, pot = exact_part(md, omega)
    elif degree == 0:
        exact, pot = np.zeros(n), np.zeros(0)
    else:
        D = md.d(degree - 1)
        A = (D.T @ md.mass[degree] @ D).tocsr()
        b = D.T @ (md.mass[degree] @ omega)
        pot = _cg(A, b, tol, np.linalg.norm(abs(D.T) @ (abs(md.mass[degree]) @ np.abs(omega))))
        exact = D @ pot
    if degree < 3:
        D = md.d(degree)
        lu = md.mass_solver(degree)
        op = spla.LinearOperator((D.shape[0], D.shape[0]), matvec=lambda y: D @ lu.solve(D.T @ y))
        copot = _cg(op, D @ omega, tol, np.linalg.norm(abs(D) @ np.abs(omega)))
        coexact = lu.solve(D.T @ copot)
    else:
        copot, coexact = np.zeros(0), np.zeros(n)
    harmonic = omega - exact - coexact
    return HodgeParts(exact, coexact, harmonic, pot, copot)


def _cg(A, b, tol, ref):
    """CG to a residual below ``tol * ref``, where ``ref`` is the size of ``b``
    before cancellation; a right side that cancels to rounding level gives 0."""
    nb = np.linalg.norm(b)
    if nb <= tol * ref:
        return np.zeros_like(b)
    x, info = spla.cg(A, b, rtol=0.0, atol=tol * ref, maxiter=20 * len(b))
    if info != 0:
        r = np.linalg.norm(A @ x - b) / ref
        if r > 1e-8:
            raise ArithmeticError(f"conjugate gradients stalled at relative residual {r:.2e}")
    return x


def export_coo(matrix, path):
    """Write a sparse matrix as text lines ``row col value``."""
    M = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]} {M.nnz}\n")
        for r, c, v in zip(M.row, M.col, M.data):
            fh.write(f"{r} {c} {float(v)!r}\n")


def import_coo(path):
    with open(path) as fh:
        m, n, _ = (int(x) for x in fh.readline().split())
        rows, cols, vals = [], [], []
        for line in fh:
            r, c, v = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
    return sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()


@dataclass(eq=False)
class SkeletonMetric:
    """Edge lengths and triangle areas only, for complexes of any dimension."""

    complex: SimplicialComplex
    edge_lengths: np.ndarray
    triangle_areas: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)


def skeleton_metric(cx: SimplicialComplex, coords=None, *, edge_lengths=None) -> SkeletonMetric:
    """Lengths and areas from vertex coordinates, given lengths, or unit edges."""
    if coords is not None:
        lengths, areas = _lengths_and_areas(cx, None, np.asarray(coords, dtype=float))
        return SkeletonMetric(cx, lengths, areas)
    L = np.ones(cx.count(1)) if edge_lengths is None else np.asarray(edge_lengths, dtype=float)
    if cx.count(2):
        e = cx.faces(2, 1)
        a, b, c = L[e[:, 0]], L[e[:, 1]], L[e[:, 2]]
        s = 0.5 * (a + b + c)
        areas = np.sqrt(np.maximum(s * (s - a) * (s - b) * (s - c), 0.0))
    else:
        areas = np.zeros(0)
    return SkeletonMetric(cx, L, areas)
