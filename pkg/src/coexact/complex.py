"""Oriented simplicial complexes, integer boundary operators, chains and mesh I/O.

Simplices of every dimension are stored as sorted vertex tuples, listed in
lexicographic order. The orientation of a stored simplex is the one induced by
its sorted vertex order; orientations of the top-dimensional cells of a
3-manifold are kept separately in ``SimplicialComplex.orientation``.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class ComplexError(ValueError):
    """Raised for malformed or unsupported simplicial input."""


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SimplicialComplex:
    """Immutable simplicial complex of dimension at most 3.

    Attributes
    ----------
    n_vertices : int
    simplices : tuple of int arrays
        ``simplices[k]`` has shape ``(n_k, k + 1)`` with sorted rows.
    orientation : int array or None
        +1/-1 per tetrahedron, a coherent orientation when one exists.
    is_manifold : bool
        Every triangle has at most two tetrahedral cofaces.
    is_closed : bool
        Pure 3-dimensional and every triangle has exactly two cofaces.
    """

    n_vertices: int
    simplices: tuple
    orientation: np.ndarray | None
    is_manifold: bool
    is_closed: bool
    _index: tuple = field(repr=False)
    _faces: dict = field(repr=False)
    _boundary: dict = field(repr=False, default_factory=dict)

    @property
    def dimension(self) -> int:
        return max(k for k in range(4) if len(self.simplices[k]) > 0)

    def count(self, k: int) -> int:
        if k < 0 or k > 3:
            return 0
        return len(self.simplices[k])

    @property
    def counts(self) -> tuple:
        return tuple(self.count(k) for k in range(4))

    @property
    def euler_characteristic(self) -> int:
        return sum((-1) ** k * self.count(k) for k in range(4))

    @property
    def is_orientable(self) -> bool:
        return self.orientation is not None

    def index(self, simplex) -> int:
        """Index of a simplex given by any ordering of its vertices."""
        key = tuple(sorted(int(v) for v in simplex))
        try:
            return self._index[len(key) - 1][key]
        except KeyError:
            raise ComplexError(f"simplex {key} is not in the complex") from None

    def has(self, simplex) -> bool:
        key = tuple(sorted(int(v) for v in simplex))
        return 0 < len(key) <= 4 and key in self._index[len(key) - 1]

    def faces(self, k: int, j: int) -> np.ndarray:
        """Indices of the j-faces of every k-simplex.

        Column order follows ``itertools.combinations(range(k + 1), j + 1)``
        over the sorted local vertices.
        """
        key = (k, j)
        if key not in self._faces:
            if j == 0:
                out = self.simplices[k]
            else:
                cells = self.simplices[k]
                idx = self._index[j]
                cols = []
                for comb in itertools.combinations(range(k + 1), j + 1):
                    sub = cells[:, comb]
                    cols.append([idx[tuple(r)] for r in sub.tolist()])
                out = np.array(cols, dtype=np.int64).T.reshape(len(cells), -1)
            self._faces[key] = _readonly(out)
        return self._faces[key]

    def boundary(self, k: int) -> sp.csr_matrix:
        """Integer boundary operator from k-chains to (k-1)-chains."""
        if k not in self._boundary:
            self._boundary[k] = boundary_matrix(self, k)
        return self._boundary[k]

    def cofaces(self, k: int) -> list:
        """For each k-simplex, the array of (k+1)-simplices containing it."""
        inc = abs(self.boundary(k + 1)).tocsr()
        return [inc.indices[inc.indptr[i]:inc.indptr[i + 1]] for i in range(inc.shape[0])]

    def edge_graph(self) -> sp.csr_matrix:
        e = self.simplices[1]
        n = self.n_vertices
        a = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    def n_components(self) -> int:
        from scipy.sparse.csgraph import connected_components

        return int(connected_components(self.edge_graph(), directed=False)[0])


def build_complex(vertex_count, cells, *, allow_nonmanifold=False) -> SimplicialComplex:
    """Build the closure of a list of simplices.

    ``cells`` are vertex tuples of length 1 to 4. Tetrahedra are checked for
    the manifold condition (each triangle in at most two tetrahedra) and for
    a coherent orientation. Both checks raise ``ComplexError`` unless
    ``allow_nonmanifold`` is set, in which case the flags record the outcome.
    """
    n = int(vertex_count)
    if n <= 0:
        raise ComplexError("vertex_count must be positive")
    sets = [set() for _ in range(4)]
    tets = []
    for c in cells:
        key = tuple(int(v) for v in c)
        if not 1 <= len(key) <= 4:
            raise ComplexError(f"cell {key} has unsupported size")
        if len(set(key)) != len(key):
            raise ComplexError(f"cell {key} repeats a vertex")
        if min(key) < 0 or max(key) >= n:
            raise ComplexError(f"cell {key} references a vertex outside 0..{n - 1}")
        key = tuple(sorted(key))
        if len(key) == 4:
            if key in sets[3]:
                raise ComplexError(f"duplicate tetrahedron {key}")
            tets.append(key)
        for j in range(len(key)):
            for sub in itertools.combinations(key, j + 1):
                sets[j].add(sub)
    sets[0].update((v,) for v in range(n))
    simplices = []
    index = []
    for k in range(4):
        arr = np.array(sorted(sets[k]), dtype=np.int64).reshape(-1, k + 1)
        simplices.append(_readonly(arr))
        index.append({tuple(r): i for i, r in enumerate(arr.tolist())})
    cx = SimplicialComplex(
        n_vertices=n,
        simplices=tuple(simplices),
        orientation=None,
        is_manifold=True,
        is_closed=False,
        _index=tuple(index),
        _faces={},
    )
    if len(simplices[3]) == 0:
        return cx
    d3 = cx.boundary(3).tocsr()
    per_face = np.diff(d3.indptr)
    bad = np.flatnonzero(per_face > 2)
    manifold = len(bad) == 0
    if not manifold and not allow_nonmanifold:
        f = tuple(simplices[2][bad[0]])
        raise ComplexError(f"not a manifold: triangle {f} has {per_face[bad[0]]} tetrahedral cofaces")
    closed = manifold and bool(np.all(per_face == 2)) and all(
        len(s) == 0 or _all_in_tets(s, k, cx) for k, s in enumerate(simplices[:3])
    )
    orientation = _orient(d3, len(simplices[3])) if manifold else None
    if manifold and orientation is None and not allow_nonmanifold:
        raise ComplexError("complex is not orientable")
    object.__setattr__(cx, "orientation", None if orientation is None else _readonly(orientation))
    object.__setattr__(cx, "is_manifold", manifold)
    object.__setattr__(cx, "is_closed", closed)
    return cx


def _all_in_tets(s, k, cx):
    # every k-simplex lies in some tetrahedron
    covered = np.zeros(len(s), dtype=bool)
    covered[cx.faces(3, k).ravel()] = True
    return bool(covered.all())


def _orient(d3, n_tets):
    """Coherent +-1 orientation of the tetrahedra, or None if impossible."""
    d3 = d3.tocsr()
    orient = np.zeros(n_tets, dtype=np.int64)
    d3t = d3.T.tocsr()
    for root in range(n_tets):
        if orient[root]:
            continue
        orient[root] = 1
        queue = deque([root])
        while queue:
            t = queue.popleft()
            for p in range(d3t.indptr[t], d3t.indptr[t + 1]):
                f, s = d3t.indices[p], d3t.data[p]
                for q in range(d3.indptr[f], d3.indptr[f + 1]):
                    u, su = d3.indices[q], d3.data[q]
                    if u == t:
                        continue
                    # induced orientations on a shared face must cancel
                    want = -orient[t] * s * su
                    if orient[u] == 0:
                        orient[u] = want
                        queue.append(u)
                    elif orient[u] != want:
                        return None
    return orient


def boundary_matrix(cx: SimplicialComplex, k: int) -> sp.csr_matrix:
    """Sparse integer matrix of the boundary map on k-chains.

    Rows index (k-1)-simplices, columns index k-simplices. The face omitting
    local vertex ``i`` enters with sign ``(-1)**i``.
    """
    nk = cx.count(k)
    if k <= 0 or k > 3:
        return sp.csr_matrix((cx.count(k - 1) if k > 0 else 0, nk), dtype=np.int64)
    if nk == 0:
        return sp.csr_matrix((cx.count(k - 1), 0), dtype=np.int64)
    faces = cx.faces(k, k - 1)
    # combinations of size k drop vertex k, k-1, ..., 0 in turn
    signs = np.array([(-1) ** (k - c) for c in range(k + 1)], dtype=np.int64)
    rows = faces.ravel()
    cols = np.repeat(np.arange(nk), k + 1)
    data = np.tile(signs, nk)
    return sp.csr_matrix((data, (rows, cols)), shape=(cx.count(k - 1), nk), dtype=np.int64)


class Chain:
    """Sparse k-chain (or cochain) with integer or rational coefficients."""

    __slots__ = ("degree", "coeffs")

    def __init__(self, degree, coeffs=None):
        self.degree = int(degree)
        self.coeffs = {}
        for i, c in (coeffs or {}).items():
            if c != 0:
                self.coeffs[int(i)] = c

    @classmethod
    def from_array(cls, degree, values, *, tol=0.0):
        vals = np.asarray(values)
        nz = np.flatnonzero(np.abs(vals) > tol)
        if np.issubdtype(vals.dtype, np.integer):
            return cls(degree, {int(i): int(vals[i]) for i in nz})
        return cls(degree, {int(i): float(vals[i]) for i in nz})

    @classmethod
    def from_simplices(cls, cx, items):
        """Chain from ``(vertex_tuple, coefficient)`` pairs, respecting vertex order."""
        coeffs = {}
        degree = None
        for verts, c in items:
            verts = tuple(int(v) for v in verts)
            deg = len(verts) - 1
            if degree is None:
                degree = deg
            elif deg != degree:
                raise ComplexError("mixed degrees in chain")
            i = cx.index(verts)
            c = c * _perm_sign(verts)
            coeffs[i] = coeffs.get(i, 0) + c
        return cls(degree if degree is not None else 0, coeffs)

    @classmethod
    def edge_path(cls, cx, vertices):
        """1-chain of the edge path visiting ``vertices`` in order."""
        return cls.from_simplices(cx, [((a, b), 1) for a, b in zip(vertices[:-1], vertices[1:]) if a != b])

    def to_array(self, size, dtype=float):
        out = np.zeros(size, dtype=dtype)
        for i, c in self.coeffs.items():
            out[i] = c
        return out

    def boundary(self, cx):
        if self.degree == 0:
            return Chain(0)
        d = cx.boundary(self.degree).tocsc()
        out = {}
        for i, c in self.coeffs.items():
            for p in range(d.indptr[i], d.indptr[i + 1]):
                r = int(d.indices[p])
                out[r] = out.get(r, 0) + c * int(d.data[p])
        return Chain(self.degree - 1, out)

    def pair(self, other):
        """Evaluate a cochain on a chain of the same degree."""
        if other.degree != self.degree:
            raise ComplexError("degree mismatch")
        small, big = (self, other) if len(self.coeffs) <= len(other.coeffs) else (other, self)
        return sum((c * big.coeffs[i] for i, c in small.coeffs.items() if i in big.coeffs), 0)

    def is_zero(self):
        return not self.coeffs

    def is_integral(self):
        return all(isinstance(c, (int, np.integer)) or (isinstance(c, Fraction) and c.denominator == 1)
                   for c in self.coeffs.values())

    def support(self):
        return sorted(self.coeffs)

    def l1(self, weights=None):
        if weights is None:
            return sum(abs(c) for c in self.coeffs.values())
        return float(sum(abs(c) * weights[i] for i, c in self.coeffs.items()))

    def _combine(self, other, s):
        if other.degree != self.degree:
            raise ComplexError("degree mismatch")
        out = dict(self.coeffs)
        for i, c in other.coeffs.items():
            out[i] = out.get(i, 0) + s * c
        return Chain(self.degree, out)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return Chain(self.degree, {i: -c for i, c in self.coeffs.items()})

    def __mul__(self, s):
        return Chain(self.degree, {i: s * c for i, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, Chain) and self.degree == other.degree and self.coeffs == other.coeffs

    def __len__(self):
        return len(self.coeffs)

    def __repr__(self):
        return f"Chain(degree={self.degree}, terms={len(self.coeffs)})"

    def to_json(self):
        return {"degree": self.degree,
                "terms": [[i, _jsonable(c)] for i, c in sorted(self.coeffs.items())]}


def _jsonable(c):
    if isinstance(c, Fraction):
        return str(c) if c.denominator != 1 else int(c)
    if isinstance(c, (np.integer, int)):
        return int(c)
    return float(c)


def _perm_sign(seq):
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


# ---------------------------------------------------------------- mesh I/O

@dataclass
class Mesh:
    """A complex together with optional vertex coordinates and metadata."""

    complex: SimplicialComplex
    vertices: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


def _maximal_cells(cx):
    """Simplices not contained in a higher one (tetrahedra come first)."""
    cells = [tuple(int(v) for v in t) for t in cx.simplices[3]]
    for k in (2, 1, 0):
        s = cx.simplices[k]
        if len(s) == 0:
            continue
        covered = np.zeros(len(s), dtype=bool)
        for m in range(k + 1, 4):
            if cx.count(m):
                covered[cx.faces(m, k).ravel()] = True
        cells.extend(tuple(int(v) for v in s[i]) for i in np.flatnonzero(~covered))
    return cells


def mesh_to_json(mesh: Mesh) -> str:
    cx = mesh.complex
    cells = _maximal_cells(cx)
    doc = {
        "vertex_count": cx.n_vertices,
        "vertices": None if mesh.vertices is None else np.asarray(mesh.vertices, dtype=float).tolist(),
        "tets": [list(c) for c in cells if len(c) == 4],
        "cells": [list(c) for c in cells if len(c) < 4],
        "allow_nonmanifold": not cx.is_manifold or (cx.count(3) > 0 and not cx.is_orientable),
        "metadata": mesh.metadata,
    }
    return json.dumps(doc, indent=1)


def mesh_from_json(text: str) -> Mesh:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ComplexError(f"invalid mesh JSON: {exc}") from None
    if not isinstance(doc, dict) or "tets" not in doc:
        raise ComplexError("mesh JSON needs a 'tets' field")
    verts = doc.get("vertices")
    coords = None if verts is None else np.array(verts, dtype=float)
    n = doc.get("vertex_count")
    if n is None:
        if coords is None:
            raise ComplexError("mesh JSON needs 'vertices' or 'vertex_count'")
        n = len(coords)
    cells = list(doc["tets"]) + list(doc.get("cells", []))
    cx = build_complex(n, cells, allow_nonmanifold=bool(doc.get("allow_nonmanifold", False)))
    return Mesh(cx, coords, dict(doc.get("metadata") or {}))


def mesh_to_off(mesh: Mesh) -> str:
    """OFF-style text: header ``OFF``, counts, vertex lines, cell lines.

    Coordinates are written with ``repr`` so that reading them back is exact.
    """
    cx = mesh.complex
    cells = _maximal_cells(cx)
    coords = mesh.vertices if mesh.vertices is not None else np.zeros((cx.n_vertices, 3))
    lines = ["OFF", f"{cx.n_vertices} {len(cells)} 0"]
    lines += [" ".join(repr(float(x)) for x in row) for row in np.asarray(coords, dtype=float)]
    lines += [" ".join([str(len(c))] + [str(v) for v in c]) for c in cells]
    return "\n".join(lines) + "\n"


def mesh_from_off(text: str, *, allow_nonmanifold=False) -> Mesh:
    rows = [ln.split("#")[0].split() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    if not rows or rows[0][0] != "OFF":
        raise ComplexError("missing OFF header")
    try:
        nv, nc = int(rows[1][0]), int(rows[1][1])
        coords = np.array([[float(x) for x in r] for r in rows[2:2 + nv]], dtype=float)
        cells = []
        for r in rows[2 + nv:2 + nv + nc]:
            m = int(r[0])
            cells.append([int(v) for v in r[1:1 + m]])
    except (IndexError, ValueError) as exc:
        raise ComplexError(f"malformed OFF data: {exc}") from None
    if len(coords) != nv or len(cells) != nc:
        raise ComplexError("OFF counts do not match content")
    cx = build_complex(nv, cells, allow_nonmanifold=allow_nonmanifold)
    return Mesh(cx, coords)


def load_mesh(path) -> Mesh:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".off":
        return mesh_from_off(text)
    return mesh_from_json(text)


def save_mesh(mesh: Mesh, path) -> None:
    path = Path(path)
    text = mesh_to_off(mesh) if path.suffix.lower() == ".off" else mesh_to_json(mesh)
    path.write_text(text)
