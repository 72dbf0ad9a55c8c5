"""Pointwise exterior algebra on an oriented inner-product space.

A p-form on R^n is stored as a coefficient vector over the increasing index
tuples ``itertools.combinations(range(n), p)``, in that order, relative to
the coordinate coframe. The metric is given as the Gram matrix ``G`` of the
coordinate vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def basis(n, p):
    return tuple(itertools.combinations(range(n), p))


@lru_cache(maxsize=None)
def _position(n, p):
    return {I: i for i, I in enumerate(basis(n, p))}


def _sort_sign(seq):
    """Sign of the permutation sorting ``seq``; 0 if an index repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def compound(A, p):
    """p-th compound matrix: the action of A on p-vectors."""
    n = A.shape[0]
    B = basis(n, p)
    if p == 0:
        return np.ones((1, 1))
    out = np.empty((len(B), len(B)))
    for i, I in enumerate(B):
        for j, J in enumerate(B):
            out[i, j] = np.linalg.det(A[np.ix_(I, J)])
    return out


@dataclass(frozen=True)
class Form:
    degree: int
    coeffs: np.ndarray

    def __add__(self, other):
        return Form(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return Form(self.degree, self.coeffs - other.coeffs)

    def __mul__(self, s):
        return Form(self.degree, s * self.coeffs)

    __rmul__ = __mul__


def wedge(a: Form, b: Form, n) -> Form:
    p, q = a.degree, b.degree
    if p + q > n:
        return Form(p + q, np.zeros(0))
    pos = _position(n, p + q)
    out = np.zeros(len(pos))
    for i, I in enumerate(basis(n, p)):
        if a.coeffs[i] == 0:
            continue
        for j, J in enumerate(basis(n, q)):
            if b.coeffs[j] == 0:
                continue
            s = _sort_sign(I + J)
            if s:
                out[pos[tuple(sorted(I + J))]] += s * a.coeffs[i] * b.coeffs[j]
    return Form(p + q, out)


@dataclass(frozen=True)
class PointFrame:
    """Metric and orientation at a point, in coordinate components.

    ``gram`` is the Gram matrix of the coordinate vectors; ``orientation``
    is +1 when the coordinate frame is positively oriented.
    """

    gram: np.ndarray
    orientation: int = 1

    @property
    def n(self):
        return self.gram.shape[0]

    @property
    def volume_factor(self):
        return float(np.sqrt(np.linalg.det(self.gram)))

    def _coframe(self):
        # rows of C give an orthonormal coframe: theta = C du
        C = np.linalg.cholesky(self.gram).T
        return C

    def star(self, a: Form) -> Form:
        n, p = self.n, a.degree
        C = self._coframe()
        Cinv = np.linalg.inv(C)
        # coefficients in the orthonormal coframe
        ortho = compound(Cinv, p).T @ a.coeffs if p else a.coeffs.copy()
        out = np.zeros(len(basis(n, n - p)))
        pos = _position(n, n - p)
        for i, I in enumerate(basis(n, p)):
            comp = tuple(k for k in range(n) if k not in I)
            out[pos[comp]] += _sort_sign(I + comp) * ortho[i]
        back = compound(C, n - p).T @ out if n - p else out
        return Form(n - p, self.orientation * back)

    def inner(self, a: Form, b: Form) -> float:
        p = a.degree
        Ginv = np.linalg.inv(self.gram)
        return float(a.coeffs @ compound(Ginv, p) @ b.coeffs) if p else float(a.coeffs @ b.coeffs)

    def norm(self, a: Form) -> float:
        return float(np.sqrt(max(self.inner(a, a), 0.0)))

    def flat(self, v) -> Form:
        return Form(1, self.gram @ np.asarray(v, dtype=float))

    def sharp(self, a: Form):
        return np.linalg.solve(self.gram, a.coeffs)

    def interior(self, v, a: Form) -> Form:
        n, p = self.n, a.degree
        if p == 0:
            return Form(0, np.zeros(0))
        pos = _position(n, p - 1)
        out = np.zeros(len(pos))
        for i, I in enumerate(basis(n, p)):
            for k, idx in enumerate(I):
                rest = I[:k] + I[k + 1:]
                out[pos[rest]] += (-1) ** k * v[idx] * a.coeffs[i]
        return Form(p - 1, out)

    def comass(self, a: Form) -> float:
        """Maximum of the form on orthonormal p-frames.

        Exact for degrees 0, 1, n-1 and n, and for 2-forms in any dimension
        (largest singular value of the skew matrix in an orthonormal frame).
        """
        n, p = self.n, a.degree
        if p in (0, n):
            return self.norm(a)
        if p in (1, n - 1):
            return self.norm(a)
        if p == 2:
            C = self._coframe()
            ortho = compound(np.linalg.inv(C), 2).T @ a.coeffs
            W = np.zeros((n, n))
            for i, (r, c) in enumerate(basis(n, 2)):
                W[r, c], W[c, r] = ortho[i], -ortho[i]
            return float(np.linalg.svd(W, compute_uv=False)[0])
        raise NotImplementedError("comass is only implemented up to degree 2 and codegree 1")

    def volume_form(self) -> Form:
        return Form(self.n, np.array([self.orientation * self.volume_factor]))


def form(n, degree, coeffs=None) -> Form:
    size = len(basis(n, degree))
    c = np.zeros(size) if coeffs is None else np.asarray(coeffs, dtype=float).reshape(size)
    return Form(degree, c)
