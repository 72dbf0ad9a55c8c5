"""Smallest eigenpairs of the Hodge Laplacian on coexact 1-forms.

The discrete problem is the pencil ``K u = lam M u`` with ``K = d1^T M2 d1``
and ``M = M1``. Closed cochains (exact plus harmonic) form the kernel of
``K``; they are projected out in the M-inner product, and the remaining
spectrum is found with a block Krylov method applied to the shift-inverted
operator ``(K + s M)^-1 M``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .dec import MetricData, exact_part, norms


class SpectralError(ArithmeticError):
    pass


@dataclass
class SpectralResult:
    """Eigenvalues (ascending), M-orthonormal eigenforms as columns, and
    relative residuals ``|K u - lam M u|_{M^-1} / (lam |u|_M)``."""

    eigenvalues: np.ndarray
    eigenforms: np.ndarray
    residuals: np.ndarray
    zero_threshold: float
    truncated: bool = False
    kernel_dim: int = 0
    shift: float = 0.0
    iterations: int = 0
    seed: int = 0
    info: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "residuals": [float(x) for x in self.residuals],
            "zero_threshold": float(self.zero_threshold),
            "truncated": bool(self.truncated),
            "kernel_dim": int(self.kernel_dim),
            "shift": float(self.shift),
            "iterations": int(self.iterations),
            "seed": int(self.seed),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _m_orthonormalize(X, M, drop=1e-10):
    """M-orthonormal basis of the columns of X (rank-revealing)."""
    G = X.T @ (M @ X)
    G = 0.5 * (G + G.T)
    w, V = np.linalg.eigh(G)
    keep = w > drop * max(w.max(), 1e-300)
    if not keep.any():
        return X[:, :0]
    Y = X @ (V[:, keep] / np.sqrt(w[keep]))
    # one more pass for accuracy
    G = Y.T @ (M @ Y)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    return sla.solve_triangular(L, Y.T, lower=True).T


def harmonic_basis(md: MetricData, H=None):
    """M1-orthonormal basis of discrete harmonic 1-forms from integer cocycles."""
    if H is None:
        from .homology import homology_basis

        H = homology_basis(md.complex)
    if H.rank == 0:
        return np.zeros((md.complex.count(1), 0))
    B = H.cocycle_matrix(md.complex.count(1)).T
    cols = [b - exact_part(md, b)[0] for b in B.T]
    return _m_orthonormalize(np.array(cols).T, md.mass[1])


class _Deflation:
    def __init__(self, md, harmonic):
        self.md = md
        self.M = md.mass[1]
        self.D0 = md.d(0)
        self.H = harmonic

    def __call__(self, X):
        X = np.array(X, dtype=float, copy=True)
        if X.ndim == 1:
            return self(X[:, None])[:, 0]
        X -= exact_part(self.md, X)[0]
        if self.H.shape[1]:
            X -= self.H @ (self.H.T @ (self.M @ X))
        return X


def _block_krylov(apply_op, project, M, n, count, *, block, max_dim, tol, rng, max_restarts):
    """Largest eigenpairs of an M-self-adjoint operator on a projected subspace.

    Returns Ritz values (descending), Ritz vectors and the number of blocks.
    """
    X = _m_orthonormalize(project(rng.standard_normal((n, block))), M)
    V = X
    Y = apply_op(X)
    T = V.T @ (M @ Y)
    restarts = 0
    steps = 0
    last = Y
    while True:
        steps += 1
        T = 0.5 * (T + T.T)
        theta, S = np.linalg.eigh(T)
        theta, S = theta[::-1], S[:, ::-1]
        k = min(count, len(theta))
        U = V @ S[:, :k]
        R = Y @ S[:, :k] - U * theta[:k]
        res = np.sqrt(np.maximum(np.einsum("ij,ij->j", R, M @ R), 0.0))
        if (len(theta) >= count and np.all(res <= tol * np.abs(theta[:k]))) or V.shape[1] >= max_dim:
            return theta, V @ S, steps
        W = project(last)
        for _ in range(2):
            W -= V @ (V.T @ (M @ W))
        want = last.shape[1]
        W = _m_orthonormalize(W, M, drop=1e-20)
        if W.shape[1] < want:
            # invariant subspace reached: top up with fresh directions
            restarts += 1
            if restarts > max_restarts and W.shape[1] == 0:
                return theta, V @ S, steps
            extra = project(rng.standard_normal((n, want - W.shape[1])))
            B = np.hstack([V, W])
            for _ in range(2):
                extra -= B @ (B.T @ (M @ extra))
            extra = _m_orthonormalize(extra, M, drop=1e-20)
            W = np.hstack([W, extra])
            if W.shape[1] == 0:
                return theta, V @ S, steps
        YW = apply_op(W)
        MYW = M @ YW
        top = V.T @ MYW
        corner = W.T @ MYW
        T = np.block([[T, top], [top.T, corner]])
        V = np.hstack([V, W])
        Y = np.hstack([Y, YW])
        last = YW


def _finish(K, M, lu_M, shift, theta, vecs, count, zero_threshold, project):
    """Convert Ritz data to Laplacian eigenpairs and polish by Rayleigh-Ritz."""
    lam = 1.0 / theta - shift
    take = np.argsort(lam)
    lam, vecs = lam[take], vecs[:, take]
    nonzero = lam > zero_threshold
    kernel = int((~nonzero).sum())
    lam, vecs = lam[nonzero], vecs[:, nonzero]
    m = min(len(lam), count + 4)
    U = project(vecs[:, :m])
    KU, MU = K @ U, M @ U
    A = U.T @ KU
    B = U.T @ MU
    w, Z = sla.eigh(0.5 * (A + A.T), 0.5 * (B + B.T))
    U = U @ Z
    KU, MU = KU @ Z, MU @ Z
    R = KU - MU * w
    res = np.sqrt(np.maximum(np.einsum("ij,ij->j", R, lu_M.solve(R)), 0.0))
    rel = res / np.maximum(np.abs(w), 1e-300)
    return w[:count], U[:, :count], rel[:count], kernel


def coexact_spectrum(md: MetricData, count: int, *, tol=1e-8, seed=0, shift=None, homology=None,
                     max_restarts=3, block=None) -> SpectralResult:
    """The ``count`` smallest nonzero eigenpairs of the coexact 1-form Laplacian.

    Parameters
    ----------
    md : MetricData
    count : int
    tol : float
        Bound on the relative residual of every returned pair.
    seed : int
        Seeds the random starting block; results do not depend on it beyond
        rounding.
    shift : float, optional
        Positive shift ``s`` of the factorized operator ``K + s M``.
    homology : HomologyBasis, optional
        Used to deflate harmonic forms; computed when absent.
    """
    if count < 1:
        raise ValueError("count must be positive")
    cx = md.complex
    K = (md.d(1).T @ md.mass[2] @ md.d(1)).tocsr()
    M = md.mass[1]
    n = cx.count(1)
    H = harmonic_basis(md, homology)
    closed_dim = cx.n_vertices - cx.n_components() + H.shape[1]
    rank = n - closed_dim
    truncated = count > rank
    count = min(count, rank)
    kd, md_ = K.diagonal(), M.diagonal()
    scale = float(np.max(kd / md_))
    zero_threshold = 1e-10 * scale
    if count == 0:
        return SpectralResult(np.zeros(0), np.zeros((n, 0)), np.zeros(0), zero_threshold, truncated,
                              closed_dim, 0.0, 0, seed)
    s = float(shift) if shift is not None else 1e-6 * scale
    if s <= 0:
        raise ValueError("shift must be positive")
    lu = spla.splu((K + s * M).tocsc(), permc_spec="MMD_AT_PLUS_A")
    project = _Deflation(md, H)

    def apply_op(X):
        return project(lu.solve(M @ X))

    lu_M = md.mass_solver(1)
    blk = block or max(count + 4, 8)
    blk = min(blk, rank)
    max_dim = min(rank, max(30 * blk, 200))
    rng = np.random.default_rng(seed)
    inner_tol = 1e-12
    for attempt in range(max_restarts + 1):
        theta, vecs, steps = _block_krylov(apply_op, project, M, n, count, block=blk, max_dim=max_dim,
                                           tol=inner_tol, rng=rng, max_restarts=max_restarts)
        lam, U, rel, kernel = _finish(K, M, lu_M, s, theta, vecs, count, zero_threshold, project)
        if len(lam) == count and np.all(rel <= tol):
            break
        max_dim = min(rank, 2 * max_dim)
        rng = np.random.default_rng([seed, attempt + 1])
    else:
        raise SpectralError(f"eigensolver did not reach residual {tol:g}: {np.max(rel) if len(rel) else np.nan:.2e}")
    # fix signs for reproducibility: largest-magnitude entry positive
    idx = np.argmax(np.abs(U), axis=0)
    U = U * np.sign(U[idx, np.arange(U.shape[1])])
    return SpectralResult(lam, U, rel, zero_threshold, truncated, closed_dim, s, steps, seed,
                          {"block": blk, "krylov_dim": int(vecs.shape[1])})


def exact_spectrum(md: MetricData, count: int, *, tol=1e-8, seed=0) -> SpectralResult:
    """Smallest nonzero eigenpairs of the scalar Laplacian ``(d0^T M1 d0, M0)``."""
    cx = md.complex
    D0 = md.d(0)
    K = (D0.T @ md.mass[1] @ D0).tocsr()
    M = md.mass[0]
    n = cx.n_vertices
    from scipy.sparse.csgraph import connected_components

    _, labels = connected_components(cx.edge_graph(), directed=False)
    C = np.zeros((n, labels.max() + 1))
    C[np.arange(n), labels] = 1.0
    C = _m_orthonormalize(C, M)

    def project(X):
        X = np.array(X, dtype=float, copy=True)
        return X - C @ (C.T @ (M @ X))

    rank = n - C.shape[1]
    count = min(count, rank)
    scale = float(np.max(K.diagonal() / M.diagonal()))
    s = 1e-6 * scale
    lu = spla.splu((K + s * M).tocsc(), permc_spec="MMD_AT_PLUS_A")
    lu_M = md.mass_solver(0)
    rng = np.random.default_rng(seed)
    blk = min(max(count + 4, 8), rank)
    theta, vecs, steps = _block_krylov(lambda X: project(lu.solve(M @ X)), project, M, n, count,
                                       block=blk, max_dim=min(rank, 30 * blk), tol=1e-12, rng=rng,
                                       max_restarts=3)
    lam, U, rel, kernel = _finish(K, M, lu_M, s, theta, vecs, count, 1e-10 * scale, project)
    return SpectralResult(lam, U, rel, 1e-10 * scale, False, C.shape[1], s, steps, seed)


def sup_l2_ratio(md: MetricData, alpha) -> float:
    """Scale-invariant ratio ``vol^(1/2) |alpha|_inf / |alpha|_2`` of a 1-cochain."""
    nr = norms(md, alpha, 1)
    if nr["L2"] == 0.0:
        raise ValueError("sup/L2 ratio is undefined for the zero form")
    return float(np.sqrt(md.total_volume) * nr["Linf"] / nr["L2"])


def dense_coexact_spectrum(md: MetricData):
    """All nonzero eigenvalues of the pencil by dense linear algebra (small meshes)."""
    K = (md.d(1).T @ md.mass[2] @ md.d(1)).toarray()
    M = md.mass[1].toarray()
    w = sla.eigh(K, M, eigvals_only=True)
    scale = np.max(np.diag(K) / np.diag(M))
    return w[w > 1e-10 * scale], int(np.sum(w <= 1e-10 * scale))
