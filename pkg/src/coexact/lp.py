"""Linear programs in equality form: minimize c.x subject to A x = b, x >= 0.

Two backends are available. ``simplex`` is a two-phase revised simplex with
an explicit basis inverse and Bland's anticycling rule, meant for small and
medium problems and fully deterministic. ``highs`` hands the problem to the
HiGHS solver shipped with SciPy. ``auto`` picks by problem size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

SIMPLEX_LIMIT = 250_000  # rows * columns below which "auto" uses the simplex


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    status: str
    iterations: int
    backend: str
    basis: np.ndarray | None = None


class _Tableau:
    """Revised simplex state: basis indices and explicit basis inverse."""

    def __init__(self, A, b, basis):
        self.A = A
        self.b = b
        self.basis = np.array(basis)
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        B = B.toarray() if sp.issparse(B) else np.asarray(B)
        self.Binv = np.linalg.inv(B)
        self.xB = self.Binv @ self.b
        self.since = 0

    def column(self, j):
        a = self.A[:, j]
        a = a.toarray().ravel() if sp.issparse(a) else np.asarray(a).ravel()
        return self.Binv @ a

    def pivot(self, r, j, u):
        piv = u[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(u, row)
        self.Binv[r] = row
        theta = self.xB[r] / piv
        self.xB -= theta * u
        self.xB[r] = theta
        self.basis[r] = j
        self.since += 1
        if self.since >= 64:
            self.refactor()


def _run_phase(tab, cost, allowed, tol, max_iter, it):
    """Bland's rule iterations; returns (status, iterations)."""
    while True:
        if it >= max_iter:
            return "iteration_limit", it
        y = cost[tab.basis] @ tab.Binv
        d = cost - tab.A.T @ y
        d[tab.basis] = 0.0
        cand = np.flatnonzero((d < -tol) & allowed)
        if len(cand) == 0:
            return "optimal", it
        j = int(cand[0])
        u = tab.column(j)
        pos = u > tol
        if not pos.any():
            return "unbounded", it
        ratios = np.full(len(u), np.inf)
        ratios[pos] = np.maximum(tab.xB[pos], 0.0) / u[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        r = int(ties[np.argmin(tab.basis[ties])])
        tab.pivot(r, j, u)
        it += 1


def simplex(c, A, b, *, tol=1e-9, max_iter=50_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = sp.csr_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    m, n = A.shape
    flip = b < 0
    if flip.any():
        D = sp.diags(np.where(flip, -1.0, 1.0))
        A = (D @ A).tocsr()
        b[flip] *= -1
    Aa = sp.hstack([A, sp.identity(m, format="csr")]).tocsc()
    tab = _Tableau(Aa, b, np.arange(n, n + m))
    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    allowed = np.ones(n + m, dtype=bool)
    status, it = _run_phase(tab, phase1, allowed, tol, max_iter, 0)
    if status == "iteration_limit":
        return LPResult(np.full(n, np.nan), np.nan, status, it, "simplex")
    if tab.xB[tab.basis >= n].sum() > 1e-7 * max(1.0, np.abs(b).max()):
        return LPResult(np.full(n, np.nan), np.nan, "infeasible", it, "simplex")
    # drive remaining artificials out of the basis where possible
    for r in np.flatnonzero(tab.basis >= n):
        row = tab.Binv[r] @ A
        row = np.asarray(row).ravel()
        nonbasic = np.ones(n, dtype=bool)
        nonbasic[tab.basis[tab.basis < n]] = False
        cand = np.flatnonzero((np.abs(row) > 1e-9) & nonbasic)
        if len(cand):
            j = int(cand[0])
            tab.pivot(r, j, tab.column(j))
    allowed[n:] = False
    phase2 = np.concatenate([c, np.zeros(m)])
    status, it = _run_phase(tab, phase2, allowed, tol, max_iter, it)
    tab.refactor()
    x = np.zeros(n + m)
    x[tab.basis] = tab.xB
    x = np.maximum(x[:n], 0.0)
    if status != "optimal":
        return LPResult(x, np.nan, status, it, "simplex", tab.basis.copy())
    return LPResult(x, float(c @ x), "optimal", it, "simplex", tab.basis.copy())


def highs(c, A, b, *, tol=1e-10) -> LPResult:
    from scipy.optimize import linprog

    res = linprog(c, A_eq=sp.csr_matrix(A), b_eq=b, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol})
    status = {0: "optimal", 1: "iteration_limit", 2: "infeasible", 3: "unbounded"}.get(res.status, "error")
    x = res.x if res.x is not None else np.full(len(c), np.nan)
    return LPResult(x, float(res.fun) if res.status == 0 else np.nan, status, int(res.nit), "highs")


def solve_lp(c, A, b, *, backend="auto", **kw) -> LPResult:
    m, n = A.shape
    if backend == "auto":
        backend = "simplex" if m * n <= SIMPLEX_LIMIT else "highs"
    if backend == "simplex":
        return simplex(c, A, b, **kw)
    if backend == "highs":
        return highs(c, A, b, **kw)
    raise ValueError(f"unknown LP backend {backend!r}")


def solve_ilp(c, A, b):
    """Integer program with the same data, via SciPy's MILP interface."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    res = milp(c, constraints=LinearConstraint(sp.csr_matrix(A), b, b), integrality=np.ones(len(c)),
               bounds=Bounds(0, np.inf))
    if res.status != 0:
        return LPResult(np.full(len(c), np.nan), np.nan, "infeasible" if res.status == 2 else "error", 0, "milp")
    return LPResult(np.round(res.x), float(res.fun), "optimal", 0, "milp")
