"""Integral homology in degree one.

The first homology group is computed from a spanning tree: non-tree edges
give the generators of the cycle group, and the boundary operator on
triangles, restricted to those rows, gives the relations. Relations with a
unit entry are eliminated sparsely; the small remainder goes through an exact
Smith normal form over Python integers.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .complex import Chain, ComplexError, SimplicialComplex


class HomologyError(ValueError):
    pass


# ------------------------------------------------------------- dense SNF

def smith_normal_form(A):
    """Exact Smith normal form of an integer matrix.

    Returns ``(U, S, V)`` as lists of lists of Python ints with
    ``U @ A @ V == S``, ``U`` and ``V`` unimodular, ``S`` diagonal with
    non-negative entries each dividing the next.
    """
    S = [[int(x) for x in row] for row in np.asarray(A, dtype=object).tolist()] if len(A) else []
    m = len(S)
    n = len(S[0]) if m else (np.shape(A)[1] if np.ndim(A) == 2 else 0)
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    V = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap_rows(i, j):
        S[i], S[j] = S[j], S[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for M in (S, V):
            for row in M:
                row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):
        # row_dst -= q * row_src
        if q:
            rs, rd = S[src], S[dst]
            for k in range(n):
                if rs[k]:
                    rd[k] -= q * rs[k]
            us, ud = U[src], U[dst]
            for k in range(m):
                if us[k]:
                    ud[k] -= q * us[k]

    def add_col(dst, src, q):
        if q:
            for M in (S, V):
                for row in M:
                    if row[src]:
                        row[dst] -= q * row[src]

    t = 0
    while t < min(m, n):
        best = None
        for i in range(t, m):
            for j in range(t, n):
                v = S[i][j]
                if v and (best is None or abs(v) < best[0]):
                    best = (abs(v), i, j)
                    if best[0] == 1:
                        break
            if best and best[0] == 1:
                break
        if best is None:
            break
        _, i, j = best
        swap_rows(t, i)
        swap_cols(t, j)
        while True:
            p = S[t][t]
            clean = True
            for i in range(t + 1, m):
                if S[i][t]:
                    add_row(i, t, S[i][t] // p)
                    if S[i][t]:
                        clean = False
            for j in range(t + 1, n):
                if S[t][j]:
                    add_col(j, t, S[t][j] // p)
                    if S[t][j]:
                        clean = False
            if not clean:
                # move the smallest remainder into the pivot and repeat
                cand = [(abs(S[i][t]), i, t) for i in range(t + 1, m) if S[i][t]]
                cand += [(abs(S[t][j]), t, j) for j in range(t + 1, n) if S[t][j]]
                _, i, j = min(cand)
                if i != t:
                    swap_rows(t, i)
                else:
                    swap_cols(t, j)
                continue
            bad = None
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if S[i][j] % p:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            add_row(t, bad, -1)
        if S[t][t] < 0:
            S[t] = [-x for x in S[t]]
            U[t] = [-x for x in U[t]]
        t += 1
    return U, S, V


def invariant_factors(A):
    """Nonzero diagonal of the Smith normal form."""
    _, S, _ = smith_normal_form(A)
    return [S[i][i] for i in range(min(len(S), len(S[0]) if S else 0)) if S[i][i]]


def _inverse_unimodular(U):
    """Exact inverse of a unimodular integer matrix via fractions-free Gauss-Jordan."""
    from fractions import Fraction

    m = len(U)
    A = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(m)] for i, row in enumerate(U)]
    for c in range(m):
        p = next(r for r in range(c, m) if A[r][c] != 0)
        A[c], A[p] = A[p], A[c]
        piv = A[c][c]
        A[c] = [x / piv for x in A[c]]
        for r in range(m):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    out = [[x for x in row[m:]] for row in A]
    for row in out:
        for x in row:
            if x.denominator != 1:
                raise HomologyError("matrix is not unimodular")
    return [[int(x) for x in row] for row in out]


# ------------------------------------------------- sparse unit elimination

@dataclass
class Reduction:
    """Outcome of eliminating unit pivots from a sparse integer matrix.

    ``steps`` lists ``(row, column_entries)`` in elimination order, where
    ``column_entries`` maps row -> value of the pivot column at that time.
    ``rows``/``cols`` are the surviving indices and ``dense`` the remaining
    block as a list of lists.
    """

    steps: list
    rows: list
    cols: list
    dense: list

    @property
    def n_units(self):
        return len(self.steps)


def reduce_units(A, *, record=True) -> Reduction:
    A = sp.csc_matrix(A)
    cols = {}
    rows = {}
    for c in range(A.shape[1]):
        lo, hi = A.indptr[c], A.indptr[c + 1]
        if hi > lo:
            entries = {int(r): int(v) for r, v in zip(A.indices[lo:hi], A.data[lo:hi]) if v}
            if entries:
                cols[c] = entries
                for r in entries:
                    rows.setdefault(r, set()).add(c)
    heap = [(len(e), c) for c, e in cols.items()]
    heapq.heapify(heap)
    steps = []
    while heap:
        size, c = heapq.heappop(heap)
        col = cols.get(c)
        if col is None:
            continue
        if len(col) != size:
            heapq.heappush(heap, (len(col), c))
            continue
        units = [r for r, v in col.items() if v in (1, -1)]
        if not units:
            continue
        r = min(units, key=lambda x: (len(rows[x]), x))
        piv = col[r]
        for c2 in list(rows[r]):
            if c2 == c:
                continue
            col2 = cols[c2]
            f = col2[r] * piv
            for rr, v in col.items():
                nv = col2.get(rr, 0) - f * v
                if nv:
                    if rr not in col2:
                        rows[rr].add(c2)
                    col2[rr] = nv
                else:
                    if rr in col2:
                        del col2[rr]
                        rows[rr].discard(c2)
            if col2:
                heapq.heappush(heap, (len(col2), c2))
            else:
                del cols[c2]
        if record:
            steps.append((r, dict(col)))
        else:
            steps.append((r, None))
        for rr in col:
            rows[rr].discard(c)
        del cols[c]
        del rows[r]
    live_rows = sorted(r for r, cs in rows.items() if cs)
    live_cols = sorted(cols)
    pos = {r: i for i, r in enumerate(live_rows)}
    dense = [[0] * len(live_cols) for _ in live_rows]
    for j, c in enumerate(live_cols):
        for r, v in cols[c].items():
            dense[pos[r]][j] = v
    return Reduction(steps, live_rows, live_cols, dense)


def integer_invariant_factors(A):
    """Invariant factors of a sparse integer matrix (units included)."""
    red = reduce_units(A, record=False)
    rest = invariant_factors(red.dense) if red.dense and red.dense[0] else []
    return [1] * red.n_units + rest


def integer_rank(A):
    if A.shape[0] == 0 or A.shape[1] == 0:
        return 0
    return len(integer_invariant_factors(A))


# ---------------------------------------------------------- H_1 basis

@dataclass
class HomologyBasis:
    """First homology of a complex.

    ``cycles[j]`` and ``dual_cocycles[j]`` are integer chains/cochains with
    ``<dual_cocycles[i], cycles[j]> = delta_ij``; each cocycle vanishes on
    boundaries and on torsion classes. ``r_universal`` is the least common
    multiple of the torsion orders (1 when there is no torsion).
    """

    rank: int
    torsion_orders: list
    cycles: list
    dual_cocycles: list
    betti: tuple
    r_universal: int
    _tree: np.ndarray = field(repr=False, default=None)
    _steps: list = field(repr=False, default=None)
    _U: list = field(repr=False, default=None)
    _rows: list = field(repr=False, default=None)
    _factors: list = field(repr=False, default=None)
    _gen_rows: list = field(repr=False, default=None)

    def cocycle_matrix(self, n_edges):
        """Dense array of shape (rank, n_edges) holding the cocycles."""
        out = np.zeros((self.rank, n_edges))
        for j, b in enumerate(self.dual_cocycles):
            for i, c in b.coeffs.items():
                out[j, i] = c
        return out

    def to_json(self):
        return {
            "rank": self.rank,
            "torsion_orders": list(self.torsion_orders),
            "betti": list(self.betti),
            "r_universal": self.r_universal,
            "cycles": [c.to_json() for c in self.cycles],
            "dual_cocycles": [b.to_json() for b in self.dual_cocycles],
        }


def spanning_forest(cx: SimplicialComplex):
    """Boolean mask of BFS-tree edges and the parent array of the forest."""
    g = cx.edge_graph()
    n = cx.n_vertices
    parent = np.full(n, -9999, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    for root in range(n):
        if seen[root]:
            continue
        order, pred = breadth_first_order(g, root, directed=False, return_predecessors=True)
        seen[order] = True
        parent[order] = pred[order]
        parent[root] = -1
    mask = np.zeros(cx.count(1), dtype=bool)
    for v in range(n):
        p = parent[v]
        if p >= 0:
            mask[cx.index((v, p))] = True
    return mask, parent


def _tree_path(parent, a, b):
    """Vertex path from a to b inside the spanning forest."""
    pa = [a]
    while parent[pa[-1]] >= 0:
        pa.append(int(parent[pa[-1]]))
    pb = [b]
    while parent[pb[-1]] >= 0:
        pb.append(int(parent[pb[-1]]))
    sa = set(pa)
    meet = next(v for v in pb if v in sa)
    left = pa[:pa.index(meet) + 1]
    right = pb[:pb.index(meet)]
    return left + right[::-1]


def fundamental_cycle(cx, parent, edge):
    """Closed edge path: the edge followed by the tree path back."""
    a, b = (int(v) for v in cx.simplices[1][edge])
    path = [a] + _tree_path(parent, b, a)
    return Chain.edge_path(cx, path), path


def homology_basis(cx: SimplicialComplex) -> HomologyBasis:
    """Integral first homology with dual integer cocycles."""
    E = cx.count(1)
    tree, parent = spanning_forest(cx)
    gen_edges = np.flatnonzero(~tree)
    pos = {int(e): i for i, e in enumerate(gen_edges)}
    d2 = cx.boundary(2).tocsr()
    B = d2[gen_edges, :] if len(gen_edges) else sp.csr_matrix((0, cx.count(2)), dtype=np.int64)
    red = reduce_units(B) if B.shape[0] and B.shape[1] else Reduction([], [], [], [])
    eliminated = {r for r, _ in red.steps}
    live = set(red.rows)
    free_rows = [i for i in range(len(gen_edges)) if i not in eliminated and i not in live]
    dense = red.dense
    if dense and dense[0]:
        U, S, _ = smith_normal_form(dense)
        diag = [S[i][i] if i < len(S[0]) else 0 for i in range(len(S))]
    else:
        U = [[int(i == j) for j in range(len(red.rows))] for i in range(len(red.rows))]
        diag = [0] * len(red.rows)
    torsion = [d for d in diag if d > 1]
    free_in_dense = [i for i, d in enumerate(diag) if d == 0]
    Uinv = _inverse_unimodular(U) if U else []
    # generators: dense free directions, then untouched rows
    gens = []
    for i in free_in_dense:
        gens.append({red.rows[r]: Uinv[r][i] for r in range(len(red.rows)) if Uinv[r][i]})
    for r in free_rows:
        gens.append({r: 1})
    funcs = []
    for i in free_in_dense:
        funcs.append({red.rows[r]: U[i][r] for r in range(len(red.rows)) if U[i][r]})
    for r in free_rows:
        funcs.append({r: 1})
    # extend functionals over eliminated generators in reverse order
    for f in funcs:
        for r, col in reversed(red.steps):
            piv = col[r]
            s = 0
            for rr, v in col.items():
                if rr != r:
                    s += v * f.get(rr, 0)
            val = -s * piv
            if val:
                f[r] = val
    rank = len(gens)
    cycles = []
    for g in gens:
        total = Chain(1)
        for r, c in g.items():
            z, _ = fundamental_cycle(cx, parent, int(gen_edges[r]))
            total = total + c * z
        cycles.append(total)
    cocycles = [Chain(1, {int(gen_edges[r]): v for r, v in f.items()}) for f in funcs]
    cycles = _shorten(cx, parent, gen_edges, cocycles, cycles)
    betti = betti_numbers(cx, rank1=rank)
    r_univ = 1
    for d in torsion:
        r_univ = r_univ * d // math.gcd(r_univ, d)
    return HomologyBasis(
        rank=rank,
        torsion_orders=torsion,
        cycles=cycles,
        dual_cocycles=cocycles,
        betti=betti,
        r_universal=r_univ,
        _tree=tree,
        _steps=red.steps,
        _U=U,
        _rows=red.rows,
        _factors=diag,
        _gen_rows=[int(e) for e in gen_edges],
    )


def _shorten(cx, parent, gen_edges, cocycles, cycles):
    """Replace representatives by single fundamental cycles when one pairs correctly."""
    k = len(cocycles)
    if k == 0:
        return cycles
    P = np.zeros((k, len(gen_edges)), dtype=np.int64)
    for j, b in enumerate(cocycles):
        for i, e in enumerate(gen_edges):
            P[j, i] = b.coeffs.get(int(e), 0)
    depth = np.zeros(cx.n_vertices, dtype=np.int64)
    for v in range(cx.n_vertices):
        d, u = 0, v
        while parent[u] >= 0:
            u = parent[u]
            d += 1
        depth[v] = d
    ends = cx.simplices[1][gen_edges]
    cost = depth[ends[:, 0]] + depth[ends[:, 1]]
    out = []
    for j in range(k):
        target = np.zeros(k, dtype=np.int64)
        target[j] = 1
        best = None
        cand = np.flatnonzero((P == target[:, None]).all(axis=0))
        if len(cand):
            i = cand[np.argmin(cost[cand])]
            best, _ = fundamental_cycle(cx, parent, int(gen_edges[i]))
        # fundamental cycles carry no torsion only if the class is torsion free
        out.append(best if best is not None and best.l1() <= cycles[j].l1() else cycles[j])
    return out


def betti_numbers(cx: SimplicialComplex, rank1=None):
    ranks = [0] + [integer_rank(cx.boundary(k)) if cx.count(k) else 0 for k in (1, 2, 3)] + [0]
    b = tuple(cx.count(k) - ranks[k] - ranks[k + 1] for k in range(4))
    if rank1 is not None and b[1] != rank1:
        raise HomologyError(f"inconsistent first Betti number {b[1]} vs {rank1}")
    return b


@dataclass(frozen=True)
class CycleClass:
    """Class of a 1-cycle: integer coordinates on the free part and order.

    ``order`` is the least r > 0 with r times the cycle a boundary, or
    ``math.inf`` when the free coordinates do not all vanish.
    """

    coords: tuple
    order: float

    @property
    def is_boundary(self):
        return self.order == 1


def _as_chain(cx, gamma):
    if isinstance(gamma, Chain):
        if gamma.degree != 1:
            raise HomologyError("expected a 1-chain")
        return gamma
    arr = np.asarray(gamma)
    if arr.shape != (cx.count(1),):
        raise HomologyError("1-chain array has the wrong length")
    if not np.all(arr == np.round(arr)):
        raise HomologyError("cycle coefficients must be integers")
    return Chain.from_array(1, arr.astype(np.int64))


def classify_cycle(cx: SimplicialComplex, H: HomologyBasis, gamma) -> CycleClass:
    """Free coordinates ``<beta_j, gamma>`` and the order of the class."""
    gamma = _as_chain(cx, gamma)
    if not gamma.boundary(cx).is_zero():
        raise HomologyError("input is not a cycle")
    coords = tuple(int(gamma.pair(b)) for b in H.dual_cocycles)
    if any(coords):
        return CycleClass(coords, math.inf)
    # coordinates on the generators of the cycle group
    pos = {e: i for i, e in enumerate(H._gen_rows)}
    x = {}
    for e, c in gamma.coeffs.items():
        if e in pos:
            x[pos[e]] = x.get(pos[e], 0) + int(c)
    for r, col in H._steps:
        xr = x.pop(r, 0)
        if xr:
            piv = col[r]
            for rr, v in col.items():
                if rr != r:
                    nv = x.get(rr, 0) - v * piv * xr
                    if nv:
                        x[rr] = nv
                    else:
                        x.pop(rr, None)
    order = 1
    rows = H._rows
    for i, d in enumerate(H._factors):
        if d <= 1:
            continue
        yi = sum(H._U[i][k] * x.get(r, 0) for k, r in enumerate(rows))
        o = d // math.gcd(yi % d, d)
        order = order * o // math.gcd(order, o)
    return CycleClass(coords, order)


def is_boundary(cx, gamma, r=1):
    """True if r times the 1-cycle is the boundary of an integer 2-chain."""
    H = homology_basis(cx)
    cls = classify_cycle(cx, H, gamma)
    return cls.order != math.inf and r % cls.order == 0
