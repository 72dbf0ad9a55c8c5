import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from coexact.complex import Chain, build_complex
from coexact.homology import (HomologyError, betti_numbers, classify_cycle, homology_basis,
                              integer_invariant_factors, invariant_factors, is_boundary,
                              smith_normal_form)
from coexact.models import fixtures


def integer_det(M):
    """Fraction-free Bareiss elimination."""
    A = [list(row) for row in M]
    n = len(A)
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if A[r][k]), None)
            if swap is None:
                return 0
            A[k], A[swap] = A[swap], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[-1][-1] if n else 1


def determinantal_factors(A):
    """Invariant factors as ratios of gcds of k x k minors."""
    A = [[int(x) for x in row] for row in A]
    m, n = len(A), len(A[0])
    divisors = [1]
    for k in range(1, min(m, n) + 1):
        g = 0
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                g = math.gcd(g, integer_det([[A[r][c] for c in cols] for r in rows]))
        if g == 0:
            break
        divisors.append(g)
    return [divisors[k] // divisors[k - 1] for k in range(1, len(divisors))]


def matmul(A, B):
    return [[sum(a * b for a, b in zip(row, col)) for col in zip(*B)] for row in A]


def test_small_smith_form():
    U, S, V = smith_normal_form([[2, 4], [6, 8]])
    assert S == [[2, 0], [0, 4]]
    assert matmul(matmul(U, [[2, 4], [6, 8]]), V) == S


matrices = st.integers(1, 4).flatmap(lambda m: st.integers(1, 4).flatmap(
    lambda n: st.lists(st.lists(st.integers(-6, 6), min_size=n, max_size=n), min_size=m, max_size=m)))


@given(matrices)
def test_smith_form_against_minors(A):
    U, S, V = smith_normal_form(A)
    assert matmul(matmul(U, A), V) == S
    assert abs(integer_det(U)) == 1 and abs(integer_det(V)) == 1
    diag = [S[i][i] for i in range(min(len(S), len(S[0])))]
    off = [S[i][j] for i in range(len(S)) for j in range(len(S[0])) if i != j]
    assert not any(off)
    nonzero = [d for d in diag if d]
    assert all(d > 0 for d in nonzero)
    assert all(b % a == 0 for a, b in zip(nonzero, nonzero[1:]))
    assert nonzero == determinantal_factors(A)


@given(matrices)
def test_sparse_reduction_matches_dense(A):
    dense = [d for d in invariant_factors(A)]
    assert integer_invariant_factors(sp.csc_matrix(np.array(A, dtype=np.int64))) == dense


def test_projective_plane_torsion():
    cx = fixtures.projective_plane().complex
    assert integer_invariant_factors(cx.boundary(2))[-1] == 2
    H = homology_basis(cx)
    assert H.rank == 0 and H.torsion_orders == [2] and H.r_universal == 2
    core = Chain.edge_path(cx, fixtures.projective_plane_core_loop())
    assert classify_cycle(cx, H, core).order == 2
    assert is_boundary(cx, core, r=2) and not is_boundary(cx, core)


def test_octahedron_equator_is_a_boundary():
    cx = fixtures.octahedron().complex
    H = homology_basis(cx)
    cls = classify_cycle(cx, H, Chain.edge_path(cx, fixtures.octahedron_equator()))
    assert cls.is_boundary and cls.coords == ()


def test_torus_loop_has_infinite_order(torus3):
    md, H = torus3
    cx = md.complex
    assert H.betti == (1, 3, 3, 1)
    # vertex (i, 0, 0) has id 9 i on the 3-grid
    loop = Chain.edge_path(cx, [0, 9, 18, 0])
    cls = classify_cycle(cx, H, loop)
    assert cls.order == math.inf
    assert sorted(abs(c) for c in cls.coords) == [0, 0, 1]


def test_dual_basis_pairing(torus3):
    _, H = torus3
    pair = [[int(b.pair(c)) for c in H.cycles] for b in H.dual_cocycles]
    assert pair == np.eye(3, dtype=int).tolist()


def test_cocycles_vanish_on_boundaries(torus3):
    md, H = torus3
    d2 = md.complex.boundary(2)
    B = H.cocycle_matrix(md.complex.count(1))
    assert not (B @ d2).any()


@pytest.mark.parametrize("name, betti", [
    ("boundary_of_4_simplex", (1, 0, 0, 1)),
    ("octahedron", (1, 0, 1, 0)),
    ("torus_surface", (1, 2, 1, 0)),
    ("single_tetrahedron", (1, 0, 0, 0)),
])
def test_betti_numbers_and_euler_characteristic(name, betti):
    cx = getattr(fixtures, name)().complex
    b = betti_numbers(cx)
    assert b == betti
    assert b[0] - b[1] + b[2] - b[3] == cx.euler_characteristic


def test_classify_rejects_non_cycles():
    cx = fixtures.octahedron().complex
    H = homology_basis(cx)
    with pytest.raises(HomologyError):
        classify_cycle(cx, H, Chain.edge_path(cx, [0, 1, 2]))


def test_disconnected_complex():
    cx = build_complex(8, [(0, 1, 2), (0, 2, 3), (0, 1, 3), (1, 2, 3), (4, 5, 6), (4, 6, 7), (4, 5, 7),
                           (5, 6, 7)])
    assert betti_numbers(cx) == (2, 0, 2, 0)
