import numpy as np
import pytest
from hypothesis import given, strategies as st

from coexact.lp import highs, simplex, solve_ilp, solve_lp


@st.composite
def problems(draw):
    m = draw(st.integers(1, 5))
    n = draw(st.integers(m, 9))
    seed = draw(st.integers(0, 2 ** 31))
    rng = np.random.default_rng(seed)
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    kind = draw(st.sampled_from(["feasible", "any", "free_cost"]))
    if kind == "any":
        b = rng.integers(-5, 6, size=m).astype(float)
    else:
        b = A @ rng.integers(0, 3, size=n)
    c = rng.integers(0 if kind != "free_cost" else -3, 5, size=n).astype(float)
    return c, A, b


@given(problems())
def test_simplex_agrees_with_highs(problem):
    c, A, b = problem
    ours, ref = simplex(c, A, b), highs(c, A, b)
    assert ours.status == ref.status
    if ref.status == "optimal":
        assert np.isclose(ours.fun, ref.fun, atol=1e-7)
        assert np.allclose(A @ ours.x, b, atol=1e-7)
        assert (ours.x >= 0).all()


def test_degenerate_problem_terminates():
    # a classic example on which the largest-coefficient rule cycles
    c = np.array([0, 0, 0, -0.75, 150, -0.02, 6])
    A = np.array([[1, 0, 0, 0.25, -60, -0.04, 9],
                  [0, 1, 0, 0.5, -90, -0.02, 3],
                  [0, 0, 1, 0, 0, 1, 0]])
    b = np.array([0, 0, 1.0])
    res = simplex(c, A, b)
    assert res.status == "optimal"
    assert np.isclose(res.fun, -0.05)


def test_infeasible_and_unbounded():
    A = np.array([[1.0, 1.0]])
    assert simplex([1, 1], A, [-1]).status == "infeasible"
    assert simplex([-1, 0], np.array([[1.0, -1.0]]), [0]).status == "unbounded"


def test_backend_dispatch():
    A = np.array([[1.0, 1.0, 1.0]])
    for backend in ("simplex", "highs", "auto"):
        assert np.isclose(solve_lp([3, 1, 2], A, [2], backend=backend).fun, 2.0)
    with pytest.raises(ValueError):
        solve_lp([1], np.ones((1, 1)), [1], backend="dense")


def test_integer_program_rounds_up():
    # the relaxation takes x1 = x2 = 1/2; integers force x3 = 1
    A = np.array([[2.0, 0, 1], [0, 2.0, 1]])
    b = np.array([1.0, 1.0])
    c = np.array([1.0, 1.0, 3.0])
    lp, ilp = simplex(c, A, b), solve_ilp(c, A, b)
    assert np.isclose(lp.fun, 1.0) and np.isclose(ilp.fun, 3.0)
