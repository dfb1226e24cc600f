from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polyrep.linalg import (NoSolution, matmul, min_norm_point, nullspace, proportional, rank,
                            rref, scale_last_nonzero, solve_linear_exact, to_fraction)
from strategies import matrices, small_rationals


def test_identity_system():
    b = [Fraction(1, 3), -2, 5]
    sol = solve_linear_exact(np.eye(3, dtype=int), b)
    assert list(sol.particular) == [Fraction(1, 3), -2, 5]
    assert sol.dimension == 0


def test_zero_system_has_full_nullspace():
    sol = solve_linear_exact([[0, 0, 0], [0, 0, 0]], [0, 0])
    assert list(sol.particular) == [0, 0, 0]
    assert sol.dimension == 3


def test_inconsistent_system_is_distinct_from_zero_solution():
    with pytest.raises(NoSolution):
        solve_linear_exact([[1, 1], [1, 1]], [0, 1])
    sol = solve_linear_exact([[1, 1], [1, -1]], [0, 0])
    assert list(sol.particular) == [0, 0] and sol.dimension == 0


def test_rref_known_matrix():
    R, piv = rref([[2, 4, 2], [1, 2, 3]])
    assert piv == [0, 2]
    assert R[0] == [1, 2, 0] and R[1] == [0, 0, 1]


def test_to_fraction_inputs():
    assert to_fraction("−9/8") == Fraction(-9, 8)
    assert to_fraction(0.5) == Fraction(1, 2)
    assert to_fraction(np.int64(3)) == 3


@given(st.integers(1, 5).flatmap(lambda m: st.tuples(
    st.integers(1, 5).flatmap(lambda n: matrices(n, m)), st.just(m))), st.data())
def test_solution_verified_by_substitution(Mm, data):
    M, m = Mm
    x = np.array(data.draw(st.lists(small_rationals, min_size=m, max_size=m)), dtype=object)
    b = matmul(M, x)
    sol = solve_linear_exact(M, b)
    assert all(v == 0 for v in matmul(M, sol.particular) - b)
    for v in sol.nullspace:
        assert all(c == 0 for c in matmul(M, v))
    assert sol.dimension + rank(M) == m


@given(st.integers(1, 5).flatmap(lambda n: matrices(n, 4)))
def test_nullspace_is_independent(M):
    basis = nullspace(M)
    if basis:
        assert rank(np.stack(basis)) == len(basis)


@given(st.integers(2, 4).flatmap(lambda n: matrices(1, n)))
def test_min_norm_point_is_orthogonal_to_nullspace(M):
    sol = solve_linear_exact(M, [1]) if any(v != 0 for v in M.ravel()) else None
    if sol is None:
        return
    p = min_norm_point(sol)
    assert all(v == 0 for v in matmul(M, p) - np.array([1], dtype=object))
    for v in sol.nullspace:
        assert sum(a * b for a, b in zip(p, v)) == 0


def test_scaling_helpers():
    v = scale_last_nonzero([Fraction(3), Fraction(-6), Fraction(0)], Fraction(-1))
    assert list(v) == [Fraction(1, 2), -1, 0]
    assert proportional([1, 2, 0], [-2, -4, 0])
    assert not proportional([1, 2, 0], [1, 2, 1])
    assert not proportional([0, 0], [0, 0])
