from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from polyrep.core import (center, random_interior_point, restrict, validate_game, vertex_point,
                          zero_game)
from polyrep.field import (GeneralizedScaling, ZeroScaling, chart_field, generalized_field,
                           incidence_matrix, vector_field)
from polyrep.poisson import jacobian_phi, phi, phi_inverse
from strategies import faces, games, prism_points, signatures, skew_games


def test_field_vanishes_at_example_equilibrium(ex1):
    G, _ = ex1
    v = vector_field(G, np.array(oracles.EX1_Q, dtype=object))
    assert all(c == 0 for c in v)


@given(games())
def test_field_vanishes_at_vertices(G):
    for s in G.signature.vertices():
        assert all(c == 0 for c in vector_field(G, vertex_point(G.signature, s)))


def test_field_at_center_matches_scalar_transcription(ex1):
    G, _ = ex1
    x = [Fraction(1, 2)] * 6
    expected = oracles.replicator_scalar(oracles.EX1_SIG, oracles.EX1_A, x)
    assert list(vector_field(G, np.array(x, dtype=object))) == expected
    assert np.allclose(vector_field(G, center(G.signature)), [float(v) for v in expected],
                       atol=1e-15)


@given(signatures().flatmap(lambda s: st.tuples(games(s), prism_points(s, False))))
def test_field_matches_scalar_transcription(args):
    G, x = args
    rows = [list(r) for r in G.payoff]
    assert list(vector_field(G, x)) == oracles.replicator_scalar(G.signature.parts, rows, list(x))


def test_single_population_and_bimatrix_special_cases():
    A = [[0, 2, -1], [-2, 0, 3], [1, -3, 0]]
    x = np.array([Fraction(1, 5), Fraction(3, 10), Fraction(1, 2)], dtype=object)
    Ax = [sum(A[i][j] * x[j] for j in range(3)) for i in range(3)]
    xAx = sum(x[i] * Ax[i] for i in range(3))
    assert list(vector_field(validate_game((3,), A), x)) == [x[i] * (Ax[i] - xAx) for i in range(3)]
    # bimatrix: zero diagonal blocks
    A12, A21 = [[1, -2], [0, 3]], [[2, 1], [-1, 4]]
    M = [[0, 0, *A12[0]], [0, 0, *A12[1]], [*A21[0], 0, 0], [*A21[1], 0, 0]]
    xs, ys = [Fraction(1, 3), Fraction(2, 3)], [Fraction(1, 4), Fraction(3, 4)]
    Ay = [sum(A12[i][j] * ys[j] for j in range(2)) for i in range(2)]
    Bx = [sum(A21[j][i] * xs[i] for i in range(2)) for j in range(2)]
    expect = [xs[i] * (Ay[i] - sum(xs[k] * Ay[k] for k in range(2))) for i in range(2)] + \
             [ys[j] * (Bx[j] - sum(ys[k] * Bx[k] for k in range(2))) for j in range(2)]
    got = vector_field(validate_game((2, 2), M), np.array(xs + ys, dtype=object))
    assert list(got) == expect


@given(signatures().flatmap(lambda s: st.tuples(games(s), prism_points(s, False))))
def test_tangency(args):
    G, x = args
    v = vector_field(G, x)
    for s in G.signature.slices:
        assert sum(v[s]) == 0
    vf = vector_field(G, x.astype(float))
    for s in G.signature.slices:
        assert abs(vf[s].sum()) <= 1e-12
    assert all(v[i] == 0 for i in range(len(x)) if x[i] == 0)


@given(signatures(max_part=4).flatmap(lambda s: st.tuples(games(s), faces(s), st.data())))
def test_face_inheritance(args):
    G, I, data = args
    sig = G.signature
    R = restrict(G, I)
    y = data.draw(prism_points(R.signature))
    x = np.array([Fraction(0)] * sig.n, dtype=object)
    x[list(I)] = y
    v = vector_field(G, x)
    assert list(v[list(I)]) == list(vector_field(R, y))
    assert all(v[i] == 0 for i in range(sig.n) if i not in I)


def test_chart_field_zero_cases(ex1):
    G, _ = ex1
    u = phi_inverse(G.signature, np.array([float(v) for v in oracles.EX1_Q]))
    assert np.max(np.abs(chart_field(G, u))) <= 1e-15
    Z = zero_game((3, 2))
    assert np.all(chart_field(Z, np.array([0.3, -1.0, 2.0])) == 0)


def test_chart_field_at_origin_pushes_forward(ex1):
    G, _ = ex1
    u = np.zeros(3)
    lhs = jacobian_phi(G.signature, u) @ chart_field(G, u)
    assert np.max(np.abs(lhs - vector_field(G, center(G.signature)))) <= 1e-10


@given(games(), st.integers(0, 2**32 - 1))
def test_chart_consistency(G, seed):
    sig = G.signature
    u = np.random.default_rng(seed).normal(size=sig.n - sig.p)
    lhs = jacobian_phi(sig, u) @ chart_field(G, u)
    assert np.max(np.abs(lhs - vector_field(G, phi(sig, u))), initial=0.0) <= 1e-10


def test_incidence_matrix_pattern():
    E = incidence_matrix((3, 2))
    assert E.tolist() == [[-1, 0, 1, 0, 0], [0, -1, 1, 0, 0], [0, 0, 0, -1, 1]]


def test_generalized_field_identity_scaling(rng):
    for _ in range(100):
        n = 6
        M = rng.normal(size=(n, n))
        G = validate_game((2, 2, 2), M - M.T)
        x = random_interior_point(G.signature, rng)
        Y = generalized_field(G, GeneralizedScaling.constant([1, 1, 1]), x)
        assert np.max(np.abs(Y - vector_field(G, x))) <= 1e-14


def test_generalized_field_constant_scaling_ex2(ex2, rng):
    G, _ = ex2
    G0 = validate_game(oracles.EX2_SIG, oracles.EX2_A0)
    sc = GeneralizedScaling.constant([-0.2, 1.0])
    for _ in range(100):
        x = random_interior_point(G.signature, rng)
        assert np.max(np.abs(generalized_field(G0, sc, x) - vector_field(G, x))) <= 1e-14


def test_maynard_smith_bimatrix(rng):
    A12 = rng.normal(size=(3, 2))
    A21 = rng.normal(size=(2, 3))
    M = np.zeros((5, 5))
    M[:3, 3:], M[3:, :3] = A12, A21

    def m1(z):
        return 1.0 + z[0] ** 2 + z[3]

    def m2(z):
        return 2.0 - z[1] * z[4]

    G = validate_game((3, 2), M)
    sc = GeneralizedScaling((m2, m1))
    for _ in range(100):
        z = random_interior_point(G.signature, rng)
        x, y = z[:3], z[3:]
        dx = x * (A12 @ y - x @ A12 @ y) * m1(z)
        dy = y * (A21 @ x - y @ A21 @ x) * m2(z)
        assert np.max(np.abs(generalized_field(G, sc, z) - np.r_[dx, dy])) <= 1e-14


def test_zero_scaling_is_rejected():
    G = zero_game((2, 2))
    sc = GeneralizedScaling((lambda x: 1.0, lambda x: x[0] - 0.5))
    with pytest.raises(ZeroScaling):
        generalized_field(G, sc, np.array([0.5, 0.5, 0.5, 0.5]))
