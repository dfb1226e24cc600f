from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

import oracles
from polyrep.conservative import (BlockConstantViolation, ConservativeDecomposition, DomainError,
                                  HamiltonianSpec, SkewViolation, ZeroBlockSum,
                                  detect_conservative, formal_equilibria,
                                  formal_equilibrium_defect, hamiltonian_identity_residual,
                                  is_formal_equilibrium, make_conservative,
                                  random_conservative_game, verify_conservative, xi_form)
from polyrep.core import (Signature, random_interior_point, to_model, validate_game, zero_game)
from polyrep.field import GeneralizedScaling, ZeroScaling, generalized_field, vector_field
from polyrep.linalg import NoSolution, proportional
from polyrep.poisson import BoundaryPoint, bivector, hamiltonian_field, sandwich_factor
from strategies import games, signatures


def _on_line(fe, point):
    """``point`` differs from the representative by a nullspace combination."""
    d = np.array(point, dtype=object) - fe.q
    if not fe.nullspace:
        return all(v == 0 for v in d)
    from polyrep.linalg import solve_linear_exact
    try:
        solve_linear_exact(np.stack(fe.nullspace).T, d)
    except NoSolution:
        return False
    return True


# -- formal equilibria -------------------------------------------------------

def test_ex1_formal_equilibria_line(ex1):
    G, _ = ex1
    fe = formal_equilibria(G)
    assert fe.dimension == 1 and fe.interior
    assert _on_line(fe, oracles.EX1_Q)
    d = to_model(G.signature, fe.nullspace[0])
    assert proportional(d, oracles.EX1_DIRECTION)


def test_ex2_formal_equilibria_line(ex2):
    G, _ = ex2
    fe = formal_equilibria(G)
    assert fe.dimension == 1 and not fe.interior
    assert _on_line(fe, [Fraction(-9, 2), 8, Fraction(-5, 2), 0, 1])
    assert proportional(to_model(G.signature, fe.nullspace[0]), oracles.EX2_DIRECTION)
    assert is_formal_equilibrium(G, fe.q)


def test_zero_game_has_every_balanced_point():
    for parts in [(3, 2), (1, 1), (4,), (2, 3, 1)]:
        sig = Signature(parts)
        fe = formal_equilibria(zero_game(sig))
        assert fe.dimension == sig.n - sig.p
        assert fe.interior
        assert all(sum(fe.q[s]) == 1 for s in sig.slices)


@given(games())
def test_formal_equilibria_satisfy_conditions(G):
    try:
        fe = formal_equilibria(G)
    except NoSolution:
        return
    assert formal_equilibrium_defect(G, fe.q) == 0
    sig = G.signature
    for v in fe.nullspace:
        Av = G.payoff @ v
        for s in sig.slices:
            assert len(set(Av[s])) == 1 and sum(v[s]) == 0


# -- decompositions ----------------------------------------------------------

def test_examples_verify(ex1, ex2):
    for (G, dec), lam in ((ex1, oracles.EX1_LAMBDA), (ex2, oracles.EX2_LAMBDA)):
        assert tuple(dec.lam) == lam
        assert verify_conservative(G, dec).ok
    G, dec = ex1
    assert list(dec.q) == oracles.EX1_Q
    assert (G.payoff == np.array(oracles.EX1_A, dtype=object)).all()
    G, dec = ex2
    assert (G.payoff == np.array(oracles.EX2_A, dtype=object)).all()


def test_verify_rejections(ex1):
    G, dec = ex1
    zero = ConservativeDecomposition(dec.A0, (dec.lam[0], 0, dec.lam[2]), dec.q)
    assert verify_conservative(G, zero).reason == "ZeroScaling"
    A0 = np.array(dec.A0)
    A0[0, 1] += 1
    assert verify_conservative(G, ConservativeDecomposition(A0, dec.lam, dec.q)).reason == "SkewViolation"
    off = ConservativeDecomposition(dec.A0, (1, 1, 1), dec.q)
    assert verify_conservative(G, off).reason == "NotEquivalent"
    q = np.array(dec.q)
    q[0], q[1] = q[1], q[0]
    v = verify_conservative(G, ConservativeDecomposition(dec.A0, dec.lam, q))
    assert v.reason == "NotFormalEquilibrium" and not v
    short = ConservativeDecomposition(dec.A0, dec.lam[:2], dec.q)
    assert verify_conservative(G, short).reason == "DimensionMismatch"


def test_verify_float_inputs(ex2):
    G, dec = ex2
    Gf = validate_game(G.signature, G.A)
    cand = ConservativeDecomposition(np.array(dec.A0, dtype=float), tuple(float(v) for v in dec.lam),
                                     dec.q.astype(float))
    v = verify_conservative(Gf, cand)
    assert v.ok and max(v.residuals.values()) <= 1e-12


def test_make_conservative_trivial_and_errors():
    G, dec = make_conservative(np.zeros((3, 3), dtype=int), (2, 1), [1, 1, 2])
    assert (G.payoff == 0).all() and tuple(dec.lam) == (2, 2)
    assert list(dec.q) == [Fraction(1, 2), Fraction(1, 2), 1]
    with pytest.raises(SkewViolation):
        make_conservative([[0, 1], [0, 0]], (2,), [1, 1])
    with pytest.raises(BlockConstantViolation):
        make_conservative([[0, 1], [-1, 0]], (2,), [1, 2])
    with pytest.raises(ZeroBlockSum):
        make_conservative(np.zeros((2, 2), dtype=int), (2,), [1, -1])


def test_detect_examples(ex1, ex2):
    for (G, dec) in (ex1, ex2):
        found = detect_conservative(G)
        assert found
        assert proportional(found.lam, dec.lam)
        assert verify_conservative(G, found).ok


def test_detect_ex1_normalized_scaling(ex1):
    found = detect_conservative(ex1[0])
    assert tuple(found.lam) == (1, Fraction(9, 10), Fraction(4, 5))


def test_detect_rejects_self_interaction():
    A = np.zeros((4, 4), dtype=int)
    A[0, 0] = 1
    res = detect_conservative(validate_game((2, 2), A))
    assert not res and isinstance(res.reason, str)


def test_detect_random_conservative_games(rng):
    for k in range(20):
        sig = [(2, 2), (3, 2), (2, 2, 2), (3, 3), (2, 3, 2)][k % 5]
        G, dec = random_conservative_game(sig, rng)
        assert verify_conservative(G, dec).ok
        found = detect_conservative(G)
        assert found and verify_conservative(G, found).ok


def test_detect_survives_equivalence(ex2):
    from polyrep.core import row_constant_blocks
    G, dec = ex2
    rows = [[[Fraction(1, 3)] * 3, [2, 2]], [[-1] * 3, [Fraction(5, 7)] * 2]]
    H = G.with_payoff(G.payoff + row_constant_blocks(G.signature, rows))
    found = detect_conservative(H)
    assert found and proportional(found.lam, dec.lam)


# -- Hamiltonian -------------------------------------------------------------

def test_hamiltonian_single_population_center():
    for n in (2, 3, 5):
        spec = HamiltonianSpec(Signature((n,)), np.full(n, 1 / n), (1,))
        assert spec.value(np.full(n, 1 / n)) == pytest.approx(np.log(1 / n), abs=1e-15)


def test_hamiltonian_ex1_at_equilibrium(ex1):
    G, dec = ex1
    q = [float(v) for v in oracles.EX1_Q]
    lam = [2.5, 2.5, 2.25, 2.25, 2.0, 2.0]
    expected = sum(lam[j] * q[j] * np.log(q[j]) for j in range(6))
    assert dec.hamiltonian(G.signature).value(np.array(q)) == pytest.approx(expected, abs=1e-14)


def test_hamiltonian_gradient_matches_fd(ex1, rng):
    G, dec = ex1
    spec = dec.hamiltonian(G.signature)
    for _ in range(50):
        x = random_interior_point(G.signature, rng)
        fd = oracles.central_difference_gradient(spec.value, x)
        g = spec.gradient(x)
        # near a face the gradient grows like 1/x_j, so scale the error by it
        assert np.max(np.abs(fd - g) / np.maximum(1.0, np.abs(g))) <= 1e-6


def test_hamiltonian_domain():
    spec = HamiltonianSpec(Signature((2,)), np.array([0.5, 0.5]), (1,))
    with pytest.raises(DomainError):
        spec.value(np.array([1.0, 0.0]))
    zero_weight = HamiltonianSpec(Signature((2,)), np.array([1.0, 0.0]), (1,))
    assert zero_weight.value(np.array([1.0, 0.0])) == 0.0


# -- xi and Hamiltonian identities -------------------------------------------

def test_xi_constant_scaling_is_gradient(ex1, rng):
    G, dec = ex1
    spec = dec.hamiltonian(G.signature)
    sc = GeneralizedScaling.constant([float(v) for v in dec.lam])
    for _ in range(20):
        x = random_interior_point(G.signature, rng)
        assert np.max(np.abs(xi_form(dec.q, sc, x, G.signature) - spec.gradient(x))) <= 1e-14


def test_generalized_field_is_pi_xi_constant_scaling(ex1, rng):
    G, dec = ex1
    G0 = dec.model_game(G.signature)
    sc = GeneralizedScaling.constant([2.5, 2.25, 2.0])
    for _ in range(50):
        x = random_interior_point(G0.signature, rng)
        rhs = bivector(G0, x) @ xi_form(dec.q, sc, x, G0.signature)
        assert np.max(np.abs(generalized_field(G0, sc, x) - rhs)) <= 1e-11


def test_variable_scaling_leaves_a_correction_term(ex1, rng):
    # pi xi = Y + M A D(x) q; the extra term is nonzero for this game
    G, dec = ex1
    G0 = dec.model_game(G.signature)
    sig = G0.signature
    sc = GeneralizedScaling((lambda x: 2.0 + x[0], lambda x: 2.25, lambda x: 2.0))
    q = dec.q.astype(float)
    worst = 0.0
    for _ in range(50):
        x = random_interior_point(sig, rng)
        Y = generalized_field(G0, sc, x)
        pixi = bivector(G0, x) @ xi_form(q, sc, x, sig)
        d = np.repeat(sc(x), sig.parts)
        extra = sandwich_factor(sig, x) @ G0.A @ (d * q)
        assert np.max(np.abs(Y + extra - pixi)) <= 1e-11
        worst = max(worst, np.max(np.abs(Y - pixi)))
    assert worst > 1e-3


def test_variable_scaling_single_population(rng):
    A = [[0, 1, -2], [-1, 0, 3], [2, -3, 0]]
    G = validate_game((3,), A)
    q = formal_equilibria(G).q
    sc = GeneralizedScaling((lambda x: 1.0 + x[0] ** 2,))
    for _ in range(50):
        x = random_interior_point(G.signature, rng)
        rhs = bivector(G, x) @ xi_form(q, sc, x, G.signature)
        assert np.max(np.abs(generalized_field(G, sc, x) - rhs)) <= 1e-11


def test_xi_refusals():
    sig = Signature((2,))
    with pytest.raises(BoundaryPoint):
        xi_form([0.5, 0.5], GeneralizedScaling.constant([1.0]), [1.0, 0.0], sig)
    with pytest.raises(ZeroScaling):
        xi_form([0.5, 0.5], GeneralizedScaling.constant([0.0]), [0.5, 0.5], sig)


@given(signatures(max_part=3).flatmap(games), st.integers(0, 2**32 - 1))
def test_gradient_identity_for_any_game_with_formal_equilibrium(G, seed):
    try:
        q = formal_equilibria(G).q
    except NoSolution:
        assume(False)
    x = random_interior_point(G.signature, np.random.default_rng(seed))
    grad = np.asarray(q, dtype=float) / x
    assert np.max(np.abs(vector_field(G, x) - bivector(G, x) @ grad)) <= 1e-11


def test_hamiltonian_identity_examples(ex1, ex2, rng):
    for G, dec in (ex1, ex2):
        for _ in range(50):
            x = random_interior_point(G.signature, rng)
            assert hamiltonian_identity_residual(G, dec, x) <= 1e-11


def test_hamiltonian_field_matches_replicator(ex1, rng):
    G, dec = ex1
    G0 = dec.model_game(G.signature)
    spec = dec.hamiltonian(G.signature)
    for _ in range(20):
        x = random_interior_point(G.signature, rng)
        assert np.max(np.abs(hamiltonian_field(G0, spec.gradient(x), x) - vector_field(G, x))) <= 1e-11


def test_hamiltonian_constant_along_field(ex1, ex2, rng):
    for G, dec in (ex1, ex2):
        spec = dec.hamiltonian(G.signature)
        for _ in range(50):
            x = random_interior_point(G.signature, rng)
            assert abs(spec.gradient(x) @ vector_field(G, x)) <= 1e-10
