"""Formal equilibria, conservative decompositions and the Hamiltonian.

A game is conservative when it has a formal equilibrium and its payoff is
equivalent to ``A0 D`` with ``A0`` skew-symmetric and ``D`` a nonzero
per-group scaling. For such games the replicator field is the Hamiltonian
field of ``H(x) = sum_b lam_b sum_{j in b} q_j log x_j`` w.r.t. ``pi_{A0}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from . import linalg
from .core import (FLOAT_TOL, DimensionMismatch, PolymatrixGame, Signature,
                   as_signature, canonical_form, is_interior, is_skew, random_skew_rational,
                   row_constant_blocks, validate_game)
from .field import GeneralizedScaling, ZeroScaling
from .linalg import LinearSolution, NoSolution
from .poisson import BoundaryPoint


class SkewViolation(ValueError):
    pass


class BlockConstantViolation(ValueError):
    pass


class ZeroBlockSum(ValueError):
    pass


class DomainError(ValueError):
    """Hamiltonian requested where a needed coordinate is not positive."""


# -- formal equilibria ------------------------------------------------------


@dataclass(frozen=True)
class FormalEquilibrium:
    """A representative ``q`` and a basis of directions of the full solution set."""

    q: np.ndarray
    nullspace: tuple[np.ndarray, ...]
    signature: Signature

    @property
    def interior(self) -> bool:
        return is_interior(self.q)

    @property
    def dimension(self) -> int:
        return len(self.nullspace)


def formal_equilibrium_system(G: PolymatrixGame) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``A_i - A_{i+1}`` within each group, then one block-sum row per group."""
    sig = G.signature
    A = G.payoff if G.exact else linalg.fraction_array(G.payoff)
    rows, rhs = [], []
    for s in sig.slices:
        for i in range(s.start, s.stop - 1):
            rows.append(A[i] - A[i + 1])
            rhs.append(Fraction(0))
    for s in sig.slices:
        r = np.array([Fraction(0)] * sig.n, dtype=object)
        r[s] = Fraction(1)
        rows.append(r)
        rhs.append(Fraction(1))
    return np.array(rows, dtype=object), np.array(rhs, dtype=object)


def _interior_point(sol: LinearSolution) -> np.ndarray | None:
    """Exact point of the affine solution set with all coordinates > 0, if any.

    Maximizes the smallest coordinate with an LP, rounds the LP parameters to
    rationals and confirms positivity exactly.
    """
    if is_interior(sol.particular):
        return sol.particular.copy()
    if not sol.nullspace:
        return None
    q0 = sol.particular.astype(float)
    N = np.stack(sol.nullspace, axis=1)
    Nf = N.astype(float)
    k = Nf.shape[1]
    # variables (y, t): maximize t subject to q0 + N y >= t, t <= 1
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-Nf, np.ones((len(q0), 1))])
    bounds = [(None, None)] * k + [(None, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=q0, bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] <= 1e-12:
        return None
    y = res.x[:k]
    for den in (10, 100, 10**4, 10**8):
        yr = np.array([Fraction(v).limit_denominator(den) for v in y], dtype=object)
        q = sol.particular + linalg.matmul(N, yr)
        if is_interior(q):
            return q
    return None


def formal_equilibria(G: PolymatrixGame) -> FormalEquilibrium:
    """Solve for formal equilibria exactly.

    The representative is a strictly positive solution when one exists,
    otherwise the minimum-norm solution. Raises :class:`NoSolution` when the
    system is inconsistent.
    """
    M, b = formal_equilibrium_system(G)
    sol = linalg.solve_linear_exact(M, b)
    q = _interior_point(sol)
    if q is None:
        q = linalg.min_norm_point(sol)
    return FormalEquilibrium(q, sol.nullspace, G.signature)


def is_formal_equilibrium(G: PolymatrixGame, q, tol: float = FLOAT_TOL) -> bool:
    return formal_equilibrium_defect(G, q) <= (0 if G.exact and _exact(q) else tol)


def formal_equilibrium_defect(G: PolymatrixGame, q):
    """Largest violation of block-constant ``A q`` and unit block sums."""
    sig = G.signature
    q = np.asarray(q)
    exact = G.exact and _exact(q)
    A = G.payoff if exact else G.A
    q = q if exact else q.astype(float)
    Aq = np.dot(A, q)
    worst = Fraction(0) if exact else 0.0
    for s in sig.slices:
        vals = Aq[s]
        worst = max(worst, max(vals) - min(vals), abs(sum(q[s]) - 1))
    return worst


def _exact(v) -> bool:
    return np.asarray(v).dtype == object


# -- decompositions ---------------------------------------------------------


@dataclass(frozen=True)
class ConservativeDecomposition:
    """Skew model ``A0``, scaling vector ``lam`` and formal equilibrium ``q``.

    ``adjusters[a][b]`` is the common row of block ``(a, b)`` of
    ``A - A0 D``.
    """

    A0: np.ndarray
    lam: tuple
    q: np.ndarray
    adjusters: tuple = field(default=())

    @property
    def p(self) -> int:
        return len(self.lam)

    def D(self, signature) -> np.ndarray:
        sig = as_signature(signature)
        d = [lam for lam, k in zip(self.lam, sig.parts) for _ in range(k)]
        out = np.array([[Fraction(0)] * sig.n for _ in range(sig.n)], dtype=object)
        for i, v in enumerate(d):
            out[i, i] = v
        return out

    def scaling_diagonal(self, signature) -> np.ndarray:
        return np.repeat(np.array([float(v) for v in self.lam]), as_signature(signature).parts)

    def hamiltonian(self, signature) -> "HamiltonianSpec":
        return HamiltonianSpec(as_signature(signature), self.q, tuple(self.lam))

    def model_game(self, signature) -> PolymatrixGame:
        """The skew game ``(n, A0)`` carrying the Poisson structure."""
        return validate_game(signature, self.A0, exact=_exact(self.A0))


@dataclass(frozen=True)
class NotConservative:
    """Negative detection result; falsy."""

    reason: str

    def __bool__(self):
        return False


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str | None
    residuals: dict

    def __bool__(self):
        return self.ok


def verify_conservative(G: PolymatrixGame, cand: ConservativeDecomposition,
                        tol: float = FLOAT_TOL) -> Verdict:
    """Check a candidate decomposition. Exact when all inputs are exact.

    Conditions, in order: ``A0`` skew, every scaling nonzero, ``A - A0 D``
    row-constant on blocks, ``q`` a formal equilibrium of ``G``.
    """
    sig = G.signature
    A0 = np.asarray(cand.A0)
    if A0.shape != (sig.n, sig.n) or len(cand.lam) != sig.p or np.shape(cand.q) != (sig.n,):
        return Verdict(False, "DimensionMismatch", {})
    exact = G.exact and _exact(A0) and _exact(cand.q) and all(
        isinstance(v, (int, Fraction)) for v in cand.lam)
    if exact:
        skew_res = max((abs(v) for v in (A0 + A0.T).ravel()), default=Fraction(0))
        R = G.payoff - linalg.matmul(A0, cand.D(sig))
        Rg = validate_game(sig, R)
        equiv_res = max((abs(v) for v in canonical_form(Rg).ravel()), default=Fraction(0))
        eq_res = formal_equilibrium_defect(G, cand.q)
        limit = 0
    else:
        A0f = A0.astype(float)
        skew_res = float(np.max(np.abs(A0f + A0f.T), initial=0.0))
        R = G.A - A0f * cand.scaling_diagonal(sig)[None, :]
        Rg = validate_game(sig, R.astype(float))
        equiv_res = float(np.max(np.abs(canonical_form(Rg).astype(float)), initial=0.0))
        eq_res = float(formal_equilibrium_defect(validate_game(sig, G.A), np.asarray(cand.q, dtype=float)))
        limit = tol
    residuals = {"skew": skew_res, "equivalence": equiv_res, "equilibrium": eq_res}
    if skew_res > limit:
        return Verdict(False, "SkewViolation", residuals)
    if any(v == 0 for v in cand.lam):
        return Verdict(False, "ZeroScaling", residuals)
    if equiv_res > limit:
        return Verdict(False, "NotEquivalent", residuals)
    if eq_res > limit:
        return Verdict(False, "NotFormalEquilibrium", residuals)
    return Verdict(True, None, residuals)


def make_conservative(A0, signature, qtilde) -> tuple[PolymatrixGame, ConservativeDecomposition]:
    """Build the conservative game ``(n, A0 D)`` from a skew model and a point.

    ``A0 qtilde`` must be constant on each block; the scalings are the block
    sums of ``qtilde`` and the formal equilibrium is ``D^{-1} qtilde``.
    """
    sig = as_signature(signature)
    A0 = linalg.fraction_array(A0)
    qt = linalg.fraction_array(qtilde).reshape(-1)
    if A0.shape != (sig.n, sig.n) or qt.shape != (sig.n,):
        raise DimensionMismatch(f"A0 {A0.shape}, qtilde {qt.shape}, signature {sig}")
    if not is_skew(A0):
        raise SkewViolation("A0 is not skew-symmetric")
    Aq = linalg.matmul(A0, qt)
    for a, s in enumerate(sig.slices):
        if any(v != Aq[s.start] for v in Aq[s]):
            raise BlockConstantViolation(f"A0 qtilde is not constant on group {a + 1}")
    lam = tuple(sum(qt[s], Fraction(0)) for s in sig.slices)
    zero = [a for a, v in enumerate(lam) if v == 0]
    if zero:
        raise ZeroBlockSum(f"qtilde sums to zero on group {zero[0] + 1}")
    d = np.repeat(np.array(lam, dtype=object), sig.parts)
    A = A0 * d[None, :]
    q = qt / d
    G = validate_game(sig, A)
    zero_rows = tuple(tuple(tuple(Fraction(0) for _ in range(kb)) for kb in sig.parts)
                      for _ in sig.parts)
    return G, ConservativeDecomposition(A0, lam, np.array(q, dtype=object), zero_rows)


def random_conservative_game(signature, rng: np.random.Generator, max_tries: int = 100,
                             **skew_kwargs) -> tuple[PolymatrixGame, ConservativeDecomposition]:
    """Random exact conservative game from a random skew model.

    ``qtilde`` is a random integer combination of the solutions of
    ``A0 qtilde`` block-constant; draws with a zero block sum are rejected.
    """
    sig = as_signature(signature)
    for _ in range(max_tries):
        A0 = random_skew_rational(sig.n, rng, **skew_kwargs)
        M, _ = formal_equilibrium_system(validate_game(sig, A0))
        basis = linalg.nullspace(M[:sig.n - sig.p]) if sig.n > sig.p else \
            [np.eye(sig.n, dtype=int)[i].astype(object) for i in range(sig.n)]
        qt = sum((int(rng.integers(-3, 4)) * v for v in basis),
                 np.array([Fraction(0)] * sig.n, dtype=object))
        if any(sum(qt[s]) == 0 for s in sig.slices):
            continue
        return make_conservative(A0, sig, qt)
    raise RuntimeError("could not draw a conservative game")


def _detection_system(G: PolymatrixGame):
    """Linear map in unknowns ``(mu, d^{ab})`` encoding ``A ~ A0 D``.

    For every pair ``a <= b`` and ``(i, j)`` in ``a x b``:
    ``mu_b A_ij + mu_a A_ji - d^{ab}_j - d^{ba}_i = 0``.
    Returns the coefficient matrix split into its ``mu`` columns and its
    ``d`` columns, and the ``d`` column offsets.
    """
    sig = G.signature
    p, n = sig.p, sig.n
    A = G.payoff
    d_off = {}
    pos = 0
    for a, b in itertools.product(range(p), repeat=2):
        d_off[a, b] = pos
        pos += sig.parts[b]
    rows_mu, rows_d = [], []
    for a in range(p):
        for b in range(a, p):
            sa, sb = sig.slices[a], sig.slices[b]
            for i in range(sa.start, sa.stop):
                for j in range(sb.start, sb.stop):
                    if a == b and j < i:
                        continue
                    rm = [Fraction(0)] * p
                    rm[b] += A[i, j]
                    rm[a] += A[j, i]
                    rd = [Fraction(0)] * pos
                    rd[d_off[a, b] + j - sb.start] -= 1
                    rd[d_off[b, a] + i - sa.start] -= 1
                    rows_mu.append(rm)
                    rows_d.append(rd)
    return (np.array(rows_mu, dtype=object).reshape(-1, p),
            np.array(rows_d, dtype=object).reshape(-1, pos), d_off)


def _nonvanishing_candidates(basis: list[np.ndarray]):
    """Combinations of ``basis`` tried in order: members, pairwise sums, moment curve."""
    k = len(basis)
    yield from basis
    for i, j in itertools.combinations(range(k), 2):
        yield basis[i] + basis[j]
    p = len(basis[0])
    # a nonzero polynomial of degree < k has < k roots, so p*k + 1 values suffice
    for t in range(1, p * k + 2):
        yield sum((Fraction(t) ** e * v for e, v in enumerate(basis)),
                  np.array([Fraction(0)] * p, dtype=object))


def detect_conservative(G: PolymatrixGame) -> ConservativeDecomposition | NotConservative:
    """Search for a conservative decomposition of an exact game.

    The bilinear conditions become linear in ``mu_a = 1 / lam_a`` and
    ``d^{ab} = mu_b c^{ab}``. A solution with every ``mu`` nonzero gives the
    decomposition; it is reported with ``lam_1 = 1``.
    """
    if not G.exact:
        G = validate_game(G.signature, G.payoff, exact=True)
    sig = G.signature
    Mmu, Md, d_off = _detection_system(G)
    full = np.concatenate([Mmu, Md], axis=1)
    null = linalg.nullspace(full) if full.shape[0] else [
        np.array([Fraction(int(i == j)) for i in range(full.shape[1])], dtype=object)
        for j in range(full.shape[1])]
    mu_vectors = [v[:sig.p] for v in null]
    R, pivots = linalg.rref(np.array(mu_vectors, dtype=object)) if mu_vectors else ([], [])
    mu_basis = [np.array(r, dtype=object) for r in R[:len(pivots)]]
    if not mu_basis:
        return NotConservative("scaling equations force every mu to zero")
    if any(all(v[a] == 0 for v in mu_basis) for a in range(sig.p)):
        return NotConservative("some scaling is forced to vanish")
    mu = next(c for c in _nonvanishing_candidates(mu_basis) if all(v != 0 for v in c))
    mu = mu / mu[0]
    # with mu fixed, solve for the d unknowns (free ones set to zero)
    rhs = -linalg.matmul(Mmu, mu)
    try:
        dsol = linalg.solve_linear_exact(Md, rhs).particular
    except NoSolution:  # cannot happen: mu came from the joint nullspace
        return NotConservative("adjuster system inconsistent")
    lam = tuple(1 / m for m in mu)
    rows = []
    for a in range(sig.p):
        rows.append(tuple(tuple(dsol[d_off[a, b] + j] / mu[b] for j in range(sig.parts[b]))
                          for b in range(sig.p)))
    C = row_constant_blocks(sig, rows)
    mu_diag = np.repeat(np.array(mu, dtype=object), sig.parts)
    A0 = (G.payoff - C) * mu_diag[None, :]
    if not is_skew(A0):
        return NotConservative("reconstructed model is not skew-symmetric")
    try:
        fe = formal_equilibria(G)
    except NoSolution:
        return NotConservative("no formal equilibrium")
    return ConservativeDecomposition(A0, lam, fe.q, tuple(rows))


# -- Hamiltonian ------------------------------------------------------------


@dataclass(frozen=True)
class HamiltonianSpec:
    """``H(x) = sum_b lam_b sum_{j in b} q_j log x_j`` and its gradient."""

    signature: Signature
    q: np.ndarray
    lam: tuple

    @property
    def weights(self) -> np.ndarray:
        """Per-coordinate weight ``lam_b q_j``."""
        lam = np.repeat(np.array([float(v) for v in self.lam]), self.signature.parts)
        return lam * np.asarray(self.q, dtype=float)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.signature.n,):
            raise DimensionMismatch(f"point has shape {x.shape}, expected ({self.signature.n},)")
        bad = (x <= 0) & (self.weights != 0)
        if np.any(bad):
            raise DomainError(f"coordinate {int(np.flatnonzero(bad)[0]) + 1} must be positive")
        return x

    def value(self, x) -> float:
        x = self._check(x)
        w = self.weights
        nz = w != 0
        return float(np.sum(w[nz] * np.log(x[nz])))

    def value_from_log(self, logx) -> float:
        w = self.weights
        nz = w != 0
        return float(np.sum(w[nz] * np.asarray(logx, dtype=float)[nz]))

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        w = self.weights
        out = np.zeros_like(x)
        nz = w != 0
        out[nz] = w[nz] / x[nz]
        return out


def hamiltonian(spec: HamiltonianSpec, x) -> float:
    return spec.value(x)


def hamiltonian_gradient(spec: HamiltonianSpec, x) -> np.ndarray:
    return spec.gradient(x)


def xi_form(q, scaling: GeneralizedScaling, x, signature) -> np.ndarray:
    """Covector with components ``lam_a(x) q_j / x_j`` for ``j`` in group ``a``."""
    sig = as_signature(signature)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise BoundaryPoint("xi needs an interior point")
    lam = scaling.diagonal(sig, x)  # raises ZeroScaling
    return lam * np.asarray(q, dtype=float) / x


def hamiltonian_identity_residual(G: PolymatrixGame, dec: ConservativeDecomposition, x) -> float:
    """``max |X_G(x) - pi_{A0}(x) grad H(x)|`` at an interior point."""
    from .field import vector_field
    from .poisson import bivector
    sig = G.signature
    model = dec.model_game(sig)
    grad = dec.hamiltonian(sig).gradient(x)
    return float(np.max(np.abs(vector_field(G, np.asarray(x, dtype=float))
                               - bivector(model, np.asarray(x, dtype=float)) @ grad)))


__all__ = [
    "BlockConstantViolation", "ConservativeDecomposition", "DomainError",
    "FormalEquilibrium", "HamiltonianSpec", "NotConservative", "SkewViolation",
    "Verdict", "ZeroBlockSum", "ZeroScaling", "detect_conservative",
    "formal_equilibria", "formal_equilibrium_defect", "hamiltonian",
    "hamiltonian_gradient", "hamiltonian_identity_residual",
    "is_formal_equilibrium", "make_conservative", "random_conservative_game",
    "verify_conservative",
    "xi_form",
]
