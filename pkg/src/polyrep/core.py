"""Signatures, polymatrix games and the algebra on them.

Indices are 0-based throughout the Python API. File formats and the CLI use
1-based strategy numbers and convert at the boundary.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .linalg import fraction_array, to_fraction

#: entrywise tolerance for structural predicates on float matrices
FLOAT_TOL = 1e-12


class GameError(ValueError):
    """Base class for malformed game data."""


class DimensionMismatch(GameError):
    pass


class EmptyGroup(GameError):
    pass


class SignatureMismatch(GameError):
    pass


class InvalidFace(GameError):
    pass


class NotVertex(GameError):
    pass


@dataclass(frozen=True)
class Signature:
    """Strategy counts ``(n_1, ..., n_p)`` of the groups."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(k) for k in self.parts)
        if not parts:
            raise EmptyGroup("signature needs at least one group")
        bad = [a for a, k in enumerate(parts) if k < 1]
        if bad:
            raise EmptyGroup(f"group {bad[0] + 1} has {parts[bad[0]]} strategies")
        object.__setattr__(self, "parts", parts)

    @property
    def p(self) -> int:
        return len(self.parts)

    @property
    def n(self) -> int:
        return sum(self.parts)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        """Start index of every group, plus ``n`` as a sentinel."""
        return tuple(itertools.accumulate(self.parts, initial=0))

    @cached_property
    def slices(self) -> tuple[slice, ...]:
        o = self.offsets
        return tuple(slice(o[a], o[a + 1]) for a in range(self.p))

    @cached_property
    def groups(self) -> np.ndarray:
        """Group label of each strategy."""
        return np.repeat(np.arange(self.p), self.parts)

    def group_of(self, i: int) -> int:
        return int(self.groups[i])

    def last_indices(self) -> list[int]:
        return [s.stop - 1 for s in self.slices]

    def vertices(self) -> Iterable[tuple[int, ...]]:
        """All vertices of the prism, as one supporting strategy per group."""
        return itertools.product(*(range(s.start, s.stop) for s in self.slices))

    def __str__(self):
        return "(" + ",".join(map(str, self.parts)) + ")"


def as_signature(sig) -> Signature:
    return sig if isinstance(sig, Signature) else Signature(tuple(sig))


def _is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


@dataclass(frozen=True, eq=False)
class PolymatrixGame:
    """A signature together with an ``n x n`` payoff matrix.

    ``payoff`` is an object array of Fractions when the game is exact, or a
    float64 array otherwise. Use :func:`validate_game` to construct one from
    raw data.
    """

    signature: Signature
    payoff: np.ndarray

    @property
    def exact(self) -> bool:
        return _is_exact(self.payoff)

    @property
    def n(self) -> int:
        return self.signature.n

    @cached_property
    def A(self) -> np.ndarray:
        """Payoff as float64 (for the numerical code paths)."""
        a = np.array(self.payoff, dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def skew(self) -> bool:
        """Exactly skew-symmetric payoff (no tolerance)."""
        return bool(np.all(self.payoff == -self.payoff.T))

    def block(self, a: int, b: int) -> np.ndarray:
        s = self.signature.slices
        return self.payoff[s[a], s[b]]

    def with_payoff(self, payoff) -> "PolymatrixGame":
        return validate_game(self.signature, payoff)

    def __eq__(self, other):
        if not isinstance(other, PolymatrixGame):
            return NotImplemented
        return (self.signature == other.signature
                and self.payoff.shape == other.payoff.shape
                and bool(np.all(self.payoff == other.payoff)))

    def __hash__(self):
        return hash((self.signature, tuple(map(Fraction, self.payoff.ravel()))))

    def __repr__(self):
        return f"PolymatrixGame(signature={self.signature}, exact={self.exact})"


def validate_game(signature, matrix, exact: bool | None = None) -> PolymatrixGame:
    """Check dimensions and build a game.

    Integer, Fraction and string entries give an exact game; any float entry
    makes the whole game float unless ``exact=True`` is requested, in which
    case floats are converted to their exact binary value.
    """
    sig = as_signature(signature)
    rows = list(matrix)
    if not all(isinstance(r, (list, tuple, np.ndarray)) for r in rows):
        raise DimensionMismatch("payoff must be a list of rows")
    lens = {len(r) for r in rows}
    if len(lens) > 1:
        raise DimensionMismatch(f"payoff rows have different lengths {sorted(lens)}")
    arr = np.asarray(matrix, dtype=object)
    if arr.ndim != 2 or arr.shape != (sig.n, sig.n):
        raise DimensionMismatch(
            f"payoff has shape {arr.shape}, signature {sig} needs ({sig.n}, {sig.n})")
    if exact is None:
        exact = not any(isinstance(v, (float, np.floating)) for v in arr.ravel())
    if exact:
        payoff = fraction_array(arr)
    else:
        payoff = np.array(arr, dtype=float)
    payoff.flags.writeable = False
    return PolymatrixGame(sig, payoff)


def zero_game(signature) -> PolymatrixGame:
    sig = as_signature(signature)
    return validate_game(sig, [[0] * sig.n for _ in range(sig.n)])


# -- equivalence ------------------------------------------------------------


def canonical_form(G: PolymatrixGame) -> np.ndarray:
    """Subtract each block's last row from all its rows.

    Two games with the same signature are equivalent iff their canonical forms
    agree.
    """
    A = np.array(G.payoff, copy=True)
    for s in G.signature.slices:
        A[s, :] = A[s, :] - A[s.stop - 1, :]
    return A


def games_equivalent(G1: PolymatrixGame, G2: PolymatrixGame,
                     tol: float = FLOAT_TOL) -> bool:
    """Whether every block of ``A1 - A2`` has equal rows.

    Exact comparison when both games are exact; otherwise entrywise ``tol``.
    """
    if G1.signature != G2.signature:
        raise SignatureMismatch(f"{G1.signature} vs {G2.signature}")
    C1, C2 = canonical_form(G1), canonical_form(G2)
    if G1.exact and G2.exact:
        return bool(np.all(C1 == C2))
    return bool(np.max(np.abs(C1.astype(float) - C2.astype(float)), initial=0.0) <= tol)


def row_constant_blocks(signature, rows: Sequence[Sequence]) -> np.ndarray:
    """Matrix whose block ``(a, b)`` has every row equal to ``rows[a][b]``.

    ``rows[a][b]`` is a vector of length ``n_b``. Adding the result to a payoff
    matrix yields an equivalent game.
    """
    sig = as_signature(signature)
    M = np.empty((sig.n, sig.n), dtype=object)
    for a, sa in enumerate(sig.slices):
        for b, sb in enumerate(sig.slices):
            c = fraction_array(rows[a][b]).reshape(-1)
            if c.shape[0] != sig.parts[b]:
                raise DimensionMismatch(f"row for block ({a + 1},{b + 1}) has length {len(c)}")
            M[sa, sb] = np.tile(c, (sig.parts[a], 1))
    return M


# -- faces and restriction --------------------------------------------------


@dataclass(frozen=True)
class FaceIndexSet:
    """Sorted strategy indices ``I`` meeting every group (a face of the prism)."""

    signature: Signature
    indices: tuple[int, ...]
    restricted: Signature = field(init=False)

    def __post_init__(self):
        sig = self.signature
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if any(i < 0 or i >= sig.n for i in idx):
            raise InvalidFace(f"index out of range 0..{sig.n - 1}: {idx}")
        counts = [sum(1 for i in idx if s.start <= i < s.stop) for s in sig.slices]
        empty = [a for a, c in enumerate(counts) if c == 0]
        if empty:
            raise InvalidFace(f"face empties group {empty[0] + 1}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "restricted", Signature(tuple(counts)))

    @classmethod
    def of_point(cls, signature, x, tol: float = 0.0) -> "FaceIndexSet":
        """Smallest face containing ``x`` (its support)."""
        return cls(as_signature(signature),
                   tuple(i for i, v in enumerate(x) if v > tol))


def restrict(G: PolymatrixGame, I) -> PolymatrixGame:
    """Restriction of ``G`` to the face ``I`` (rows/columns of ``I`` in order)."""
    if not isinstance(I, FaceIndexSet):
        I = FaceIndexSet(G.signature, tuple(I))
    if I.signature != G.signature:
        raise SignatureMismatch(f"face built for {I.signature}, game has {G.signature}")
    idx = list(I.indices)
    sub = np.array(G.payoff[np.ix_(idx, idx)])
    sub.flags.writeable = False
    return PolymatrixGame(I.restricted, sub)


# -- prism points -----------------------------------------------------------


def block_sums(signature, x) -> np.ndarray:
    sig = as_signature(signature)
    x = np.asarray(x)
    return np.array([x[s].sum() for s in sig.slices], dtype=x.dtype)


def in_prism(signature, x, tol: float = 1e-12) -> bool:
    sig = as_signature(signature)
    x = np.asarray(x)
    if x.shape != (sig.n,):
        return False
    if x.dtype == object:
        return all(v >= 0 for v in x) and all(s == 1 for s in block_sums(sig, x))
    return bool(np.all(x >= -tol) and np.all(np.abs(block_sums(sig, x) - 1) <= tol))


def check_prism_point(signature, x, tol: float = 1e-12) -> np.ndarray:
    sig = as_signature(signature)
    arr = np.asarray(x)
    if arr.shape != (sig.n,):
        raise DimensionMismatch(f"point has shape {arr.shape}, expected ({sig.n},)")
    if not in_prism(sig, arr, tol):
        raise GameError(f"point is not in the prism {sig}")
    return arr


def is_interior(x) -> bool:
    return all(v > 0 for v in np.asarray(x).ravel())


def center(signature) -> np.ndarray:
    sig = as_signature(signature)
    return np.concatenate([np.full(k, 1.0 / k) for k in sig.parts])


def vertex_point(signature, support: Sequence[int], exact: bool = True) -> np.ndarray:
    """Prism vertex with strategy ``support[a]`` played by group ``a``."""
    sig = as_signature(signature)
    if len(support) != sig.p:
        raise NotVertex(f"need one strategy per group, got {len(support)}")
    x = np.array([Fraction(0)] * sig.n, dtype=object) if exact else np.zeros(sig.n)
    for a, (s, k) in enumerate(zip(sig.slices, support)):
        if not s.start <= k < s.stop:
            raise NotVertex(f"strategy {k + 1} is not in group {a + 1}")
        x[k] = Fraction(1) if exact else 1.0
    return x


def vertex_support(signature, x) -> tuple[int, ...]:
    """Inverse of :func:`vertex_point`; raises :class:`NotVertex` otherwise."""
    sig = as_signature(signature)
    x = np.asarray(x)
    if x.shape != (sig.n,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({sig.n},)")
    support = []
    for a, s in enumerate(sig.slices):
        block = list(x[s])
        ones = [j for j, v in enumerate(block) if v == 1]
        if len(ones) != 1 or any(v != 0 for j, v in enumerate(block) if j != ones[0]):
            raise NotVertex(f"group {a + 1} block {block} is not a unit vector")
        support.append(s.start + ones[0])
    return tuple(support)


def to_model(signature, x) -> np.ndarray:
    """Drop the last coordinate of every block (the 'model' coordinates)."""
    sig = as_signature(signature)
    x = np.asarray(x)
    keep = [i for i in range(sig.n) if i not in set(sig.last_indices())]
    return x[keep]


def from_model(signature, y, affine: bool = True) -> np.ndarray:
    """Inverse of :func:`to_model`.

    With ``affine=True`` the dropped coordinate restores block sum 1 (points);
    with ``affine=False`` it restores block sum 0 (directions).
    """
    sig = as_signature(signature)
    y = list(y)
    if len(y) != sig.n - sig.p:
        raise DimensionMismatch(f"model vector has length {len(y)}, expected {sig.n - sig.p}")
    exact = all(isinstance(v, (int, Fraction)) for v in y)
    zero = Fraction(0) if exact else 0.0
    out = []
    pos = 0
    for k in sig.parts:
        head = y[pos:pos + k - 1]
        pos += k - 1
        out.extend(head)
        out.append((1 if affine else 0) - sum(head, zero))
    if exact:
        return np.array([Fraction(v) for v in out], dtype=object)
    return np.array(out, dtype=float)


def random_interior_point(signature, rng: np.random.Generator) -> np.ndarray:
    sig = as_signature(signature)
    return np.concatenate([rng.dirichlet(np.ones(k)) for k in sig.parts])


def random_rational_interior_point(signature, rng: np.random.Generator,
                                   denom: int = 12) -> np.ndarray:
    """Interior point with small-denominator rational coordinates."""
    sig = as_signature(signature)
    out = []
    for k in sig.parts:
        w = rng.integers(1, denom, size=k)
        out.extend(Fraction(int(v), int(w.sum())) for v in w)
    return np.array(out, dtype=object)


def random_skew_rational(n: int, rng: np.random.Generator, num: int = 1,
                         denom: int = 4) -> np.ndarray:
    """Random exact skew-symmetric matrix with entries ``k/d``, ``|k| <= num*denom``, ``1 <= d <= denom``."""
    A = np.array([[Fraction(0)] * n for _ in range(n)], dtype=object)
    for i in range(n):
        for j in range(i + 1, n):
            v = Fraction(int(rng.integers(-num * denom, num * denom + 1)),
                         int(rng.integers(1, denom + 1)))
            A[i, j] = v
            A[j, i] = -v
    return A


# -- equilibria -------------------------------------------------------------


def is_equilibrium(G: PolymatrixGame, x, tol: float = 1e-12) -> bool:
    """Whether ``x`` is a rest point of the replicator field of ``G``.

    For each group, the payoffs ``(A x)_i`` must coincide over the strategies
    in the support of ``x``. Exact when both ``G`` and ``x`` are exact.
    """
    sig = G.signature
    x = check_prism_point(sig, x)
    exact = G.exact and x.dtype == object
    if exact:
        Ax = np.dot(G.payoff, x)
    else:
        Ax = G.A @ np.asarray(x, dtype=float)
    for s in sig.slices:
        vals = [Ax[i] for i in range(s.start, s.stop) if x[i] > 0]
        if not vals:
            continue
        if exact:
            if any(v != vals[0] for v in vals):
                return False
        elif max(vals) - min(vals) > tol:
            return False
    return True


def is_skew(A, tol: float = FLOAT_TOL) -> bool:
    A = np.asarray(A)
    if A.dtype == object:
        return bool(np.all(A + A.T == 0))
    return bool(np.max(np.abs(A + A.T), initial=0.0) <= tol)


def to_fraction_vector(v) -> np.ndarray:
    return np.array([to_fraction(x) for x in v], dtype=object)
