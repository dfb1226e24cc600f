"""Exact rational linear algebra.

Everything here works on plain Python ``Fraction`` values stored in lists or
numpy object arrays. Elimination is Gauss-Jordan with the first nonzero pivot
in each column; with exact arithmetic no pivoting strategy is needed for
stability.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


class NoSolution(ValueError):
    """Raised when a linear system is inconsistent."""


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip().replace("−", "-"))
    if hasattr(value, "numerator") and hasattr(value, "denominator"):
        return Fraction(int(value.numerator), int(value.denominator))
    # floats are converted exactly (binary value), never rounded
    return Fraction(float(value))


def fraction_array(values) -> np.ndarray:
    """Convert a nested sequence (or array) to an object array of Fractions."""
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = to_fraction(v)
    return out


def _rows(M) -> list[list[Fraction]]:
    M = np.asarray(M, dtype=object)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {M.shape}")
    return [[to_fraction(v) for v in row] for row in M]


def rref(M) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and the list of pivot columns."""
    R = _rows(M)
    nrows = len(R)
    ncols = len(R[0]) if nrows else np.asarray(M).shape[1]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        piv = next((i for i in range(r, nrows) if R[i][c] != 0), None)
        if piv is None:
            continue
        R[r], R[piv] = R[piv], R[r]
        inv = 1 / R[r][c]
        R[r] = [v * inv for v in R[r]]
        for i in range(nrows):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                Ri, Rr = R[i], R[r]
                R[i] = [a - f * b for a, b in zip(Ri, Rr)]
        pivots.append(c)
        r += 1
    return R, pivots


def rank(M) -> int:
    M = np.asarray(M, dtype=object)
    if M.size == 0:
        return 0
    return len(rref(M)[1])


def nullspace(M) -> list[np.ndarray]:
    """Exact basis of ``{v : M v = 0}``, one vector per free column.

    Each basis vector has a 1 in its free column and zeros in the other free
    columns (the standard RREF basis).
    """
    M = np.asarray(M, dtype=object)
    ncols = M.shape[1]
    if M.shape[0] == 0:
        return [_unit(ncols, j) for j in range(ncols)]
    R, pivots = rref(M)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, pc in zip(R, pivots):
            v[pc] = -row[f]
        basis.append(np.array(v, dtype=object))
    return basis


def _unit(n: int, j: int) -> np.ndarray:
    v = np.array([Fraction(0)] * n, dtype=object)
    v[j] = Fraction(1)
    return v


@dataclass(frozen=True)
class LinearSolution:
    """Affine solution set ``particular + span(nullspace)``."""

    particular: np.ndarray
    nullspace: tuple[np.ndarray, ...]

    @property
    def dimension(self) -> int:
        return len(self.nullspace)


def solve_linear_exact(M, b) -> LinearSolution:
    """Solve ``M x = b`` exactly.

    The particular solution sets every free variable to zero. Raises
    :class:`NoSolution` for an inconsistent system, which is distinct from a
    consistent system whose particular solution happens to be zero.
    """
    M = fraction_array(M)
    b = fraction_array(b).reshape(-1)
    if M.ndim != 2 or M.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: M {M.shape}, b {b.shape}")
    ncols = M.shape[1]
    if M.shape[0] == 0:
        return LinearSolution(np.array([Fraction(0)] * ncols, dtype=object),
                              tuple(_unit(ncols, j) for j in range(ncols)))
    aug = np.concatenate([M, b.reshape(-1, 1)], axis=1)
    R, pivots = rref(aug)
    if ncols in pivots:
        raise NoSolution("inconsistent linear system")
    x = [Fraction(0)] * ncols
    for row, pc in zip(R, pivots):
        x[pc] = row[ncols]
    return LinearSolution(np.array(x, dtype=object), tuple(nullspace(M)))


def matmul(A, B) -> np.ndarray:
    """Exact product of object arrays (numpy's ``@`` works, this just fixes dtype)."""
    return np.asarray(np.dot(np.asarray(A, dtype=object), np.asarray(B, dtype=object)),
                      dtype=object)


def min_norm_point(sol: LinearSolution) -> np.ndarray:
    """Point of the affine set closest to the origin (Euclidean), exactly."""
    if not sol.nullspace:
        return sol.particular.copy()
    N = np.stack(sol.nullspace, axis=1)
    G = matmul(N.T, N)
    rhs = matmul(N.T, sol.particular)
    y = solve_linear_exact(G, rhs).particular
    return sol.particular - matmul(N, y)


def is_zero(arr) -> bool:
    return all(v == 0 for v in np.asarray(arr, dtype=object).ravel())


def scale_last_nonzero(v: Sequence, target: Fraction = Fraction(1)) -> np.ndarray:
    """Rescale so the last nonzero entry equals ``target``."""
    v = np.asarray(v, dtype=object)
    nz = [x for x in v if x != 0]
    if not nz:
        return v.copy()
    return np.array([x * target / nz[-1] for x in v], dtype=object)


def proportional(u, v) -> bool:
    """True iff two exact vectors are nonzero multiples of each other."""
    u = [to_fraction(x) for x in u]
    v = [to_fraction(x) for x in v]
    if len(u) != len(v):
        return False
    ratio = None
    for a, b in zip(u, v):
        if (a == 0) != (b == 0):
            return False
        if a != 0:
            r = a / b
            if ratio is None:
                ratio = r
            elif r != ratio:
                return False
    return ratio is not None
