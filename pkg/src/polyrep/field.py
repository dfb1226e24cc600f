"""Replicator vector fields on the prism and in chart coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import DimensionMismatch, PolymatrixGame, as_signature


class ZeroScaling(ValueError):
    """A scaling function vanished at the queried point."""


def _group_average(sig, x, Ax):
    """Per-strategy value of ``sum_b (x^a)^T A^{ab} x^b`` for its own group ``a``."""
    prod = x * Ax
    avg = np.empty_like(prod)
    for s in sig.slices:
        avg[s] = prod[s].sum()
    return avg


def vector_field(G: PolymatrixGame, x) -> np.ndarray:
    """Polymatrix replicator field ``x_i ((Ax)_i - sum_b (x^a)^T A^{ab} x^b)``.

    Exact (Fraction) evaluation when both the game and ``x`` are exact,
    float64 otherwise. Off-prism inputs are accepted; the formula is a
    polynomial.
    """
    x = np.asarray(x)
    if x.shape != (G.n,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({G.n},)")
    if G.exact and x.dtype == object:
        Ax = np.dot(G.payoff, x)
    else:
        x = x.astype(float)
        Ax = G.A @ x
    return x * (Ax - _group_average(G.signature, x, Ax))


def fitness(G: PolymatrixGame, x) -> np.ndarray:
    """Relative fitness of each strategy within its group."""
    x = np.asarray(x, dtype=float)
    Ax = G.A @ x
    return Ax - _group_average(G.signature, x, Ax)


def incidence_matrix(signature) -> np.ndarray:
    """Block-diagonal ``E`` with rows ``-e_j + e_last`` for each group.

    Integer entries, shape ``(n - p, n)``. ``E`` annihilates vectors that are
    constant on every block.
    """
    sig = as_signature(signature)
    E = np.zeros((sig.n - sig.p, sig.n), dtype=int)
    r = 0
    for s in sig.slices:
        for j in range(s.start, s.stop - 1):
            E[r, j] = -1
            E[r, s.stop - 1] = 1
            r += 1
    return E


def chart_field(G: PolymatrixGame, u) -> np.ndarray:
    """Velocity in chart coordinates: ``-E A phi(u)``.

    With ``u_j = log(x_j / x_last)`` the replicator equation becomes
    ``du_j/dt = (Ax)_j - (Ax)_last``, which no longer needs the group average.
    """
    from .poisson import phi  # local import: poisson depends on this module

    E = incidence_matrix(G.signature)
    return -(E @ (G.A @ phi(G.signature, u)))


@dataclass(frozen=True)
class GeneralizedScaling:
    """One nowhere-zero scalar function per group, evaluated on the prism.

    ``functions[a](x)`` gives the scaling of group ``a`` at ``x``. The
    functions are never differentiated.
    """

    functions: tuple[Callable[[np.ndarray], float], ...]

    @classmethod
    def constant(cls, values: Sequence[float]) -> "GeneralizedScaling":
        return cls(tuple((lambda x, v=float(v): v) for v in values))

    def __call__(self, x) -> np.ndarray:
        lam = np.array([float(f(x)) for f in self.functions])
        zero = np.flatnonzero(lam == 0)
        if zero.size:
            raise ZeroScaling(f"scaling of group {zero[0] + 1} vanishes at x")
        return lam

    def diagonal(self, signature, x) -> np.ndarray:
        """Per-strategy scaling, i.e. the diagonal of ``D(x)``."""
        return np.repeat(self(x), as_signature(signature).parts)


def generalized_field(G: PolymatrixGame, scaling: GeneralizedScaling, x) -> np.ndarray:
    """State-dependent scaling field ``X_{(n, A D(x))}(x)``."""
    sig = G.signature
    x = np.asarray(x, dtype=float)
    if x.shape != (G.n,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({G.n},)")
    if len(scaling.functions) != sig.p:
        raise DimensionMismatch(f"{len(scaling.functions)} scaling functions for {sig.p} groups")
    lam = scaling(x)
    d = np.repeat(lam, sig.parts)
    ADx = G.A @ (d * x)
    # sum_b lam_b (x^a)^T A^{ab} x^b is the group average of x_i (A D x)_i
    return x * (ADx - _group_average(sig, x, ADx))
