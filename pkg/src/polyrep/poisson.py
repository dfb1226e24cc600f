"""Poisson structure of a polymatrix game.

The bivector is ``pi_A(x) = -T_x D_x A D_x T_x^T`` with ``D_x = diag(x)`` and
``T_x`` block diagonal with blocks ``x^a 1^T - I``. On the interior of the
prism it is the push-forward, through the softmax chart ``phi``, of the
constant structure ``B = -E A E^T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np

from . import linalg
from .core import (FLOAT_TOL, DimensionMismatch, PolymatrixGame, as_signature,
                   is_skew)
from .field import incidence_matrix


class NotSkew(ValueError):
    """Poisson checks need a skew-symmetric payoff."""


class BoundaryPoint(ValueError):
    """A chart or logarithm was requested at a point with a zero coordinate."""


class NonFiniteGradient(ValueError):
    pass


def _require_skew(G: PolymatrixGame, tol: float = FLOAT_TOL) -> None:
    if not is_skew(G.payoff, tol):
        raise NotSkew("payoff matrix is not skew-symmetric")


def _point(G: PolymatrixGame, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (G.n,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({G.n},)")
    return x


# -- bivector ---------------------------------------------------------------


def sandwich_factor(signature, x) -> np.ndarray:
    """``M = T_x D_x``; entry ``(i, j)`` is ``(x_i - delta_ij) x_j`` within a block."""
    sig = as_signature(signature)
    x = np.asarray(x)
    M = np.zeros((sig.n, sig.n), dtype=x.dtype)
    if x.dtype == object:
        M[:] = x[0] - x[0]
    for s in sig.slices:
        xb = x[s]
        blk = np.outer(xb, xb)
        for k in range(len(xb)):
            blk[k, k] = blk[k, k] - xb[k]
        M[s, s] = blk
    return M


def bivector(G: PolymatrixGame, x) -> np.ndarray:
    """``pi_A(x)`` by the matrix-product formula. Exact for exact inputs."""
    x = _point(G, x)
    if G.exact and x.dtype == object:
        M = sandwich_factor(G.signature, x)
        return -linalg.matmul(linalg.matmul(M, G.payoff), M.T)
    M = sandwich_factor(G.signature, x.astype(float))
    P = -(M @ G.A @ M.T)
    if G.skew:
        P = 0.5 * (P - P.T)  # exact antisymmetry; only removes rounding
    return P


def bivector_entrywise(G: PolymatrixGame, x) -> np.ndarray:
    """``pi_A(x)`` entry by entry, for cross-checking :func:`bivector`.

    ``pi_ij = x_i x_j (-a_ij + (A^{ab} x^b)_i + ((A^{ab})^T x^a)_j - (x^a)^T A^{ab} x^b)``
    for ``i`` in group ``a`` and ``j`` in group ``b``.
    """
    x = np.asarray(_point(G, x), dtype=float)
    sig = G.signature
    A = G.A
    out = np.zeros((G.n, G.n))
    for sa in sig.slices:
        for sb in sig.slices:
            Aab = A[sa, sb]
            xa, xb = x[sa], x[sb]
            row = Aab @ xb
            col = Aab.T @ xa
            avg = xa @ Aab @ xb
            for i in range(sa.start, sa.stop):
                for j in range(sb.start, sb.stop):
                    ii, jj = i - sa.start, j - sb.start
                    out[i, j] = x[i] * x[j] * (-A[i, j] + row[ii] + col[jj] - avg)
    return out


def bivector_derivatives(G: PolymatrixGame, x) -> np.ndarray:
    """Exact partials ``d pi / d x_l`` stacked along axis 0.

    ``pi = -M A M^T`` with ``M`` quadratic in ``x``, so by the product rule
    ``d_l pi = -(d_l M A M^T + M A d_l M^T)``. Works with any exact scalar
    type stored in object arrays (Fraction, gmpy2 mpq).
    """
    sig = G.signature
    x = _point(G, x)
    A = G.payoff
    zero = x[0] - x[0]
    M = sandwich_factor(sig, x)
    AMt = linalg.matmul(A, M.T)
    MA = linalg.matmul(M, A)
    out = np.empty((G.n, G.n, G.n), dtype=object)
    for l in range(G.n):
        s = sig.slices[sig.group_of(l)]
        dM = np.full((G.n, G.n), zero, dtype=object)
        # d/dx_l of (x_i - delta_ij) x_j, block-local
        for j in range(s.start, s.stop):
            dM[l, j] = dM[l, j] + x[j]
        for i in range(s.start, s.stop):
            dM[i, l] = dM[i, l] + x[i] - (1 if i == l else 0)
        out[l] = -(linalg.matmul(dM, AMt) + linalg.matmul(MA, dM.T))
    return out


def bivector_derivatives_fd(G: PolymatrixGame, x, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference partials of :func:`bivector`."""
    x = np.asarray(_point(G, x), dtype=float)
    out = np.empty((G.n, G.n, G.n))
    for l in range(G.n):
        e = np.zeros(G.n)
        e[l] = h
        out[l] = (bivector(G, x + e) - bivector(G, x - e)) / (2 * h)
    return out


def _mpq_array(values) -> np.ndarray:
    arr = linalg.fraction_array(values)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = gmpy2.mpq(v.numerator, v.denominator)
    return out


def jacobiator(P: np.ndarray, dP: np.ndarray) -> np.ndarray:
    """Cyclic sum ``sum_l d_l P_ij P_lk + d_l P_jk P_li + d_l P_ki P_lj``."""
    T = np.tensordot(dP, P, axes=([0], [0]))  # T[a,b,c] = sum_l dP[l,a,b] P[l,c]
    return T + T.transpose(2, 0, 1) + T.transpose(1, 2, 0)


def jacobi_residual(G: PolymatrixGame, x, mode: str = "fd", h: float = 1e-5) -> float | Fraction:
    """Max-norm of the Jacobi identity defect of ``pi_A`` at ``x``.

    ``mode="fd"`` uses central differences with step ``h``; ``mode="exact"``
    differentiates the polynomial entries exactly and returns a Fraction
    (which is 0 when the identity holds).
    """
    _require_skew(G)
    x = _point(G, x)
    if mode == "exact":
        # gmpy2 rationals are an order of magnitude faster than Fraction here
        xe = _mpq_array(x)
        Ge = PolymatrixGame(G.signature, _mpq_array(G.payoff))
        J = jacobiator(bivector(Ge, xe), bivector_derivatives(Ge, xe))
        return linalg.to_fraction(max((abs(v) for v in J.ravel()), default=gmpy2.mpq(0)))
    if mode != "fd":
        raise ValueError(f"unknown mode {mode!r}")
    xf = np.asarray(x, dtype=float)
    J = jacobiator(bivector(G, xf), bivector_derivatives_fd(G, xf, h))
    return float(np.max(np.abs(J), initial=0.0))


# -- chart ------------------------------------------------------------------


def _chart_dim(sig) -> int:
    return sig.n - sig.p


def _u_blocks(sig, u):
    """Yield (block slice in x, slice in u) pairs."""
    r = 0
    for s in sig.slices:
        k = s.stop - s.start - 1
        yield s, slice(r, r + k)
        r += k


def log_phi(signature, u) -> np.ndarray:
    """``log phi(u)`` computed as a shifted log-sum-exp (no overflow)."""
    sig = as_signature(signature)
    u = np.asarray(u, dtype=float)
    if u.shape != (_chart_dim(sig),):
        raise DimensionMismatch(f"chart point has shape {u.shape}, expected ({_chart_dim(sig)},)")
    out = np.empty(sig.n)
    for s, r in _u_blocks(sig, u):
        z = np.append(u[r], 0.0)
        m = z.max()
        out[s] = z - (m + np.log(np.exp(z - m).sum()))
    return out


def phi(signature, u) -> np.ndarray:
    """Softmax chart with the last strategy of each group as pivot."""
    sig = as_signature(signature)
    u = np.asarray(u, dtype=float)
    if u.shape != (_chart_dim(sig),):
        raise DimensionMismatch(f"chart point has shape {u.shape}, expected ({_chart_dim(sig)},)")
    x = np.empty(sig.n)
    for s, r in _u_blocks(sig, u):
        z = np.append(u[r], 0.0)
        e = np.exp(z - z.max())
        x[s] = e / e.sum()
    return x


def phi_inverse(signature, x) -> np.ndarray:
    """``u_j = log(x_j / x_last)`` blockwise. Needs a strictly positive point."""
    sig = as_signature(signature)
    x = np.asarray(x, dtype=float)
    if x.shape != (sig.n,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({sig.n},)")
    if np.any(x <= 0):
        raise BoundaryPoint("chart inverse needs all coordinates > 0")
    lx = np.log(x)
    return -(incidence_matrix(sig) @ lx)


def jacobian_phi(signature, u) -> np.ndarray:
    """``d phi`` at ``u``; block ``a`` has entries ``delta_ij x_i - x_i x_j``."""
    sig = as_signature(signature)
    x = phi(sig, u)
    J = np.zeros((sig.n, _chart_dim(sig)))
    for s, r in _u_blocks(sig, u):
        xb = x[s]
        blk = -np.outer(xb, xb[:-1])
        blk[np.arange(len(xb) - 1), np.arange(len(xb) - 1)] += xb[:-1]
        J[s, r] = blk
    return J


# -- reduced structure ------------------------------------------------------


@dataclass(frozen=True)
class PoissonData:
    """Incidence matrix, reduced structure ``B = -E A E^T`` and its kernel.

    For exact games ``B`` and the kernel vectors are Fractions. Kernel
    vectors are scaled so their last nonzero entry is 1.
    """

    E: np.ndarray
    B: np.ndarray
    rank: int
    kernel: tuple[np.ndarray, ...]

    @property
    def kernel_float(self) -> np.ndarray:
        if not self.kernel:
            return np.zeros((0, self.E.shape[0]))
        return np.array([[float(v) for v in w] for w in self.kernel])


def validate_incidence(signature, E) -> np.ndarray:
    """Check a user-supplied incidence matrix and return it as Fractions.

    Valid matrices are block diagonal, have shape ``(n - p, n)``, kill
    block-constant vectors and have full row rank, so ``-E log x`` is a
    linear change of the standard chart coordinates.
    """
    sig = as_signature(signature)
    E = linalg.fraction_array(E)
    if E.shape != (sig.n - sig.p, sig.n):
        raise DimensionMismatch(f"incidence has shape {E.shape}, expected ({sig.n - sig.p}, {sig.n})")
    r = 0
    for a, s in enumerate(sig.slices):
        k = s.stop - s.start - 1
        rows = E[r:r + k]
        outside = np.concatenate([rows[:, :s.start], rows[:, s.stop:]], axis=1)
        if not linalg.is_zero(outside):
            raise ValueError(f"incidence rows for group {a + 1} leave the block")
        if any(sum(row[s]) != 0 for row in rows):
            raise ValueError(f"incidence rows for group {a + 1} do not sum to zero")
        r += k
    if linalg.rank(E) != sig.n - sig.p:
        raise ValueError("incidence matrix is rank deficient")
    return E


def build_poisson_data(G: PolymatrixGame, incidence=None) -> PoissonData:
    """``E``, ``B = -E A E^T``, exact rank and kernel basis of ``B``."""
    sig = G.signature
    if incidence is None:
        E = linalg.fraction_array(incidence_matrix(sig))
    else:
        E = validate_incidence(sig, incidence)
    A = G.payoff if G.exact else linalg.fraction_array(G.payoff)
    B = -linalg.matmul(linalg.matmul(E, A), E.T)
    if B.size == 0:
        return PoissonData(E, B, 0, ())
    kernel = tuple(linalg.scale_last_nonzero(w) for w in linalg.nullspace(B))
    rank = B.shape[0] - len(kernel)
    if not G.exact:
        B = B.astype(float)
    return PoissonData(E, B, rank, kernel)


def check_poisson_map(G: PolymatrixGame, u) -> float:
    """``max |dphi B dphi^T - pi_A(phi(u))|``; zero for skew ``A``."""
    _require_skew(G)
    sig = G.signature
    E = incidence_matrix(sig)
    B = -(E @ G.A @ E.T)
    J = jacobian_phi(sig, u)
    return float(np.max(np.abs(J @ B @ J.T - bivector(G, phi(sig, u))), initial=0.0))


# -- Hamiltonian fields and leaves -----------------------------------------


def hamiltonian_field(G: PolymatrixGame, grad, x) -> np.ndarray:
    """``pi_A(x) grad``; the Hamiltonian vector field of a function with gradient ``grad``."""
    _require_skew(G)
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (G.n,):
        raise DimensionMismatch(f"gradient has shape {grad.shape}, expected ({G.n},)")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient("gradient has non-finite entries")
    return bivector(G, np.asarray(x, dtype=float)) @ grad


def chart_coordinates(data: PoissonData, x) -> np.ndarray:
    """``-E log x``; equals ``phi_inverse(x)`` for the default incidence matrix."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise BoundaryPoint("leaf invariants need an interior point")
    return -(data.E.astype(float) @ np.log(x))


def leaf_invariant(data: PoissonData, x) -> np.ndarray:
    """Values ``w . (-E log x)`` for the kernel vectors ``w`` of ``B``.

    Two interior points share a symplectic leaf iff all values agree.
    """
    return data.kernel_float @ chart_coordinates(data, x)


def leaf_invariant_from_log(data: PoissonData, logx) -> np.ndarray:
    return data.kernel_float @ (-(data.E.astype(float) @ np.asarray(logx, dtype=float)))


def casimir_gradients(data: PoissonData, x) -> np.ndarray:
    """Gradients of the leaf invariants at interior ``x``, one per row."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise BoundaryPoint("leaf invariants need an interior point")
    return -(data.kernel_float @ data.E.astype(float)) / x
