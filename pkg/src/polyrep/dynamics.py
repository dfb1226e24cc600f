"""Orbit integration with structure monitors.

Interior orbits are integrated by default in chart coordinates
``u_j = log(x_j / x_last)``, where the replicator equation reads
``du/dt = -E A phi(u)``. Block sums are then exact and positivity holds by
construction; linear leaf invariants ``w . u`` are conserved by any
Runge-Kutta method up to roundoff. Boundary orbits use prism coordinates with
per-step block renormalization.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .conservative import HamiltonianSpec
from .core import (NotVertex, PolymatrixGame, as_signature, check_prism_point,
                   is_interior, vertex_support)
from .field import incidence_matrix, vector_field
from .poisson import PoissonData, leaf_invariant_from_log, log_phi, phi, phi_inverse

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t


class BoundaryEscape(IntegrationError):
    pass


class NonFinite(IntegrationError):
    pass


class BoundarySample(ValueError):
    """A monitor that needs interior points met a boundary sample."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings.

    ``method`` is ``"dopri5"`` (adaptive Dormand-Prince 5(4) with PI step
    control) or ``"rk4"`` (classical fixed step ``step``). ``mode`` is
    ``"auto"``, ``"chart"`` or ``"prism"``; auto picks chart coordinates for
    interior initial conditions. ``stride`` keeps every k-th accepted step.
    """

    method: str = "dopri5"
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 0.1
    step: float = 0.01
    first_step: float | None = None
    mode: str = "auto"
    stride: int = 1
    max_steps: int = 50_000_000

    def __post_init__(self):
        if self.method not in ("dopri5", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.mode not in ("auto", "chart", "prism"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.rtol <= 0 or self.atol <= 0 or self.max_step <= 0 or self.step <= 0:
            raise ValueError("tolerances and step sizes must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass
class Trajectory:
    """Sampled orbit plus monitored quantities."""

    signature: object
    t: np.ndarray
    x: np.ndarray
    mode: str
    method: str
    steps: int
    rejected: int
    logx: np.ndarray | None = None
    H: np.ndarray | None = None
    leaf: np.ndarray | None = None
    block_dev: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.block_dev is None:
            sums = np.stack([self.x[:, s].sum(axis=1) for s in as_signature(self.signature).slices],
                            axis=1)
            self.block_dev = np.max(np.abs(sums - 1.0), axis=1)

    def __len__(self):
        return len(self.t)

    @property
    def interior(self) -> bool:
        return self.logx is not None or bool(np.all(self.x > 0))

    def log_states(self) -> np.ndarray:
        if self.logx is not None:
            return self.logx
        if not np.all(self.x > 0):
            raise BoundarySample("trajectory touches the boundary")
        return np.log(self.x)

    def attach_monitors(self, hamiltonian: HamiltonianSpec | None = None,
                        poisson: PoissonData | None = None) -> "Trajectory":
        """Fill ``H`` and ``leaf`` (NaN at boundary samples)."""
        if self.logx is not None:
            L = self.logx
        else:
            with np.errstate(divide="ignore"):
                L = np.where(self.x > 0, np.log(np.where(self.x > 0, self.x, 1.0)), np.nan)
        if hamiltonian is not None:
            self.H = np.array([_safe(lambda r=r: hamiltonian.value_from_log(r)) for r in L])
        if poisson is not None:
            self.leaf = np.array([leaf_invariant_from_log(poisson, r) for r in L]) \
                if poisson.kernel else np.zeros((len(self.t), 0))
        return self


def _safe(fn):
    v = fn()
    return v if np.isfinite(v) else np.nan


# -- steppers ---------------------------------------------------------------

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_ERR = _B5 - _B4


def _dopri_step(f, y, h, k1):
    K = np.empty((7, y.size))
    K[0] = k1
    for s in range(1, 7):
        K[s] = f(y + h * (np.asarray(_A[s]) @ K[:s]))
    y_new = y + h * (_B5 @ K)  # equals the last stage argument (FSAL)
    err = h * (_ERR @ K)
    return y_new, err, K[6]


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + h / 2 * k1)
    k3 = f(y + h / 2 * k2)
    k4 = f(y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _targets(t0, t1, t_eval):
    if t_eval is None:
        return None
    te = np.asarray(t_eval, dtype=float)
    if te.ndim != 1 or np.any(np.diff(te) <= 0) or te[0] < t0 or te[-1] > t1:
        raise ValueError("t_eval must be strictly increasing inside t_span")
    return te


def _solve(f: Callable, y0: np.ndarray, t0: float, t1: float, cfg: IntegratorConfig,
           t_eval=None, post: Callable | None = None):
    """Integrate the autonomous system ``y' = f(y)``; returns (t, Y, steps, rejected).

    ``post(t, y)`` is applied after every accepted step and may modify or
    reject (by raising) the new state.
    """
    targets = _targets(t0, t1, t_eval)
    ts, ys = [], []
    if targets is None or targets[0] == t0:
        ts.append(t0)
        ys.append(y0.copy())
    next_target = 0 if targets is None else (1 if targets[0] == t0 else 0)

    t, y = t0, y0.copy()
    steps = rejected = 0
    accepted_since = 0
    if cfg.method == "rk4":
        nominal = cfg.step
    else:
        nominal = min(cfg.max_step, cfg.first_step or 1e-3)
        k1 = f(y)
        facold = 1e-4
    h = nominal
    while t < t1:
        if steps + rejected > cfg.max_steps:
            raise IntegrationError("step budget exhausted", t)
        stop = t1 if targets is None or next_target >= len(targets) else targets[next_target]
        h_try = min(h, stop - t)
        landing = h_try == stop - t
        if cfg.method == "rk4":
            y_new = _rk4_step(f, y, h_try)
            accept = True
        else:
            y_new, err_vec, k7 = _dopri_step(f, y, h_try, k1)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2))) if y.size else 0.0
            if not np.isfinite(err):
                raise NonFinite("non-finite state", t)
            beta, safe = 0.04, 0.9
            fac11 = max(err, 1e-300) ** (0.2 - 0.75 * beta)
            accept = err <= 1.0
            if accept:
                fac = min(5.0, max(0.1, fac11 / facold ** beta / safe))
                h_next = min(cfg.max_step, h_try / fac)
                facold = max(err, 1e-4)
            else:
                h_next = h_try / min(5.0, fac11 / safe)
                rejected += 1
        if not accept:
            h = h_next
            continue
        t_new = stop if landing else t + h_try
        if not np.all(np.isfinite(y_new)):
            raise NonFinite("non-finite state", t_new)
        if post is not None:
            y_new = post(t_new, y_new)
        t, y = t_new, y_new
        steps += 1
        accepted_since += 1
        if cfg.method == "dopri5":
            k1 = k7 if post is None else f(y)
            # a step clipped to hit an output time must not shrink the next one
            h = h_next if not landing or h_next > h else h
        if targets is None:
            if accepted_since >= cfg.stride or t >= t1:
                ts.append(t)
                ys.append(y.copy())
                accepted_since = 0
        elif landing and next_target < len(targets) and t == targets[next_target]:
            ts.append(t)
            ys.append(y.copy())
            next_target += 1
    return np.array(ts), np.array(ys), steps, rejected


# -- public API -------------------------------------------------------------


def integrate(G: PolymatrixGame, x0, t_span: Sequence[float],
              config: IntegratorConfig | None = None, *,
              t_eval=None, hamiltonian: HamiltonianSpec | None = None,
              poisson: PoissonData | None = None) -> Trajectory:
    """Integrate the replicator equation of ``G`` from ``x0`` over ``t_span``.

    Raises :class:`BoundaryEscape` if a prism-mode coordinate drops below
    ``-atol`` and :class:`NonFinite` on overflow, both carrying the time.
    """
    cfg = config or IntegratorConfig()
    sig = G.signature
    x0 = np.asarray(check_prism_point(sig, np.asarray(x0, dtype=float), tol=1e-9), dtype=float)
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    mode = cfg.mode
    if mode == "auto":
        mode = "chart" if is_interior(x0) else "prism"
    if mode == "chart" and not is_interior(x0):
        raise ValueError("chart mode needs an interior initial condition")

    if mode == "chart":
        EA = incidence_matrix(sig) @ G.A

        def f(u):
            return -(EA @ phi(sig, u))

        ts, U, steps, rejected = _solve(f, phi_inverse(sig, x0), t0, t1, cfg, t_eval)
        logx = np.array([log_phi(sig, u) for u in U])
        X = np.exp(logx)
        traj = Trajectory(sig, ts, X, mode, cfg.method, steps, rejected, logx=logx)
    else:
        slices = sig.slices

        def f(x):
            return vector_field(G, x)

        def post(t, x):
            if np.any(x < -cfg.atol):
                i = int(np.argmin(x))
                raise BoundaryEscape(f"coordinate {i + 1} = {x[i]:.3g} left the prism", t)
            x = np.maximum(x, 0.0)
            for s in slices:
                x[s] /= x[s].sum()
            return x

        ts, X, steps, rejected = _solve(f, x0, t0, t1, cfg, t_eval, post)
        traj = Trajectory(sig, ts, X, mode, cfg.method, steps, rejected)
    log.debug("integrated %d steps (%d rejected) in %s mode", steps, rejected, mode)
    if hamiltonian is not None or poisson is not None:
        traj.attach_monitors(hamiltonian, poisson)
    return traj


def integrate_batch(G: PolymatrixGame, x0s, t_span, config: IntegratorConfig | None = None,
                    workers: int | None = None, **kwargs) -> list[Trajectory]:
    """Integrate several initial conditions concurrently; output order follows ``x0s``."""
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda x0: integrate(G, x0, t_span, config, **kwargs), x0s))


@dataclass(frozen=True)
class MonitorReport:
    """Maximum drifts over a trajectory."""

    hamiltonian_drift: float | None
    leaf_drift: np.ndarray | None
    block_sum_deviation: float

    @property
    def max_leaf_drift(self) -> float | None:
        if self.leaf_drift is None:
            return None
        return float(np.max(self.leaf_drift, initial=0.0))


def monitor_report(traj: Trajectory, hamiltonian: HamiltonianSpec | None = None,
                   poisson: PoissonData | None = None) -> MonitorReport:
    """``max |H(x(t)) - H(x(0))|``, per-invariant leaf drift and block-sum deviation."""
    if len(traj) < 2:
        raise ValueError("need at least two samples")
    h_drift = leaf_drift = None
    if hamiltonian is not None or poisson is not None:
        L = traj.log_states()  # raises BoundarySample
        if hamiltonian is not None:
            H = np.array([hamiltonian.value_from_log(r) for r in L])
            h_drift = float(np.max(np.abs(H - H[0])))
        if poisson is not None:
            C = np.array([leaf_invariant_from_log(poisson, r) for r in L]).reshape(len(L), -1)
            leaf_drift = np.max(np.abs(C - C[0]), axis=0)
    return MonitorReport(h_drift, leaf_drift, float(np.max(traj.block_dev)))


def recurrence_check(traj: Trajectory, x0=None, t_min: float | None = None) -> float:
    """Closest return ``min ||x(t) - x0||_max`` over samples with ``t >= t_min``.

    By default ``t_min`` is the first time the orbit is at least half its
    largest excursion away from ``x0``, so the departure is not counted.
    """
    x0 = traj.x[0] if x0 is None else np.asarray(x0, dtype=float)
    d = np.max(np.abs(traj.x - x0), axis=1)
    if t_min is None:
        far = np.flatnonzero(d >= 0.5 * d.max())
        t_min = traj.t[far[0]] if d.max() > 0 else traj.t[0]
    sel = traj.t >= t_min
    return float(d[sel].min()) if np.any(sel) else float("inf")


@dataclass(frozen=True)
class VertexRates:
    """Transversal growth rates at a vertex, keyed by off-support strategy."""

    support: tuple[int, ...]
    rates: dict

    @property
    def classification(self) -> str:
        vals = list(self.rates.values())
        if not vals:
            return "trivial"
        if all(v > 0 for v in vals):
            return "repeller"
        if all(v < 0 for v in vals):
            return "sink"
        if any(v == 0 for v in vals):
            return "degenerate"
        return "saddle"


def linearize_at_vertex(G: PolymatrixGame, vertex) -> VertexRates:
    """Rates ``(A e)_i - (A e)_k`` for every strategy ``i`` off the support ``k`` of its group.

    ``vertex`` is a support tuple (one strategy index per group) or a vertex
    point. Exact for exact games, so signs are decided without tolerance.
    """
    sig = G.signature
    if isinstance(vertex, tuple) and len(vertex) == sig.p and all(
            isinstance(k, (int, np.integer)) for k in vertex):
        support = tuple(int(k) for k in vertex)
        for a, (s, k) in enumerate(zip(sig.slices, support)):
            if not s.start <= k < s.stop:
                raise NotVertex(f"strategy {k + 1} is not in group {a + 1}")
    else:
        support = vertex_support(sig, vertex)
    A = G.payoff
    Ae = A[:, list(support)].sum(axis=1)
    rates = {}
    for s, k in zip(sig.slices, support):
        for i in range(s.start, s.stop):
            if i != k:
                r = Ae[i] - Ae[k]
                rates[i] = r if G.exact else float(r)
    return VertexRates(support, rates)


def classify_vertices(G: PolymatrixGame) -> list[VertexRates]:
    return [linearize_at_vertex(G, v) for v in G.signature.vertices()]


__all__ = [
    "BoundaryEscape", "BoundarySample", "IntegrationError", "IntegratorConfig",
    "MonitorReport", "NonFinite", "Trajectory", "VertexRates", "classify_vertices",
    "integrate", "integrate_batch", "linearize_at_vertex", "monitor_report",
    "recurrence_check",
]
