"""Processes U_sigma(t, tau), their axioms, and the skew-product step.

All integration goes through :func:`propagate`, which advances an ensemble
of members (symbol, initial time, initial state) with fixed steps and
records snapshots at requested lags.  Members are cut into fixed-size
chunks that may run on a thread pool; chunk boundaries never depend on the
thread count, so results are identical for any number of threads.

Time handling:

* wave1d -- every initial time and lag must be a multiple of ``dt``;
  stage times are computed from integer step indices, which makes the
  cocycle law hold to the last bit and keeps translation errors at rounding
  level.
* linear -- exponential integrator with Gauss-Legendre quadrature of the
  forcing on each substep.  It is exact for the homogeneous flow and
  accurate to rounding for smooth forcing, so any interval is accepted and
  split into ceil((t - tau) / dt) equal substeps.
* finite -- integer times, table composition.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .metric_sets import MetricSpec, PointCloud
from .models import LinearModel, WaveModel, wave_rhs
from .symbol_space import FiniteShift, ShiftWord, SymbolSpace, TorusHull

CHUNK = 256
_GRID_TOL = 1e-6
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


class DivergenceError(RuntimeError):
    """A trajectory left the guard ball (or became non-finite)."""

    def __init__(self, time: float, index: int | None = None, norm: float = math.inf):
        self.time = float(time)
        self.index = index
        self.norm = norm
        where = f" (point {index})" if index is not None else ""
        super().__init__(f"blow-up at t={self.time:.6g}{where}, |x|={norm:.3g}")


class GridError(ValueError):
    """A time that is not a multiple of the integrator step."""


@dataclass(frozen=True)
class FiniteMaps:
    """Integer-time model: one map [n] -> [n] per letter."""

    tables: tuple[tuple[int, ...], ...]

    name = "finite"

    def __post_init__(self) -> None:
        tabs = tuple(tuple(int(v) for v in row) for row in self.tables)
        if not tabs or not tabs[0]:
            raise ValueError("need at least one nonempty table")
        n = len(tabs[0])
        if any(len(r) != n or any(not 0 <= v < n for v in r) for r in tabs):
            raise ValueError("tables must map [0, n) into itself")
        object.__setattr__(self, "tables", tabs)

    @property
    def n(self) -> int:
        return len(self.tables[0])

    state_dim = 1

    def metric(self) -> MetricSpec:
        return MetricSpec()

    def to_dict(self) -> dict:
        return {"name": "finite", "tables": [list(r) for r in self.tables]}


@dataclass(frozen=True)
class ProcessSpec:
    model: LinearModel | WaveModel | FiniteMaps
    dt: float = 1e-3
    order: int = 4
    guard: float = 1e8

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if self.order not in (2, 4):
            raise ValueError("scheme order must be 2 or 4")
        if not self.guard > 0:
            raise ValueError("guard must be positive")

    @property
    def state_dim(self) -> int:
        return self.model.state_dim

    def metric(self) -> MetricSpec:
        return self.model.metric()

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "dt": self.dt, "order": self.order, "guard": self.guard}


@dataclass(frozen=True)
class SkewState:
    x: np.ndarray
    sigma: object


# ------------------------------------------------------------------ grid

def grid_index(P: ProcessSpec, t: float) -> int:
    q = float(t) / P.dt
    k = round(q)
    if abs(q - k) > _GRID_TOL:
        raise GridError(f"time {t!r} is not a multiple of dt={P.dt!r}")
    return int(k)


def snap(P: ProcessSpec, t: float) -> float:
    """Nearest grid time; raises if ``t`` is off-grid."""
    return grid_index(P, t) * P.dt


# ------------------------------------------------------------- steppers

def _check_guard(P: ProcessSpec, X: np.ndarray, times: np.ndarray, offset: int) -> None:
    bad = ~np.isfinite(X).all(axis=1)
    Z = np.where(np.isfinite(X), X, 0.0)
    big = np.einsum("ij,ij->i", Z, Z) > P.guard * P.guard
    hit = np.flatnonzero(bad | big)
    if hit.size:
        i = int(hit[0])
        norm = float(np.linalg.norm(X[i])) if np.isfinite(X[i]).all() else math.inf
        raise DivergenceError(float(times[i]), offset + i, norm)


def _wave_chunk(P, S, phases, n0, X, lag_idx, offset):
    W: WaveModel = P.model
    dt = P.dt
    n0 = np.asarray(n0, dtype=np.float64)
    out = np.empty((len(lag_idx), X.shape[0], X.shape[1]))
    X = X.copy()

    def f(k_half):
        # k_half counts half steps from each member's start index
        return S.forcing_batch(phases, (n0 + 0.5 * k_half) * dt)

    r = 0
    k = 0
    total = lag_idx[-1] if len(lag_idx) else 0
    while r < len(lag_idx) and lag_idx[r] == 0:
        out[r] = X
        r += 1
    while k < total:
        if P.order == 4:
            f0, fh, f1 = f(2 * k), f(2 * k + 1), f(2 * k + 2)
            k1 = wave_rhs(W, X, f0)
            k2 = wave_rhs(W, X + (0.5 * dt) * k1, fh)
            k3 = wave_rhs(W, X + (0.5 * dt) * k2, fh)
            k4 = wave_rhs(W, X + dt * k3, f1)
            X = X + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        else:
            k1 = wave_rhs(W, X, f(2 * k))
            k2 = wave_rhs(W, X + dt * k1, f(2 * k + 2))
            X = X + (0.5 * dt) * (k1 + k2)
        k += 1
        _check_guard(P, X, (n0 + k) * dt, offset)
        while r < len(lag_idx) and lag_idx[r] == k:
            out[r] = X
            r += 1
    return out


def _linear_chunk(P, S, phases, taus, X, lags, offset):
    M: LinearModel = P.model
    lam = M.lam
    out = np.empty((len(lags), X.shape[0], X.shape[1]))
    X = X.copy()
    ncoef = S.n_coeffs
    if ncoef > M.dim:
        raise ValueError("forcing has more components than the linear state")
    prev = 0.0
    for r, lag in enumerate(lags):
        span = lag - prev
        if span > 0:
            nsub = max(1, int(math.ceil(span / P.dt - 1e-9)))
            h = span / nsub
            decay = math.exp(-lam * h)
            kern = h * _GL_WEIGHTS * np.exp(-lam * h * (1.0 - _GL_NODES))
            for j in range(nsub):
                t_start = taus + (prev + j * h)
                if ncoef:
                    F = S.forcing_batch(phases, t_start[:, None] + h * _GL_NODES)
                    inc = np.einsum("q,nqc->nc", kern, F)
                    X = decay * X
                    X[:, :ncoef] += inc
                else:
                    X = decay * X
                _check_guard(P, X, t_start + h, offset)
        out[r] = X
        prev = lag
    return out


def _finite_chunk(P, S: FiniteShift, phases, taus, X, lag_idx):
    FM: FiniteMaps = P.model
    tabs = np.asarray(FM.tables, dtype=np.int64)
    word = np.asarray(S.word, dtype=np.int64)
    p = S.period
    idx = phases[:, 0].astype(np.int64)
    taus = np.asarray(taus, dtype=np.int64)
    x = X[:, 0].astype(np.int64)
    out = np.empty((len(lag_idx), X.shape[0], 1))
    r, k = 0, 0
    total = lag_idx[-1] if len(lag_idx) else 0
    while r < len(lag_idx) and lag_idx[r] == 0:
        out[r, :, 0] = x
        r += 1
    while k < total:
        letters = word[(idx + taus + k) % p]
        x = tabs[letters, x]
        k += 1
        while r < len(lag_idx) and lag_idx[r] == k:
            out[r, :, 0] = x
            r += 1
    return out


def propagate(
    P: ProcessSpec,
    S: SymbolSpace,
    sigmas: Sequence,
    taus: Sequence[float],
    X0: np.ndarray,
    lags: Sequence[float],
    threads: int = 1,
) -> np.ndarray:
    """Snapshots ``out[r, i] = U_{sigma_i}(tau_i + lags[r], tau_i) X0[i]``.

    ``lags`` must be nondecreasing and nonnegative.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    N = X0.shape[0]
    if len(sigmas) != N or len(taus) != N:
        raise ValueError("sigmas, taus and initial states must have equal length")
    if X0.shape[1] != P.state_dim:
        raise ValueError(f"state dim {X0.shape[1]} does not match model dim {P.state_dim}")
    if not np.all(np.isfinite(X0)):
        raise ValueError("initial states must be finite")
    lags = np.asarray(lags, dtype=float)
    if lags.ndim != 1 or (lags.size and (lags[0] < 0 or np.any(np.diff(lags) < 0))):
        raise ValueError("lags must be nonnegative and nondecreasing")
    phases = S.phase_array(list(sigmas))
    taus = np.asarray(taus, dtype=float)
    model = P.model

    if isinstance(model, WaveModel):
        n0 = np.array([grid_index(P, t) for t in taus], dtype=np.int64)
        lag_idx = [grid_index(P, l) for l in lags]
        work = lambda lo, hi: _wave_chunk(P, S, phases[lo:hi], n0[lo:hi], X0[lo:hi], lag_idx, lo)
    elif isinstance(model, LinearModel):
        work = lambda lo, hi: _linear_chunk(P, S, phases[lo:hi], taus[lo:hi], X0[lo:hi], lags, lo)
    elif isinstance(model, FiniteMaps):
        if not isinstance(S, FiniteShift):
            raise TypeError("finite model needs a FiniteShift symbol space")
        if np.any(taus != np.round(taus)) or np.any(lags != np.round(lags)):
            raise GridError("finite processes use integer times")
        lag_idx = [int(l) for l in lags]
        work = lambda lo, hi: _finite_chunk(P, S, phases[lo:hi], taus[lo:hi], X0[lo:hi], lag_idx)
    else:
        raise TypeError(f"unsupported model {type(model).__name__}")

    bounds = [(lo, min(lo + CHUNK, N)) for lo in range(0, N, CHUNK)]
    with threadpool_limits(limits=1):
        if threads > 1 and len(bounds) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(lambda b: work(*b), bounds))
        else:
            parts = [work(*b) for b in bounds]
    return np.concatenate(parts, axis=1)


# ------------------------------------------------------------ operations

def evolve(P: ProcessSpec, S: SymbolSpace, sigma, tau: float, t: float, x) -> np.ndarray:
    """U_sigma(t, tau) x."""
    if t < tau:
        raise ValueError("evolve needs t >= tau")
    x = np.asarray(x, dtype=float).reshape(-1)
    if t == tau:
        return x.copy()
    return propagate(P, S, [sigma], [tau], x[None, :], [t - tau])[0, 0]


def evolve_cloud(P: ProcessSpec, S: SymbolSpace, sigma, tau: float, t: float, B: PointCloud,
                 threads: int = 1) -> PointCloud:
    if t < tau:
        raise ValueError("evolve needs t >= tau")
    if t == tau:
        return PointCloud(B.points.copy(), B.label)
    n = len(B)
    out = propagate(P, S, [sigma] * n, [tau] * n, B.points, [t - tau], threads=threads)[0]
    return PointCloud(out, B.label)


def skew_step(P: ProcessSpec, S: SymbolSpace, z: SkewState, h: float) -> SkewState:
    """S(h)(x, sigma) = (U_sigma(h, 0) x, T(h) sigma)."""
    if h < 0:
        raise ValueError("skew steps need h >= 0")
    if h == 0:
        return SkewState(np.asarray(z.x, float).copy(), z.sigma)
    return SkewState(evolve(P, S, z.sigma, 0.0, h, z.x), S.translate(z.sigma, h))


def _state_distance(P: ProcessSpec, a: np.ndarray, b: np.ndarray) -> float:
    if isinstance(P.model, FiniteMaps):
        return 0.0 if np.array_equal(a, b) else 1.0
    return P.metric().dist(a, b)


def cocycle_residual(P: ProcessSpec, S: SymbolSpace, sigma, tau: float, s: float, t: float, x) -> float:
    """dist(U(t, s) U(s, tau) x, U(t, tau) x)."""
    if not tau <= s <= t:
        raise ValueError("need tau <= s <= t")
    two = evolve(P, S, sigma, s, t, evolve(P, S, sigma, tau, s, x))
    one = evolve(P, S, sigma, tau, t, x)
    return _state_distance(P, two, one)


def translation_residual(P: ProcessSpec, S: SymbolSpace, sigma, h: float, tau: float, t: float, x) -> float:
    """dist(U_sigma(h + t, h + tau) x, U_{T(h) sigma}(t, tau) x)."""
    if t < tau:
        raise ValueError("need t >= tau")
    if isinstance(P.model, WaveModel):
        # shifted endpoints computed on the integer grid
        a = evolve(P, S, sigma, snap(P, h) + snap(P, tau), snap(P, h) + snap(P, t), x)
    else:
        a = evolve(P, S, sigma, h + tau, h + t, x)
    b = evolve(P, S, S.translate(sigma, h), tau, t, x)
    return _state_distance(P, a, b)


def order_ratio(P: ProcessSpec, S: SymbolSpace, sigma, tau: float, t: float, x, dt0: float) -> float:
    """|y(dt0) - y(dt0/2)| / |y(dt0/2) - y(dt0/4)| for y(dt) = U_sigma(t, tau) x.

    Approaches 2^order as dt0 -> 0 while the differences stay above rounding.
    """
    ys = []
    for k in (1, 2, 4):
        Q = ProcessSpec(P.model, dt=dt0 / k, order=P.order, guard=P.guard)
        ys.append(evolve(Q, S, sigma, tau, t, x))
    a, b = _state_distance(P, ys[0], ys[1]), _state_distance(P, ys[1], ys[2])
    return math.inf if b == 0.0 else a / b


@dataclass
class AxiomReport:
    cocycle: list[float]
    translation: list[float]
    order_ratio: float | None

    @property
    def max_residual(self) -> float:
        return max(self.cocycle + self.translation)


def axiom_sweep(P: ProcessSpec, S: SymbolSpace, x_samples: np.ndarray, n: int, horizon: float, seed: int = 0,
                order_dt: float | None = None) -> AxiomReport:
    """Cocycle and translation residuals at ``n`` random (sigma, tau, s, t, h)
    with all times inside [0, horizon]; wave times are drawn on the grid.
    ``order_dt`` adds a step-halving ratio for the time-stepped models."""
    rng = np.random.default_rng(seed)
    sigmas = S.sample(n) if isinstance(S, FiniteShift) else None
    wave = isinstance(P.model, WaveModel)
    finite = isinstance(P.model, FiniteMaps)

    def draw(lo, hi):
        if finite:
            return float(rng.integers(int(lo), int(hi) + 1))
        v = rng.uniform(lo, hi)
        return round(v / P.dt) * P.dt if wave else v

    coc, tra = [], []
    for i in range(n):
        if sigmas is not None:
            sig = sigmas[i % len(sigmas)]
        elif isinstance(S, TorusHull):
            sig = S.point(*rng.uniform(0, 2 * math.pi, S.k))
        else:
            sig = S.point(rng.uniform(0, S.period_hint()))
        x = x_samples[i % len(x_samples)]
        tau = draw(0, horizon / 3)
        t = draw(tau, horizon / 3 + tau)
        s = draw(tau, t) if t > tau else tau
        h = draw(0, horizon / 3)
        coc.append(cocycle_residual(P, S, sig, tau, s, t, x))
        tra.append(translation_residual(P, S, sig, h, tau, t, x))
    ratio = None
    if order_dt is not None and not finite:
        sig = S.point(*([0.3] * S.k)) if isinstance(S, TorusHull) else S.point(0.3)
        ratio = order_ratio(P, S, sig, 0.0, 1.0, x_samples[-1], order_dt)
    return AxiomReport(coc, tra, ratio)
