"""Numerical attractor pipeline.

Every quantity here is a finite stand-in for a set-valued limit:

* uniform omega-limits pool the endpoints U_sigma(tau + lag, tau) x over
  sampled (x, sigma, tau) and lags in [h, h + window], then compress the
  pool with an eps-net;
* kernel sections are pullback images U_sigma(t0, t0 - T) B whose
  convergence is judged by the Hausdorff gap to the T/2 image;
* attraction and dissipation are tracked as curves over the lag.

Members of an ensemble are always laid out sigma-major, then tau, then the
point of the initial cloud, so results do not depend on scheduling.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .metric_sets import (
    EUCLIDEAN,
    MetricSpec,
    PointCloud,
    covering_diameter,
    eps_net,
    hausdorff,
    semidist,
)
from .models import LinearModel, WaveModel, energy_ball_cloud, energy_values
from .process_core import ProcessSpec, grid_index, propagate
from .symbol_space import SymbolSpace


class NotEnteredError(RuntimeError):
    """The sampled trajectories never settle in the target set."""


def model_hash(P: ProcessSpec, S: SymbolSpace) -> str:
    blob = json.dumps({"process": P.to_dict(), "symbol": S.to_dict()}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha1(blob.encode()).hexdigest()[:16]


@dataclass
class AttractorApprox:
    cloud: PointCloud
    meta: dict

    REQUIRED = ("n_symbols", "n_taus", "h", "window", "net_eps", "model_hash")

    def __post_init__(self) -> None:
        missing = [k for k in self.REQUIRED if self.meta.get(k) is None]
        if missing:
            raise ValueError(f"attractor metadata incomplete: {missing}")


@dataclass
class KernelSectionApprox:
    cloud: PointCloud
    sigma: object
    t0: float
    T: float
    gap: float
    converged: bool


@dataclass
class AttractionCurve:
    lags: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.lags = np.asarray(self.lags, float)
        self.values = np.asarray(self.values, float)
        if self.lags.size > 1 and np.any(np.diff(self.lags) <= 0):
            raise ValueError("lags must be strictly increasing")
        if np.any(self.values < 0):
            raise ValueError("attraction values are nonnegative")


# ----------------------------------------------------------------- targets

@dataclass(frozen=True)
class Target:
    """A closed set given by a membership test on (N, d) arrays."""

    contains: Callable[[np.ndarray], np.ndarray]
    description: str

    @classmethod
    def norm_ball(cls, radius: float, metric: MetricSpec = EUCLIDEAN) -> "Target":
        return cls(lambda X: metric.norm(X) <= radius, f"ball(r={radius!r})")

    @classmethod
    def energy_sublevel(cls, W: WaveModel, level: float) -> "Target":
        return cls(lambda X: energy_values(W, X) <= level, f"energy<={level!r}")


def absorbing_target(P: ProcessSpec, level: float) -> Target:
    """Energy sublevel for the wave model, norm ball for the others."""
    if isinstance(P.model, WaveModel):
        return Target.energy_sublevel(P.model, level)
    return Target.norm_ball(level, P.metric())


def ball_cloud(P: ProcessSpec, level: float, directions: int, seed: int = 0) -> PointCloud:
    """Deterministic sample of the absorbing-ball shape used by the model;
    ``directions == 0`` gives the center alone."""
    if directions == 0:
        return PointCloud(np.zeros((1, P.state_dim)), "center")
    if isinstance(P.model, WaveModel):
        return PointCloud(energy_ball_cloud(P.model, level, directions, seed), f"E<={level!r}")
    d = P.state_dim
    if d == 1:
        pts = np.linspace(-level, level, max(2, 2 * directions + 1))[:, None]
        return PointCloud(pts, f"|x|<={level!r}")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((directions, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = np.vstack([np.zeros((1, d)), level * dirs, 0.5 * level * dirs])
    return PointCloud(pts, f"|x|<={level!r}")


def tau_grid(P: ProcessSpec, S: SymbolSpace, n: int) -> list[float]:
    """n initial times spread over one forcing quasi-period, on the step grid."""
    if n < 1:
        raise ValueError("need at least one initial time")
    span = S.period_hint()
    taus = [span * i / n for i in range(n)]
    if isinstance(P.model, WaveModel):
        taus = [round(t / P.dt) * P.dt for t in taus]
    return taus


def lag_grid(P: ProcessSpec, start: float, stop: float, step: float) -> np.ndarray:
    """start, start + step, ... up to stop; on the integrator grid for wave1d."""
    if step <= 0:
        raise ValueError("lag step must be positive")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    lags = start + step * np.arange(max(n, 1))
    if isinstance(P.model, WaveModel):
        lags = np.array([grid_index(P, l) * P.dt for l in lags])
    return lags


# ------------------------------------------------------------------ sweeps

@dataclass
class Sweep:
    """Snapshots of every (sigma, tau, x) member at each lag.

    ``snapshots`` has shape (n_lags, n_sigma, n_tau, n_points, dim).
    """

    lags: np.ndarray
    snapshots: np.ndarray

    def pooled(self, r: int) -> np.ndarray:
        return self.snapshots[r].reshape(-1, self.snapshots.shape[-1])


def run_sweep(P: ProcessSpec, S: SymbolSpace, sigmas: Sequence, taus: Sequence[float], C: PointCloud,
              lags: Sequence[float], threads: int = 1) -> Sweep:
    ns, nt, nc = len(sigmas), len(taus), len(C)
    mem_sig = [s for s in sigmas for _ in range(nt * nc)]
    mem_tau = [t for _ in sigmas for t in taus for _ in range(nc)]
    X0 = np.tile(C.points, (ns * nt, 1))
    out = propagate(P, S, mem_sig, mem_tau, X0, lags, threads=threads)
    return Sweep(np.asarray(lags, float), out.reshape(len(lags), ns, nt, nc, C.dim))


# -------------------------------------------------------------- operations

def entering_time(P: ProcessSpec, S: SymbolSpace, sigmas: Sequence, taus: Sequence[float], C: PointCloud,
                  target: Target, t_max: float, lag_step: float, threads: int = 1,
                  sweep: Sweep | None = None) -> float | None:
    """Smallest sampled lag after which every sampled trajectory stays in
    ``target`` through ``t_max``; None when the last lag is already outside."""
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    if sweep is None:
        sweep = run_sweep(P, S, sigmas, taus, C, lag_grid(P, 0.0, t_max, lag_step), threads)
    inside = np.array([bool(np.all(target.contains(sweep.pooled(r)))) for r in range(len(sweep.lags))])
    if not inside[-1]:
        return None
    outside = np.flatnonzero(~inside)
    first = 0 if outside.size == 0 else int(outside[-1]) + 1
    return float(sweep.lags[first])


def omega_limit(P: ProcessSpec, S: SymbolSpace, sigmas: Sequence, taus: Sequence[float], C: PointCloud,
                h: float, window: float, eps: float, record_step: float | None = None,
                metric: MetricSpec | None = None, threads: int = 1, extra_h: Sequence[float] = ()) -> AttractorApprox:
    """Uniform omega-limit stand-in: pool evolved points over lags in
    [h, h + window] and every sampled (x, sigma, tau), then eps-net.

    ``extra_h`` adds further windows [h', h' + window] in the same run; the
    Hausdorff gaps between their nets and the main one are stored in
    ``meta['h_gaps']`` as convergence evidence.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    metric = metric or P.metric()
    step = record_step or window / 50.0
    starts = [h, *extra_h]
    grids = [lag_grid(P, s, s + window, step) for s in starts]
    lags = np.unique(np.concatenate(grids))
    sw = run_sweep(P, S, sigmas, taus, C, lags, threads)
    nets = []
    for g in grids:
        rows = np.searchsorted(lags, g)
        # pool member-major, lag-minor
        block = sw.snapshots[rows]  # (R, ns, nt, nc, d)
        pooled = np.moveaxis(block, 0, -2).reshape(-1, C.dim)
        nets.append(eps_net(PointCloud(pooled, "omega"), eps, metric))
    meta = {
        "n_symbols": len(sigmas), "n_taus": len(taus), "n_points": len(C), "h": float(h),
        "window": float(window), "record_step": float(step), "net_eps": float(eps),
        "model_hash": model_hash(P, S),
    }
    if extra_h:
        meta["h_gaps"] = {repr(float(s)): hausdorff(nets[0], n, metric) for s, n in zip(extra_h, nets[1:])}
    return AttractorApprox(nets[0], meta)


def attraction_curve(P: ProcessSpec, S: SymbolSpace, sigmas: Sequence, taus: Sequence[float], C: PointCloud,
                     K: PointCloud, lags: Sequence[float], metric: MetricSpec | None = None,
                     threads: int = 1, sweep: Sweep | None = None) -> AttractionCurve:
    """values[i] = max over sampled (sigma, tau) of semidist(U(tau + lag_i, tau) C, K).

    The max over members of a semidistance is the semidistance of the pooled
    images, which is what is computed.
    """
    metric = metric or P.metric()
    if sweep is None:
        sweep = run_sweep(P, S, sigmas, taus, C, lags, threads)
    vals = [semidist(PointCloud(sweep.pooled(r)), K, metric) for r in range(len(sweep.lags))]
    return AttractionCurve(sweep.lags.copy(), np.array(vals))


def dissipativity_profile(P: ProcessSpec, S: SymbolSpace, sigmas: Sequence, B: PointCloud, lags: Sequence[float],
                          m_balls: int, metric: MetricSpec | None = None, tol: float = 1e-6, threads: int = 1,
                          sweep: Sweep | None = None) -> list[tuple[float, float]]:
    """(lag, sup over sampled sigma of covering_diameter(U_sigma(lag, 0) B))."""
    metric = metric or P.metric()
    if sweep is None:
        sweep = run_sweep(P, S, sigmas, [0.0], B, lags, threads)
    prof = []
    for r, lag in enumerate(sweep.lags):
        snap = sweep.snapshots[r]
        worst = 0.0
        for s in range(snap.shape[0]):
            for t in range(snap.shape[1]):
                worst = max(worst, covering_diameter(PointCloud(snap[s, t]), m_balls, metric, tol))
        prof.append((float(lag), worst))
    return prof


def _pullback_batch(P, S, sigmas, B: PointCloud, t0, T, gap_threshold, eps, T_max, metric, threads):
    """Pullback sections for many symbols at once, doubling T per symbol."""
    if not T > 0:
        raise ValueError("pullback horizon must be positive")
    metric = metric or P.metric()
    ns, nb = len(sigmas), len(B)
    results: list[KernelSectionApprox | None] = [None] * ns

    def images(idx, horizon):
        mem_sig = [sigmas[i] for i in idx for _ in range(nb)]
        X0 = np.tile(B.points, (len(idx), 1))
        start = t0 - horizon
        out = propagate(P, S, mem_sig, [start] * len(mem_sig), X0, [horizon], threads=threads)[0]
        return out.reshape(len(idx), nb, B.dim)

    todo = list(range(ns))
    horizon = float(T)
    half = images(todo, 0.5 * horizon)
    while todo:
        full = images(todo, horizon)
        keep, keep_rows = [], []
        for row, i in enumerate(todo):
            A, Ah = PointCloud(full[row]), PointCloud(half[row])
            gap = hausdorff(A, Ah, metric)
            done = gap < gap_threshold
            if done or 2 * horizon > T_max:
                results[i] = KernelSectionApprox(eps_net(A, eps, metric), sigmas[i], float(t0), horizon, gap, done)
            else:
                keep.append(i)
                keep_rows.append(row)
        todo = keep
        half = full[keep_rows]
        horizon *= 2.0
    return results


def pullback_kernel_section(P: ProcessSpec, S: SymbolSpace, sigma, B: PointCloud, t0: float, T: float,
                            gap_threshold: float, eps: float = 0.02, T_max: float | None = None,
                            metric: MetricSpec | None = None) -> KernelSectionApprox:
    """Approximate K_sigma(t0) by U_sigma(t0, t0 - T) B, doubling T until the
    Hausdorff gap to the T/2 image drops below ``gap_threshold`` or T would
    exceed ``T_max``; an unconverged result says so."""
    T_max = T if T_max is None else T_max
    return _pullback_batch(P, S, [sigma], B, t0, T, gap_threshold, eps, T_max, metric, 1)[0]


def kernel_union(P: ProcessSpec, S: SymbolSpace, sigmas: Sequence, B: PointCloud, T: float, t0: float = 0.0,
                 gap_threshold: float = 0.01, eps: float = 0.02, T_max: float | None = None,
                 metric: MetricSpec | None = None, threads: int = 1) -> AttractorApprox:
    """Union of pullback sections over the sampled symbols, eps-net compressed."""
    T_max = T if T_max is None else T_max
    metric = metric or P.metric()
    secs = _pullback_batch(P, S, list(sigmas), B, t0, T, gap_threshold, eps, T_max, metric, threads)
    pooled = np.vstack([s.cloud.points for s in secs])
    cloud = eps_net(PointCloud(pooled, "kernel"), eps, metric)
    bad = sum(not s.converged for s in secs)
    meta = {
        "n_symbols": len(secs), "n_taus": 1, "h": float(max(s.T for s in secs)), "window": 0.0,
        "net_eps": float(eps), "model_hash": model_hash(P, S), "t0": float(t0),
        "converged": bad == 0, "unconverged": bad, "max_gap": float(max(s.gap for s in secs)),
    }
    return AttractorApprox(cloud, meta)


# ---------------------------------------------------------------- pipeline

@dataclass
class PipelineSettings:
    """Everything the attractor pipeline needs besides the process itself."""

    sigma_samples: int | Sequence[int] = 16
    tau_samples: int = 2
    start_level: float = 4.0          # initial cloud: energy level or radius
    start_directions: int = 4
    absorbing_level: float = 1.0      # E-sublevel or ball radius that must absorb
    absorbing_directions: int = 2
    entry_sigma_samples: int | Sequence[int] = 4
    t_max: float = 40.0
    lag_step: float = 0.5
    h: float = 30.0
    window: float = 2 * math.pi
    record_step: float = 0.05
    net_eps: float = 0.02
    check_h: Sequence[float] = ()
    seed: int = 0


def sample(S: SymbolSpace, spec) -> list:
    if isinstance(spec, (list, tuple)):
        return S.sample(int(np.prod(spec)), shape=[int(q) for q in spec])
    return S.sample(int(spec))


def start_cloud(P: ProcessSpec, cfg: PipelineSettings) -> PointCloud:
    return ball_cloud(P, cfg.start_level, cfg.start_directions, cfg.seed)


def entry_sweep(P: ProcessSpec, S: SymbolSpace, cfg: PipelineSettings, threads: int = 1) -> Sweep:
    """Evolution of the start cloud over [0, t_max]; shared by the entering
    time, attraction curve and dissipativity diagnostics."""
    return run_sweep(P, S, sample(S, cfg.entry_sigma_samples), tau_grid(P, S, cfg.tau_samples),
                     start_cloud(P, cfg), lag_grid(P, 0.0, cfg.t_max, cfg.lag_step), threads)


def uniform_attractor(P: ProcessSpec, S: SymbolSpace, cfg: PipelineSettings, threads: int = 1,
                      sweep: Sweep | None = None) -> AttractorApprox:
    """Absorbing-set estimate followed by the omega-limit of that set.

    Raises :class:`NotEnteredError` when the sampled start cloud is not
    absorbed within ``t_max``.  ``sweep`` reuses a precomputed
    :func:`entry_sweep`.
    """
    C0 = start_cloud(P, cfg)
    target = absorbing_target(P, cfg.absorbing_level)
    taus = tau_grid(P, S, cfg.tau_samples)
    sweep = sweep or entry_sweep(P, S, cfg, threads)
    t_e = entering_time(P, S, None, None, C0, target, cfg.t_max, cfg.lag_step, sweep=sweep)
    if t_e is None:
        raise NotEnteredError(f"start cloud not absorbed by {target.description} within t_max={cfg.t_max}")
    B = ball_cloud(P, cfg.absorbing_level, cfg.absorbing_directions, cfg.seed + 1)
    sigmas = sample(S, cfg.sigma_samples)
    approx = omega_limit(P, S, sigmas, taus, B, cfg.h, cfg.window, cfg.net_eps, cfg.record_step,
                         threads=threads, extra_h=tuple(cfg.check_h))
    approx.meta.update({"entering_time": t_e, "absorbing": target.description, "n_start_points": len(C0)})
    return approx


def compare_single_vs_hull(P: ProcessSpec, S: SymbolSpace, sigma0, cfg: PipelineSettings, *,
                           single_tau_samples: int = 4, single_window: float | None = None,
                           hull: AttractorApprox | None = None, threads: int = 1) -> dict:
    """Attractor of the single symbol (its tau-sweep runs along the orbit of
    sigma0) against the hull attractor; returns both semidistances."""
    metric = P.metric()
    hull = hull or uniform_attractor(P, S, cfg, threads)
    B = ball_cloud(P, cfg.absorbing_level, cfg.absorbing_directions, cfg.seed + 1)
    taus = tau_grid(P, S, single_tau_samples)
    single = omega_limit(P, S, [sigma0], taus, B, cfg.h, single_window or cfg.window, cfg.net_eps,
                         cfg.record_step, threads=threads)
    return {
        "single_to_hull": semidist(single.cloud, hull.cloud, metric),
        "hull_to_single": semidist(hull.cloud, single.cloud, metric),
        "single": single,
        "hull": hull,
    }


# ------------------------------------------------------- weak-norm bound

@dataclass
class PairStudy:
    """Trajectory pairs for the weak-norm continuity estimate.

    ``weak[i, r]`` is the weak distance of the pair at lag r, ``d0[i]`` the
    initial energy distance and ``gap[i, r]`` the L2-in-time forcing gap over
    [0, lag r].
    """

    lags: np.ndarray
    d0: np.ndarray
    gap: np.ndarray
    weak: np.ndarray

    def __len__(self) -> int:
        return self.d0.size

    def subset(self, idx) -> "PairStudy":
        return PairStudy(self.lags, self.d0[idx], self.gap[idx], self.weak[idx])


def weak_pair_study(P: ProcessSpec, S: TorusHull, n_pairs: int, radius: float, horizon: float,
                    record_step: float = 0.25, seed: int = 0, threads: int = 1) -> PairStudy:
    """Random pairs (x1, f1), (x2, f2) with energy norms <= radius, evolved
    from time 0; the partners are perturbed on a log scale of sizes."""
    from scipy.integrate import cumulative_trapezoid
    from .models import weak_distance

    W = P.model
    if not isinstance(W, WaveModel):
        raise TypeError("the weak-norm study needs the wave model")
    rng = np.random.default_rng(seed)
    m, d = W.modes, W.state_dim
    metric = W.energy_metric()
    decay = np.concatenate([1.0 / np.arange(1, m + 1) ** 2, 1.0 / np.arange(1, m + 1)])

    def in_ball(z, r):
        return z * (r / metric.norm(z)[0])

    X1, X2, s1, s2 = [], [], [], []
    for i in range(n_pairs):
        a = in_ball(rng.standard_normal(d) * decay, radius * rng.uniform(0.1, 1.0))
        size = 10 ** rng.uniform(-3, 0) * radius
        b = a + in_ball(rng.standard_normal(d) * decay, size)
        nb = metric.norm(b)[0]
        if nb > radius:
            b *= radius / nb
        th = rng.uniform(0, 2 * np.pi, S.k)
        dth = np.zeros(S.k) if i % 4 == 0 else rng.standard_normal(S.k) * 10 ** rng.uniform(-3, 0)
        X1.append(a); X2.append(b); s1.append(S.point(*th)); s2.append(S.point(*(th + dth)))
    lags = lag_grid(P, 0.0, horizon, record_step)
    out = propagate(P, S, s1 + s2, [0.0] * (2 * n_pairs), np.array(X1 + X2), lags, threads=threads)
    weak = np.array([weak_distance(W, out[r, :n_pairs], out[r, n_pairs:]) for r in range(len(lags))]).T
    d0 = metric.norm(np.array(X1) - np.array(X2))
    # forcing gap on a grid 10x finer than the records
    fine = np.linspace(0.0, lags[-1], 10 * (len(lags) - 1) + 1)
    ph1, ph2 = S.phase_array(s1), S.phase_array(s2)
    T = np.broadcast_to(fine, (n_pairs, fine.size))
    df = S.forcing_batch(ph1, T) - S.forcing_batch(ph2, T)
    sq = np.sum(df * df, axis=-1)
    cum = cumulative_trapezoid(sq, fine, axis=1, initial=0.0)
    gap = np.sqrt(np.maximum(cum[:, ::10], 0.0))
    return PairStudy(lags, d0, gap, weak)


def required_constant(study: PairStudy) -> np.ndarray:
    """Per (pair, lag): the least C >= 0 with weak <= C e^{C s} (d0 + gap).

    C e^{C s} is increasing in C, and C e^{C s} = q solves to C = W(q s) / s
    with the principal Lambert branch.
    """
    from scipy.special import lambertw

    q = study.weak / np.maximum(study.d0[:, None] + study.gap, 1e-300)
    s = np.broadcast_to(study.lags, q.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(s > 0, np.real(lambertw(q * s)) / np.where(s > 0, s, 1.0), q)
    return np.where(study.weak == 0, 0.0, c)


def fit_weak_constant(study: PairStudy, margin: float = 1.1) -> float:
    return float(margin * required_constant(study).max())


def weak_bound_violations(study: PairStudy, C: float) -> int:
    rhs = C * np.exp(C * study.lags)[None, :] * (study.d0[:, None] + study.gap)
    return int(np.count_nonzero(study.weak > rhs))
