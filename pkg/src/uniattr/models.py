"""Concrete process families.

``LinearModel``
    u' = -lam u + f(t), componentwise.  Its unique complete bounded
    trajectory is known in integral form, which makes it the oracle for the
    attractor pipeline.

``WaveModel``
    The damped string u_tt + (1 + u^2) u_t - u_xx + u^3 - u = f on (0, L)
    with Dirichlet ends, projected on the orthonormal sine basis
    phi_j(x) = sqrt(2/L) sin(j pi x / L), j = 1..m.  A state is
    (u_1..u_m, v_1..v_m) with v = u_t.  Nonlinear terms are evaluated at
    4m interior collocation points and projected back with the trapezoid
    rule, which is exact for every product that occurs up to degree four.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate as _integrate

from .metric_sets import MetricSpec
from .symbol_space import CircleHull, SymbolSpace, TorusHull, TorusPhase


@dataclass(frozen=True)
class LinearModel:
    lam: float = 1.0
    dim: int = 1

    name = "linear"

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ValueError("decay rate must be positive")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def state_dim(self) -> int:
        return self.dim

    def metric(self) -> MetricSpec:
        return MetricSpec()

    def to_dict(self) -> dict:
        return {"name": "linear", "lam": self.lam, "dim": self.dim}


@dataclass(frozen=True)
class EnergyReport:
    total: float
    kinetic: float
    potential: float
    tail: float


@dataclass(frozen=True)
class WaveModel:
    modes: int = 16
    L: float = math.pi
    damping: bool = True

    name = "wave1d"

    def __post_init__(self) -> None:
        if self.modes < 1:
            raise ValueError("need at least one mode")
        if not self.L > 0:
            raise ValueError("domain length must be positive")

    @property
    def state_dim(self) -> int:
        return 2 * self.modes

    @property
    def n_nodes(self) -> int:
        return 4 * self.modes

    @cached_property
    def nodes(self) -> np.ndarray:
        M = self.n_nodes
        return self.L * np.arange(1, M + 1) / (M + 1)

    @cached_property
    def basis(self) -> np.ndarray:
        """(M, m) values of phi_j at the nodes."""
        j = np.arange(1, self.modes + 1)
        return math.sqrt(2.0 / self.L) * np.sin(np.outer(self.nodes, j) * (math.pi / self.L))

    @cached_property
    def basis_t(self) -> np.ndarray:
        return np.ascontiguousarray(self.basis.T)

    @cached_property
    def projector(self) -> np.ndarray:
        """(M, m) such that nodal values @ projector gives L2 coefficients."""
        return self.basis * (self.L / (self.n_nodes + 1))

    @cached_property
    def mu(self) -> np.ndarray:
        """Dirichlet Laplacian eigenvalues (j pi / L)^2."""
        return (np.arange(1, self.modes + 1) * (math.pi / self.L)) ** 2

    def energy_metric(self) -> MetricSpec:
        """Norm of H^1_0 x L^2 in coefficient form."""
        return MetricSpec.weighted(np.concatenate([self.mu, np.ones(self.modes)]))

    def weak_metric(self) -> MetricSpec:
        """Norm of L^2 x H^-1 in coefficient form."""
        return MetricSpec.weighted(np.concatenate([np.ones(self.modes), 1.0 / self.mu]))

    metric = energy_metric

    def to_dict(self) -> dict:
        return {"name": "wave1d", "modes": self.modes, "L": self.L, "damping": self.damping}

    def nodal(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.basis.T

    def pad_forcing(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, float)
        k = f.shape[-1]
        if k == self.modes:
            return f
        if k > self.modes:
            raise ValueError("forcing excites modes beyond the Galerkin truncation")
        out = np.zeros(f.shape[:-1] + (self.modes,))
        out[..., :k] = f
        return out


# ---------------------------------------------------------------- wave ops

def wave_rhs(W: WaveModel, state: np.ndarray, forcing: np.ndarray | None = None) -> np.ndarray:
    """Galerkin vector field; works row-wise on (N, 2m) arrays."""
    X = np.asarray(state, float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != W.state_dim:
        raise ValueError(f"wave state must have dim {W.state_dim}")
    m = W.modes
    U, V = X[:, :m], X[:, m:]
    u = U @ W.basis_t
    u2 = u * u
    if W.damping:
        # (1 + u^2) v + u^3 - u  ==  u^2 (u + v) - u + v
        v = V @ W.basis_t
        g = u + v
        g *= u2
        g -= u
        g += v
    else:
        g = u2 - 1.0
        g *= u
    out = np.empty_like(X)
    out[:, :m] = V
    out[:, m:] = -W.mu * U - g @ W.projector
    if forcing is not None:
        out[:, m:] += W.pad_forcing(np.atleast_2d(forcing))
    return out[0] if single else out


def wave_jvp(W: WaveModel, state: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Derivative of :func:`wave_rhs` at ``state`` along ``direction`` (forcing-free part)."""
    X = np.atleast_2d(np.asarray(state, float))
    D = np.atleast_2d(np.asarray(direction, float))
    m = W.modes
    u = X[:, :m] @ W.basis.T
    du = D[:, :m] @ W.basis.T
    dg = (3.0 * u * u - 1.0) * du
    if W.damping:
        v = X[:, m:] @ W.basis.T
        dv = D[:, m:] @ W.basis.T
        dg += 2.0 * u * du * v + (1.0 + u * u) * dv
    out = np.empty_like(D)
    out[:, :m] = D[:, m:]
    out[:, m:] = -W.mu * D[:, :m] - dg @ W.projector
    return out[0] if np.ndim(state) == 1 else out


def energy_values(W: WaveModel, states: np.ndarray) -> np.ndarray:
    """Total energy of each row of an (N, 2m) array."""
    X = np.atleast_2d(np.asarray(states, float))
    m = W.modes
    U, V = X[:, :m], X[:, m:]
    u = U @ W.basis.T
    u2 = u * u
    quad = (W.L / (W.n_nodes + 1)) * np.sum(u2 * (0.25 * u2 - 0.5), axis=1)
    return 0.5 * np.sum(V * V, axis=1) + 0.5 * np.sum(W.mu * U * U, axis=1) + quad


def energy(W: WaveModel, state: np.ndarray, cutoff: int | None = None) -> EnergyReport:
    """E = 1/2 |v|^2 + 1/2 |u_x|^2 + int (u^4/4 - u^2/2) dx, zero at the origin.

    ``tail`` is the quadratic energy 1/2 sum_{j > cutoff} (v_j^2 + mu_j u_j^2)
    carried by modes above ``cutoff`` (default m // 2).
    """
    x = np.asarray(state, float)
    if x.shape != (W.state_dim,):
        raise ValueError(f"wave state must have dim {W.state_dim}")
    m = W.modes
    U, V = x[:m], x[m:]
    kinetic = 0.5 * float(np.dot(V, V))
    total = float(energy_values(W, x)[0])
    j0 = m // 2 if cutoff is None else cutoff
    t = tail_energy(W, x, j0)
    return EnergyReport(total=total, kinetic=kinetic, potential=total - kinetic, tail=0.5 * t * t)


def weak_distance(W: WaveModel, s1: np.ndarray, s2: np.ndarray) -> np.ndarray | float:
    """Distance in L^2 x H^-1; row-wise for 2-D input."""
    d = np.asarray(s1, float) - np.asarray(s2, float)
    if d.shape[-1] != W.state_dim:
        raise ValueError(f"wave state must have dim {W.state_dim}")
    m = W.modes
    val = np.sqrt(np.sum(d[..., :m] ** 2, axis=-1) + np.sum(d[..., m:] ** 2 / W.mu, axis=-1))
    return float(val) if np.ndim(val) == 0 else val


def energy_distance(W: WaveModel, s1: np.ndarray, s2: np.ndarray) -> np.ndarray | float:
    d = np.asarray(s1, float) - np.asarray(s2, float)
    m = W.modes
    val = np.sqrt(np.sum(W.mu * d[..., :m] ** 2, axis=-1) + np.sum(d[..., m:] ** 2, axis=-1))
    return float(val) if np.ndim(val) == 0 else val


def tail_energy(W: WaveModel, state: np.ndarray, cutoff: int) -> np.ndarray | float:
    """Energy norm of the projection onto modes j > cutoff."""
    if not 1 <= cutoff <= W.modes:
        raise ValueError("cutoff must lie in [1, m]")
    x = np.asarray(state, float)
    m = W.modes
    U, V = x[..., cutoff:m], x[..., m + cutoff:]
    val = np.sqrt(np.sum(W.mu[cutoff:] * U * U, axis=-1) + np.sum(V * V, axis=-1))
    return float(val) if np.ndim(val) == 0 else val


def scale_to_energy(W: WaveModel, direction: np.ndarray, level: float) -> np.ndarray:
    """Multiple s * direction (s > 0) whose energy equals ``level`` (>= 0).

    E(s d) = q s^2 + r s^4 with r >= 0 and q = sum (v_j^2 + (mu_j - 1) u_j^2) / 2,
    which is nonnegative when L <= pi, so E is increasing in s there.  For
    longer strings q can be negative and bisection returns some crossing.
    """
    d = np.asarray(direction, float)
    if level <= 0:
        return np.zeros_like(d)
    lo, hi = 0.0, 1.0
    while energy_values(W, hi * d)[0] < level:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError("direction cannot reach the requested energy")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if energy_values(W, mid * d)[0] < level:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi * d


def energy_ball_cloud(W: WaveModel, level: float, n: int, seed: int = 0, shells=(1.0, 0.25)) -> np.ndarray:
    """Deterministic sample of {E <= level}: the origin plus ``n`` smooth
    random directions (spectral weights 1/j) scaled onto each energy shell."""
    rng = np.random.default_rng(seed)
    m = W.modes
    decay = np.concatenate([1.0 / np.arange(1, m + 1) ** 2, 1.0 / np.arange(1, m + 1)])
    pts = [np.zeros(W.state_dim)]
    dirs = rng.standard_normal((n, W.state_dim)) * decay
    for frac in shells:
        for d in dirs:
            pts.append(scale_to_energy(W, d, frac * level))
    return np.array(pts)


# ------------------------------------------------------------- linear ops

def linear_kernel_oracle(lam: float, S: SymbolSpace, sigma, t: float, dim: int | None = None) -> np.ndarray:
    """The complete bounded trajectory of u' = -lam u + f_sigma at time t,

        x(t) = int_{-inf}^{t} exp(-lam (t - s)) f_sigma(s) ds,

    by adaptive quadrature over a window long enough that the neglected
    tail weight exp(-lam W) * sup|f| / lam is below 1e-12.
    """
    if not lam > 0:
        raise ValueError("decay rate must be positive")
    probe = np.asarray(S.forcing(sigma, t), float)
    n = probe.size if dim is None else dim
    if isinstance(S, TorusHull):
        bound = float(np.sum(np.abs(S.amplitudes)))
        period = S.period_hint()
    elif isinstance(S, CircleHull):
        bound = float(np.max(np.abs(np.asarray(S.samples)))) * 2.0 + 1e-300
        period = S.period
    else:
        raise TypeError("oracle needs continuous forcing")
    if bound == 0.0:
        return np.zeros(n)
    window = max(1.0, math.log(bound / (lam * 1e-12)) / lam)
    # split into pieces of about one forcing period so quad sees smooth, short integrands
    pieces = max(1, int(math.ceil(window / (period / 4.0))))
    edges = np.linspace(0.0, window, pieces + 1)
    out = np.zeros(n)
    for c in range(n):
        def integrand(r, c=c):
            f = S.forcing(sigma, t - r)
            return math.exp(-lam * r) * (f[c] if c < f.size else 0.0)

        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = _integrate.quad(integrand, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
            total += val
        out[c] = total
    return out


def model_from_dict(d: dict):
    name = d.get("name")
    if name == "linear":
        return LinearModel(float(d.get("lam", 1.0)), int(d.get("dim", 1)))
    if name == "wave1d":
        return WaveModel(int(d.get("modes", 16)), float(d.get("L", math.pi)), bool(d.get("damping", True)))
    raise ValueError(f"unknown model {name!r}")
