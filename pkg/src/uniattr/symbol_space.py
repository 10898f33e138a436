"""Compact symbol spaces with a translation action.

Three parametrized hulls are provided:

* ``TorusHull`` -- quasi-periodic trigonometric forcing, one phase per
  frequency; the hull is the closed torus of phase vectors.
* ``CircleHull`` -- periodic forcing given by samples over one period,
  read back through trigonometric interpolation.
* ``FiniteShift`` -- the cyclic shifts of one periodic word, used by the
  integer-time finite systems.

Each space translates symbols, measures distances between them, produces
deterministic sample grids, and (for the continuous kinds) evaluates the
forcing a symbol carries at time ``t``.  Evaluation is arranged so that
``forcing(translate(s, h), t) == forcing(s, h + t)`` up to rounding.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def _wrap(x: np.ndarray | float, period: float) -> np.ndarray:
    r = np.mod(x, period)
    # np.mod can round a tiny negative up to exactly `period`
    return np.where(r >= period, 0.0, r)


def _angular(a: np.ndarray, b: np.ndarray, period: float) -> np.ndarray:
    # |a - b| is symmetric; wrapping the signed difference would not be
    d = np.mod(np.abs(np.asarray(a, float) - np.asarray(b, float)), period)
    return np.minimum(d, period - d)


@dataclass(frozen=True)
class TorusPhase:
    angles: tuple[float, ...]


@dataclass(frozen=True)
class CirclePhase:
    phase: float


@dataclass(frozen=True)
class ShiftWord:
    index: int


SymbolPoint = TorusPhase | CirclePhase | ShiftWord


class SymbolSpace:
    """Common interface; concrete spaces below."""

    point_type: type = object
    continuous = True

    def _check(self, sigma) -> None:
        if not isinstance(sigma, self.point_type):
            raise TypeError(f"{type(self).__name__} expects {self.point_type.__name__}, got {type(sigma).__name__}")

    def translate(self, sigma, h: float):
        raise NotImplementedError

    def metric(self, s1, s2) -> float:
        raise NotImplementedError

    def sample(self, n: int, shape: Sequence[int] | None = None) -> list:
        raise NotImplementedError

    def forcing(self, sigma, t: float) -> np.ndarray:
        self._check(sigma)
        return self.forcing_batch(self.phase_array([sigma]), np.array([float(t)]))[0]

    # batched interface used by the integrators
    def phase_array(self, sigmas: Sequence) -> np.ndarray:
        raise NotImplementedError

    def forcing_batch(self, phases: np.ndarray, times: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def n_coeffs(self) -> int:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class TorusHull(SymbolSpace):
    """Forcing sum_c a_c cos(w_c t + theta_c) placed on spatial mode j_c.

    The frequencies need not be rationally independent; when they are not,
    the torus is strictly larger than the hull of any single orbit.
    """

    frequencies: tuple[float, ...]
    amplitudes: tuple[float, ...]
    modes: tuple[int, ...] | None = None

    point_type = TorusPhase

    def __post_init__(self) -> None:
        w = tuple(float(v) for v in self.frequencies)
        a = tuple(float(v) for v in self.amplitudes)
        modes = tuple(int(j) for j in (self.modes if self.modes is not None else [1] * len(w)))
        if not w or len(a) != len(w) or len(modes) != len(w):
            raise ValueError("torus hull needs equally many frequencies, amplitudes and modes")
        if any(not (v > 0 and math.isfinite(v)) for v in w):
            raise ValueError("torus frequencies must be positive and finite")
        if any(not math.isfinite(v) for v in a):
            raise ValueError("torus amplitudes must be finite")
        if any(j < 1 for j in modes):
            raise ValueError("mode indices start at 1")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "modes", modes)

    @property
    def k(self) -> int:
        return len(self.frequencies)

    @property
    def n_coeffs(self) -> int:
        return max(self.modes)

    def point(self, *angles: float) -> TorusPhase:
        if len(angles) != self.k:
            raise ValueError(f"need {self.k} angles")
        return TorusPhase(tuple(float(v) for v in _wrap(np.asarray(angles, float), TWO_PI)))

    def translate(self, sigma: TorusPhase, h: float) -> TorusPhase:
        self._check(sigma)
        th = np.asarray(sigma.angles) + np.asarray(self.frequencies) * float(h)
        return TorusPhase(tuple(float(v) for v in _wrap(th, TWO_PI)))

    def metric(self, s1: TorusPhase, s2: TorusPhase) -> float:
        self._check(s1)
        self._check(s2)
        return float(np.max(_angular(np.asarray(s1.angles), np.asarray(s2.angles), TWO_PI)))

    def sample(self, n: int, shape: Sequence[int] | None = None) -> list[TorusPhase]:
        """Lattice with ceil(n**(1/k)) angles per axis, or an explicit per-axis shape."""
        if shape is None:
            if n < 1:
                raise ValueError("n must be >= 1")
            q = 1
            while q ** self.k < n:
                q += 1
            shape = [q] * self.k
        if len(shape) != self.k or any(int(q) < 1 for q in shape):
            raise ValueError("lattice shape must give a positive count per angle")
        axes = [[TWO_PI * i / int(q) for i in range(int(q))] for q in shape]
        return [TorusPhase(tuple(p)) for p in itertools.product(*axes)]

    def period_hint(self) -> float:
        """Length of one forcing quasi-period, 2 pi / min w."""
        return TWO_PI / min(self.frequencies)

    def phase_array(self, sigmas: Sequence[TorusPhase]) -> np.ndarray:
        for s in sigmas:
            self._check(s)
        return np.array([s.angles for s in sigmas], dtype=float).reshape(len(sigmas), self.k)

    def forcing_batch(self, phases: np.ndarray, times: np.ndarray) -> np.ndarray:
        """phases (N, k), times (N,) or (N, Q) -> coefficients (N, [Q,] n_coeffs)."""
        times = np.asarray(times, float)
        w = np.asarray(self.frequencies)
        a = np.asarray(self.amplitudes)
        if times.ndim == 1:
            arg = times[:, None] * w + phases
        else:
            arg = times[:, :, None] * w + phases[:, None, :]
        comp = a * np.cos(arg)
        out = np.zeros(comp.shape[:-1] + (self.n_coeffs,))
        for c, j in enumerate(self.modes):
            out[..., j - 1] += comp[..., c]
        return out

    def to_dict(self) -> dict:
        return {"kind": "torus", "frequencies": list(self.frequencies),
                "amplitudes": list(self.amplitudes), "modes": list(self.modes)}


@dataclass(frozen=True)
class CircleHull(SymbolSpace):
    """Periodic forcing from ``samples`` (n_samples, n_coeffs) taken at phases
    i * period / n_samples, evaluated by trigonometric interpolation."""

    period: float
    samples: tuple[tuple[float, ...], ...]

    point_type = CirclePhase

    def __post_init__(self) -> None:
        p = float(self.period)
        if not (p > 0 and math.isfinite(p)):
            raise ValueError("period must be positive")
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0 or not np.all(np.isfinite(arr)):
            raise ValueError("circle hull needs a finite (n_samples, n_coeffs) sample table")
        object.__setattr__(self, "period", p)
        object.__setattr__(self, "samples", tuple(tuple(float(v) for v in row) for row in arr))
        n = arr.shape[0]
        spec = np.fft.rfft(arr, axis=0) / n
        kmax = spec.shape[0] - 1
        cos_c = 2.0 * spec.real
        sin_c = -2.0 * spec.imag
        cos_c[0] = spec[0].real
        if n % 2 == 0 and kmax > 0:
            cos_c[kmax] = spec[kmax].real
            sin_c[kmax] = 0.0
        object.__setattr__(self, "_cos", cos_c)
        object.__setattr__(self, "_sin", sin_c)
        object.__setattr__(self, "_wave", TWO_PI * np.arange(kmax + 1) / p)

    @classmethod
    def from_function(cls, period: float, fn, n_samples: int) -> "CircleHull":
        ts = np.arange(n_samples) * (period / n_samples)
        rows = [np.atleast_1d(np.asarray(fn(t), float)) for t in ts]
        return cls(period, tuple(tuple(r) for r in rows))

    @property
    def n_coeffs(self) -> int:
        return len(self.samples[0])

    def point(self, phase: float) -> CirclePhase:
        return CirclePhase(float(_wrap(float(phase), self.period)))

    def translate(self, sigma: CirclePhase, h: float) -> CirclePhase:
        self._check(sigma)
        return CirclePhase(float(_wrap(sigma.phase + float(h), self.period)))

    def metric(self, s1: CirclePhase, s2: CirclePhase) -> float:
        self._check(s1)
        self._check(s2)
        return float(_angular(s1.phase, s2.phase, self.period))

    def sample(self, n: int, shape: Sequence[int] | None = None) -> list[CirclePhase]:
        if shape is not None:
            if len(shape) != 1:
                raise ValueError("circle lattice shape has one entry")
            n = int(shape[0])
        if n < 1:
            raise ValueError("n must be >= 1")
        return [CirclePhase(self.period * i / n) for i in range(n)]

    def period_hint(self) -> float:
        return self.period

    def phase_array(self, sigmas: Sequence[CirclePhase]) -> np.ndarray:
        for s in sigmas:
            self._check(s)
        return np.array([[s.phase] for s in sigmas], dtype=float).reshape(len(sigmas), 1)

    def forcing_batch(self, phases: np.ndarray, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, float)
        if times.ndim == 1:
            x = _wrap(phases[:, 0] + times, self.period)
        else:
            x = _wrap(phases[:, :1] + times, self.period)
        arg = x[..., None] * self._wave
        return np.cos(arg) @ self._cos + np.sin(arg) @ self._sin

    def to_dict(self) -> dict:
        return {"kind": "circle", "period": self.period, "samples": [list(r) for r in self.samples]}


@dataclass(frozen=True)
class FiniteShift(SymbolSpace):
    """All cyclic shifts of a periodic word over ``alphabet`` letters."""

    alphabet: int
    word: tuple[int, ...]

    point_type = ShiftWord
    continuous = False

    def __post_init__(self) -> None:
        word = tuple(int(a) for a in self.word)
        if not word:
            raise ValueError("word must be nonempty")
        if self.alphabet < 1 or any(not 0 <= a < self.alphabet for a in word):
            raise ValueError("word letters must lie in [0, alphabet)")
        object.__setattr__(self, "word", word)

    @property
    def period(self) -> int:
        return len(self.word)

    def point(self, index: int) -> ShiftWord:
        return ShiftWord(int(index) % self.period)

    def letter(self, sigma: ShiftWord, t: int) -> int:
        return self.word[(sigma.index + t) % self.period]

    def translate(self, sigma: ShiftWord, h) -> ShiftWord:
        self._check(sigma)
        if isinstance(h, float) and not h.is_integer():
            raise ValueError("shift symbols translate by integers only")
        if not isinstance(h, (int, np.integer, float)):
            raise ValueError("shift symbols translate by integers only")
        return ShiftWord((sigma.index + int(h)) % self.period)

    def metric(self, s1: ShiftWord, s2: ShiftWord) -> float:
        self._check(s1)
        self._check(s2)
        return 0.0 if s1.index == s2.index else 1.0

    def sample(self, n: int, shape: Sequence[int] | None = None) -> list[ShiftWord]:
        if n < 1:
            raise ValueError("n must be >= 1")
        return [ShiftWord(i) for i in range(min(n, self.period))]

    def forcing(self, sigma, t):
        raise TypeError("finite shift symbols carry letters, not forcing values")

    def forcing_batch(self, phases, times):
        raise TypeError("finite shift symbols carry letters, not forcing values")

    @property
    def n_coeffs(self) -> int:
        return 0

    def phase_array(self, sigmas: Sequence[ShiftWord]) -> np.ndarray:
        for s in sigmas:
            self._check(s)
        return np.array([[s.index] for s in sigmas], dtype=np.int64).reshape(len(sigmas), 1)

    def to_dict(self) -> dict:
        return {"kind": "shift", "alphabet": self.alphabet, "word": list(self.word)}


def symbol_space_from_dict(d: dict) -> SymbolSpace:
    """Build a space from the ``symbol`` block of an experiment config."""
    kind = d.get("kind")
    if kind == "torus":
        return TorusHull(tuple(d["frequencies"]), tuple(d["amplitudes"]), tuple(d["modes"]) if d.get("modes") else None)
    if kind == "circle":
        return CircleHull(float(d["period"]), tuple(tuple(r) if isinstance(r, (list, tuple)) else (r,) for r in d["samples"]))
    if kind == "shift":
        word = tuple(d["word"])
        return FiniteShift(int(d.get("alphabet", max(word) + 1)), word)
    raise ValueError(f"unknown symbol kind {kind!r}")


# module-level spellings of the space methods
def translate(S: SymbolSpace, sigma, h):
    return S.translate(sigma, h)


def symbol_metric(S: SymbolSpace, s1, s2) -> float:
    if type(s1) is not type(s2):
        raise TypeError("cannot compare symbols of different kinds")
    return S.metric(s1, s2)


def sample_symbols(S: SymbolSpace, n: int, shape: Sequence[int] | None = None) -> list:
    return S.sample(n, shape)


def eval_forcing(S: SymbolSpace, sigma, t: float) -> np.ndarray:
    return S.forcing(sigma, t)
