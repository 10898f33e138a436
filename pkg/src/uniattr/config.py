"""Experiment configuration: one JSON document per experiment."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .attractor_lab import PipelineSettings
from .models import WaveModel, model_from_dict
from .process_core import ProcessSpec
from .symbol_space import SymbolSpace, TorusHull, symbol_space_from_dict


class ConfigError(ValueError):
    pass


@dataclass
class Sampling:
    sigma_samples: int | list[int] = 16
    tau_samples: int = 2
    start_level: float = 4.0
    start_directions: int = 4
    absorbing_level: float = 1.0
    absorbing_directions: int = 2
    entry_sigma_samples: int | list[int] = 4
    lag_step: float = 0.5
    record_step: float = 0.05
    kernel_sigma_samples: int | list[int] = 16
    kernel_directions: int = 0
    sigma0: float | list[float] = 0.0
    single_tau_samples: int = 4
    m_balls: int = 2


@dataclass
class Pipeline:
    h: float = 30.0
    window: float = 2 * math.pi
    single_window: float = 2 * math.pi
    check_h: list[float] = field(default_factory=list)
    t0: float = 0.0
    T: float = 20.0
    axiom_samples: int = 4
    axiom_horizon: float = 10.0
    axiom_order_dt: float = 0.02


@dataclass
class Tolerance:
    net_eps: float = 0.02
    gap: float = 0.01
    attraction: float = 0.05
    axioms: float = 1e-12
    compare: float = 0.05
    golden: float = 0.05
    covering: float = 1e-6


@dataclass
class Budget:
    t_max: float = 40.0
    T_max: float = 80.0
    guard: float = 1e8


_BLOCKS = {"sampling": Sampling, "pipeline": Pipeline, "tolerance": Tolerance, "budget": Budget}


def _block(cls, raw: dict | None, where: str):
    raw = dict(raw or {})
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class ExperimentConfig:
    name: str
    model: dict
    symbol: dict
    dt: float = 1e-3
    order: int = 4
    sampling: Sampling = field(default_factory=Sampling)
    pipeline: Pipeline = field(default_factory=Pipeline)
    tolerance: Tolerance = field(default_factory=Tolerance)
    budget: Budget = field(default_factory=Budget)
    output: str = "out"
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    # --------------------------------------------------------- validation
    def validate(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ConfigError("name must be a nonempty string")
        if not (isinstance(self.dt, (int, float)) and self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if self.order not in (2, 4):
            raise ConfigError("order must be 2 or 4")
        for k, v in asdict(self.tolerance).items():
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"tolerance.{k} must be > 0")
        for k, v in asdict(self.budget).items():
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"budget.{k} must be > 0")
        pl = self.pipeline
        if pl.h < 0 or pl.window <= 0 or pl.single_window <= 0 or pl.T <= 0 or pl.axiom_horizon <= 0 \
                or pl.axiom_order_dt <= 0:
            raise ConfigError("pipeline horizons must be positive (h >= 0)")
        sm = self.sampling
        for k in ("tau_samples", "single_tau_samples", "m_balls"):
            if getattr(sm, k) < 1:
                raise ConfigError(f"sampling.{k} must be >= 1")
        for k in ("lag_step", "record_step", "absorbing_level", "start_level"):
            if not getattr(sm, k) > 0:
                raise ConfigError(f"sampling.{k} must be > 0")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        try:
            self.build()
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"invalid model/symbol block: {exc}") from None

    # -------------------------------------------------------- construction
    def build(self) -> tuple[ProcessSpec, SymbolSpace]:
        model = model_from_dict(self.model)
        S = symbol_space_from_dict(self.symbol)
        P = ProcessSpec(model, dt=float(self.dt), order=int(self.order), guard=float(self.budget.guard))
        if isinstance(model, WaveModel) and S.n_coeffs > model.modes:
            raise ValueError("forcing excites modes beyond the Galerkin truncation")
        if not isinstance(model, WaveModel) and S.n_coeffs != model.state_dim:
            raise ValueError("forcing dimension must match the state dimension")
        return P, S

    def settings(self) -> PipelineSettings:
        sm, pl = self.sampling, self.pipeline
        return PipelineSettings(
            sigma_samples=sm.sigma_samples, tau_samples=sm.tau_samples,
            start_level=sm.start_level, start_directions=sm.start_directions,
            absorbing_level=sm.absorbing_level, absorbing_directions=sm.absorbing_directions,
            entry_sigma_samples=sm.entry_sigma_samples, t_max=self.budget.t_max, lag_step=sm.lag_step,
            h=pl.h, window=pl.window, record_step=sm.record_step, net_eps=self.tolerance.net_eps,
            check_h=tuple(pl.check_h), seed=self.seed,
        )

    def sigma0(self, S: SymbolSpace):
        s0 = self.sampling.sigma0
        if isinstance(S, TorusHull):
            angles = s0 if isinstance(s0, list) else [s0] * S.k
            return S.point(*angles)
        if isinstance(s0, list):
            raise ConfigError("sigma0 for a circle hull is a single phase")
        return S.point(s0)

    # ------------------------------------------------------- serialization
    def to_dict(self) -> dict:
        return {
            "name": self.name, "model": self.model, "symbol": self.symbol, "dt": self.dt, "order": self.order,
            **{k: asdict(getattr(self, k)) for k in _BLOCKS},
            "output": self.output, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"name", "model", "symbol", "dt", "order", "output", "seed", *_BLOCKS}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown top-level keys {unknown}")
        for k in ("name", "model", "symbol"):
            if k not in d:
                raise ConfigError(f"missing required key {k!r}")
        blocks = {k: _block(c, d.get(k), k) for k, c in _BLOCKS.items()}
        return cls(name=d["name"], model=dict(d["model"]), symbol=dict(d["symbol"]), dt=d.get("dt", 1e-3),
                   order=d.get("order", 4), output=d.get("output", "out"), seed=d.get("seed", 0), **blocks)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.from_json(text)

    def content_hash(self) -> str:
        """Git-style blob hash of the canonical JSON, output directory excluded."""
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha1(b"blob %d\0" % len(blob) + blob).hexdigest()


def circle_samples(fn, period: float, n: int) -> list[float]:
    """Config-ready samples of a scalar periodic function."""
    return [float(fn(period * i / n)) for i in range(n)]
