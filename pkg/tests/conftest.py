from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from uniattr.config import ExperimentConfig

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
GOLDEN = ROOT / "golden"
PHI = (1 + 5 ** 0.5) / 2


def load_config(name: str) -> ExperimentConfig:
    return ExperimentConfig.load(CONFIGS / f"{name}.json")


@pytest.fixture(scope="session")
def linear_circle():
    return load_config("linear_circle")


@pytest.fixture(scope="session")
def linear_zero():
    return load_config("linear_zero")


@pytest.fixture(scope="session")
def wave_golden():
    return load_config("wave_golden")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
