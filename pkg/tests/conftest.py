"""Shared fixtures for petvm tests."""

from __future__ import annotations

import numpy as np
import pytest

from petvm import Engine, EngineConfig
from petvm.trace import Trace


@pytest.fixture
def rng() -> np.random.Generator:
    """A seeded generator so that stochastic tests are reproducible."""
    return np.random.default_rng(1234)


@pytest.fixture
def trace(rng: np.random.Generator) -> Trace:
    return Trace(rng, EngineConfig())


@pytest.fixture
def engine() -> Engine:
    """A fresh engine with a fixed seed and default configuration."""
    return Engine(seed=20240601, config=EngineConfig())
