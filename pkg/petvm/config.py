"""Configuration defaults for the petvm engine.

Module-level constants hold the defaults; a few of them can be overridden from
the environment so that scripted runs stay reproducible without code changes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

SEED_ENV_VAR = "PETVM_SEED"

DEFAULT_CONSISTENCY_RETRIES = 100
DEFAULT_REJECTION_ATTEMPTS = 100_000
DEFAULT_ENUMERATION_CAP = 10**6
DEFAULT_DRIFT_SIGMA = 0.5
DEFAULT_MEANFIELD_STEP_A = 0.1
DEFAULT_MEANFIELD_STEP_B = 10.0


def _int_from_env(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        return default


def default_seed() -> int | None:
    """Seed taken from ``PETVM_SEED``, or None for fresh OS entropy."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw)
    except ValueError:
        return None


@dataclass(frozen=True)
class EngineConfig:
    """Knobs shared by the evaluator, the scaffold builder and the transition operators."""

    consistency_retries: int = DEFAULT_CONSISTENCY_RETRIES
    rejection_attempts: int = DEFAULT_REJECTION_ATTEMPTS
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP
    drift_sigma: float = DEFAULT_DRIFT_SIGMA
    meanfield_step_a: float = DEFAULT_MEANFIELD_STEP_A
    meanfield_step_b: float = DEFAULT_MEANFIELD_STEP_B
    # False selects the plain Boltzmann rule over all particles, rho included.
    boosted_particle_acceptance: bool = True
    aaa_enabled: bool = True
    selection_correction: bool = True

    def __post_init__(self) -> None:
        if self.consistency_retries < 0:
            raise ValueError("consistency_retries must be non-negative")
        if self.rejection_attempts < 1:
            raise ValueError("rejection_attempts must be positive")
        if self.enumeration_cap < 1:
            raise ValueError("enumeration_cap must be positive")
        if self.drift_sigma <= 0:
            raise ValueError("drift_sigma must be positive")
        if self.meanfield_step_a <= 0 or self.meanfield_step_b <= 0:
            raise ValueError("mean-field step schedule constants must be positive")

    @classmethod
    def from_env(cls) -> EngineConfig:
        """Defaults with the environment overrides applied."""
        return cls(
            consistency_retries=_int_from_env("PETVM_CONSISTENCY_RETRIES", DEFAULT_CONSISTENCY_RETRIES),
            rejection_attempts=_int_from_env("PETVM_REJECTION_ATTEMPTS", DEFAULT_REJECTION_ATTEMPTS),
        )
