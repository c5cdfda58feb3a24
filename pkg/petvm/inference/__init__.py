"""Transition operators over scaffolds and the inference expression forms that name them."""

from .expressions import (
    ALL,
    DEFAULT_SCOPE,
    LATENTS_SCOPE,
    MH,
    ONE,
    ORDERED,
    BlockSpec,
    Cycle,
    DriftMH,
    EnumerativeGibbs,
    FuncPGibbs,
    InferenceExpr,
    MeanField,
    Mixture,
    PGibbs,
    Rejection,
    ScopedOperator,
)

__all__ = [
    "ALL",
    "DEFAULT_SCOPE",
    "LATENTS_SCOPE",
    "MH",
    "ONE",
    "ORDERED",
    "BlockSpec",
    "Cycle",
    "DriftMH",
    "EnumerativeGibbs",
    "FuncPGibbs",
    "InferenceExpr",
    "MeanField",
    "Mixture",
    "PGibbs",
    "Rejection",
    "ScopedOperator",
]
