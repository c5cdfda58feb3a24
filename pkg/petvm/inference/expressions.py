"""Inference expression forms accepted by ``[INFER ...]``.

Every operator targets a scope and a block specification. The block is either
one of the keywords ``one``, ``all`` and ``ordered`` or a literal block value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from ..exceptions import ParseError
from ..values import Symbol, Value

__all__ = [
    "ALL",
    "ORDERED",
    "ONE",
    "BlockSpec",
    "Cycle",
    "DriftMH",
    "EnumerativeGibbs",
    "FuncPGibbs",
    "InferenceExpr",
    "MH",
    "MeanField",
    "Mixture",
    "PGibbs",
    "Rejection",
    "ScopedOperator",
    "DEFAULT_SCOPE",
    "LATENTS_SCOPE",
]

ONE = "one"
ALL = "all"
ORDERED = "ordered"
LITERAL = "literal"

DEFAULT_SCOPE = Symbol("default")
LATENTS_SCOPE = Symbol("latents")


@dataclass(frozen=True)
class BlockSpec:
    kind: str
    value: Optional[Value] = None

    def __str__(self) -> str:
        return self.kind if self.kind != LITERAL else str(self.value)

    @classmethod
    def literal(cls, value: Value) -> BlockSpec:
        return cls(LITERAL, value)

    @property
    def is_literal(self) -> bool:
        return self.kind == LITERAL


@dataclass(frozen=True)
class ScopedOperator:
    """Common shape of every scope-targeting operator."""

    scope: Value
    block: BlockSpec
    transitions: int

    def __post_init__(self) -> None:
        if self.transitions < 1:
            raise ParseError(f"{self.keyword} needs at least one transition, got {self.transitions}")

    keyword = "operator"


@dataclass(frozen=True)
class MH(ScopedOperator):
    keyword = "mh"


@dataclass(frozen=True)
class DriftMH(ScopedOperator):
    keyword = "drift_mh"


@dataclass(frozen=True)
class Rejection(ScopedOperator):
    keyword = "rejection"


@dataclass(frozen=True)
class EnumerativeGibbs(ScopedOperator):
    keyword = "enumerative_gibbs"


@dataclass(frozen=True)
class PGibbs(ScopedOperator):
    particles: int = 2

    keyword = "pgibbs"

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.particles < 2:
            raise ParseError(f"{self.keyword} needs at least two particles, got {self.particles}")


@dataclass(frozen=True)
class FuncPGibbs(PGibbs):
    keyword = "func_pgibbs"


@dataclass(frozen=True)
class MeanField(ScopedOperator):
    iterations: int = 0

    keyword = "meanfield"

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.iterations < 0:
            raise ParseError(f"meanfield iterations must be non-negative, got {self.iterations}")


@dataclass(frozen=True)
class Cycle:
    operators: tuple[InferenceExpr, ...]
    transitions: int

    keyword = "cycle"

    def __post_init__(self) -> None:
        if self.transitions < 1:
            raise ParseError(f"cycle needs at least one transition, got {self.transitions}")


@dataclass(frozen=True)
class Mixture:
    """Weighted choice among operators; weights are stored normalized."""

    weights: tuple[float, ...]
    operators: tuple[InferenceExpr, ...]
    transitions: int
    keyword = "mixture"

    def __post_init__(self) -> None:
        if self.transitions < 1:
            raise ParseError(f"mixture needs at least one transition, got {self.transitions}")
        if len(self.weights) != len(self.operators):
            raise ParseError("mixture needs one weight per operator")
        if not self.operators:
            raise ParseError("mixture needs at least one operator")
        if any(w <= 0 for w in self.weights):
            raise ParseError("mixture weights must be positive")
        total = sum(self.weights)
        object.__setattr__(self, "weights", tuple(w / total for w in self.weights))


InferenceExpr = Union[ScopedOperator, Cycle, Mixture]
