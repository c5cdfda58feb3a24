"""Primitive stochastic procedures and the argument and request views they see."""

from __future__ import annotations

import math
from collections.abc import Hashable
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Optional

from ..exceptions import NotAbsorbing, VMTypeError
from ..node import OutputNode
from ..values import Value

if TYPE_CHECKING:
    import numpy as np

    from ..env import Environment
    from ..node import ApplicationNode, Node
    from ..syntax import Expression
    from ..trace import Trace
    from .sp import SPAux

__all__ = [
    "EMPTY_REQUEST",
    "ESR",
    "Args",
    "DeterministicPSP",
    "ESRRefOutputPSP",
    "FunctionPSP",
    "NullRequestPSP",
    "PSP",
    "RandomPSP",
    "Request",
]


@dataclass(frozen=True, eq=False)
class ESR:
    """Exposed simulation request: evaluate ``expression`` in ``env`` as the family named ``addr``.

    ``tag`` is an optional ``(scope, block)`` pair applied to every random choice
    created while the family is evaluated.
    """

    addr: Hashable
    expression: Expression
    env: Environment
    tag: Optional[tuple[Value, Value]] = None


@dataclass(frozen=True)
class Request:
    esrs: tuple[ESR, ...] = ()
    lsrs: tuple[Hashable, ...] = ()


EMPTY_REQUEST = Request()


class Args:
    """What a PSP sees of the application it is simulating or scoring."""

    __slots__ = (
        "trace",
        "node",
        "operand_nodes",
        "operand_values",
        "env",
        "aux",
        "request",
        "esr_nodes",
        "esr_values",
        "made_aux",
    )

    def __init__(self, trace: Trace, node: ApplicationNode):
        self.trace = trace
        self.node = node
        self.operand_nodes = node.operand_nodes
        self.operand_values: list[Value] = [trace.value_at(n) for n in node.operand_nodes]
        self.env = node.env
        self.aux: Optional[SPAux] = trace.spaux_at(node)
        self.request: Optional[Request] = None
        self.esr_nodes: list[Node] = []
        self.esr_values: list[Any] = []
        self.made_aux: Optional[SPAux] = None
        if isinstance(node, OutputNode):
            self.request = trace.value_at(node.request_node)
            self.esr_nodes = list(trace.esr_parents_at(node))
            self.esr_values = [trace.value_at(p) for p in self.esr_nodes]
            self.made_aux = trace.aaa_made_aux_at(node)

    @property
    def rng(self) -> np.random.Generator:
        return self.trace.rng

    def __len__(self) -> int:
        return len(self.operand_values)

    def __getitem__(self, index: int) -> Value:
        return self.operand_values[index]


class PSP:
    """Base primitive: a simulator with optional density, statistics and kernel hooks.

    Subclasses override only what they support. The defaults describe a
    deterministic procedure that cannot report a density.
    """

    name = "psp"
    min_args = 0
    max_args: Optional[int] = None

    def check_arity(self, args: Args) -> None:
        n = len(args)
        if n < self.min_args or (self.max_args is not None and n > self.max_args):
            if self.max_args == self.min_args:
                expected = str(self.min_args)
            elif self.max_args is None:
                expected = f"at least {self.min_args}"
            else:
                expected = f"{self.min_args} to {self.max_args}"
            raise VMTypeError(f"{self.name} expects {expected} arguments, got {n}")

    def simulate(self, args: Args) -> Any:
        raise NotImplementedError

    def log_density(self, value: Any, args: Args) -> float:
        raise NotAbsorbing(f"{self.name} cannot report a log density")

    def has_log_density_bound(self) -> bool:
        return False

    def log_density_bound(self, args: Args) -> float:
        """Upper bound on ``log_density`` over every value.

        Operands that the current transition may change are ``None``; the
        bound must hold for any value they could take.
        """
        raise NotAbsorbing(f"{self.name} has no log density bound")

    def incorporate(self, value: Any, args: Args) -> None:
        pass

    def unincorporate(self, value: Any, args: Args) -> None:
        pass

    def is_random(self) -> bool:
        return False

    def can_absorb(self, trace: Trace, node: ApplicationNode, parent: Optional[Node]) -> bool:
        return False

    def children_can_aaa(self) -> bool:
        return False

    def log_density_of_counts(self, aux: SPAux) -> float:
        raise NotAbsorbing(f"{self.name} cannot score its applications as a block")

    def can_enumerate(self) -> bool:
        return False

    def enumerate_values(self, args: Args, current: Optional[Value] = None) -> list[Value]:
        """Finite support in a canonical order.

        ``current`` is the value being replaced; procedures with anonymous fresh
        values (new tables, new clusters) reuse it as the fresh value.
        """
        raise NotImplementedError(f"{self.name} has no finite support")

    def has_drift_kernel(self) -> bool:
        return False

    def drift(self, value: Value, args: Args, sigma: float) -> Value:
        raise NotImplementedError(f"{self.name} has no drift kernel")

    def variational_kernel(self, args: Args) -> Any:
        """A fresh variational kernel initialised at ``args``, or None."""
        return None

    def is_esr_reference(self) -> bool:
        return False

    def __repr__(self) -> str:
        return f"<psp {self.name}>"


class DeterministicPSP(PSP):
    """A procedure whose output is a function of its arguments; resampled, never absorbing."""

    def log_density(self, value: Any, args: Args) -> float:
        return 0.0 if value == self.simulate(args) else -math.inf


class FunctionPSP(DeterministicPSP):
    def __init__(self, name: str, fn: Callable[..., Value], min_args: int = 0, max_args: Optional[int] = None):
        self.name = name
        self.fn = fn
        self.min_args = min_args
        self.max_args = max_args

    def simulate(self, args: Args) -> Value:
        self.check_arity(args)
        return self.fn(*args.operand_values)


class RandomPSP(PSP):
    """Stochastic output PSP with a density: a random choice that can absorb changes."""

    def is_random(self) -> bool:
        return True

    def can_absorb(self, trace: Trace, node: ApplicationNode, parent: Optional[Node]) -> bool:
        return True


class NullRequestPSP(DeterministicPSP):
    name = "null_request"

    def simulate(self, args: Args) -> Request:
        return EMPTY_REQUEST


class ESRRefOutputPSP(DeterministicPSP):
    """Output PSP that passes through the value of its single requested family."""

    name = "esr_reference"

    def simulate(self, args: Args) -> Any:
        if len(args.esr_values) != 1:
            raise VMTypeError(f"Expected exactly one requested family, found {len(args.esr_values)}")
        return args.esr_values[0]

    def can_absorb(self, trace: Trace, node: ApplicationNode, parent: Optional[Node]) -> bool:
        esr_parents = trace.esr_parents_at(node)
        if esr_parents and parent is esr_parents[0]:
            return False
        return parent is not getattr(node, "request_node", None)

    def is_esr_reference(self) -> bool:
        return True
