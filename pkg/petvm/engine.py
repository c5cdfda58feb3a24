"""Instruction execution and directive bookkeeping.

An :class:`Engine` owns one trace and one random generator. Every executed
instruction receives the next index; ASSUME, OBSERVE and PREDICT are kept as
directives that can later be reported on or (for OBSERVE and PREDICT)
forgotten by index or by label.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Any, Optional, Union

import numpy as np

from .config import EngineConfig, default_seed
from .exceptions import (
    ConsistencyRetriesExhausted,
    ForgetOfAssume,
    InstructionFailed,
    InvalidObservation,
    PetVMError,
    UnknownDirective,
)
from .export import export_dot, reachable_nodes, trace_summary
from .inference.compose import run_inference
from .inference.expressions import BlockSpec
from .inference.selection import select_principal_nodes
from .kernels import DeterministicKernel
from .omegadb import OmegaDB
from .regen import detach_scaffold, regen_scaffold
from .scaffold import Scaffold, construct_scaffold
from .spi.sp import SP
from .syntax import (
    Assume,
    Expression,
    Force,
    Forget,
    Infer,
    Instruction,
    Observe,
    Predict,
    Sample,
    iter_instructions,
    unparse,
)
from .trace import Trace
from .values import Value, to_json

logger = logging.getLogger(__name__)

__all__ = ["Directive", "Engine", "InstructionResult"]


@dataclass
class Directive:
    index: int
    instruction: Union[Assume, Observe, Predict]

    @property
    def label(self) -> Optional[str]:
        return self.instruction.label


@dataclass(frozen=True)
class InstructionResult:
    """Outcome of one instruction; ``value`` is None for acknowledgments."""

    index: int
    instruction: str
    value: Optional[Value] = None

    @property
    def has_value(self) -> bool:
        return self.value is not None

    def to_json(self) -> dict[str, Any]:
        return {"index": self.index, "instruction": self.instruction, "value": to_json(self.value)}


class Engine:
    """A probabilistic programming virtual machine over a single trace.

    Example:
        >>> engine = Engine(seed=42)
        >>> engine.execute_text("[ASSUME x (normal 0 1)] [OBSERVE (normal x 1) 1.0]")
        >>> engine.execute_text("[INFER (mh default one 100)] [PREDICT x]")
    """

    def __init__(self, seed: Optional[int] = None, *, config: Optional[EngineConfig] = None) -> None:
        self.config = config or EngineConfig.from_env()
        self.seed = seed if seed is not None else default_seed()
        self.trace = Trace(np.random.default_rng(self.seed), self.config)
        self.directives: dict[int, Directive] = {}
        self.labels: dict[str, int] = {}
        self.instructions_executed = 0
        self._next_index = 1

    # -- setup --------------------------------------------------------------

    def reseed(self, seed: int) -> None:
        """Reset the generator in place so that every holder of it sees the new stream."""
        self.seed = seed
        self.trace.rng.bit_generator.state = np.random.default_rng(seed).bit_generator.state

    def bind_sp(self, name: str, sp: SP) -> None:
        """Make a custom stochastic procedure available to later instructions under ``name``."""
        self.trace.bind_primitive_sp(name, sp)

    # -- execution ----------------------------------------------------------

    def execute(self, instruction: Instruction) -> InstructionResult:
        """Run one instruction.

        Raises:
            InstructionFailed: wrapping the error with the instruction's index.
        """
        index = self._next_index
        self._next_index += 1
        logger.info("Executing [%d] %s", index, instruction.keyword)
        try:
            value = self._dispatch(index, instruction)
        except PetVMError as exc:
            raise InstructionFailed(index, exc) from exc
        self.instructions_executed += 1
        return InstructionResult(index, instruction.keyword, value)

    def execute_text(self, text: str) -> list[InstructionResult]:
        return list(self.iter_execute(text))

    def iter_execute(self, text: str) -> Iterator[InstructionResult]:
        """Parse and run instructions one at a time, stopping at the first error."""
        for instruction in iter_instructions(text):
            yield self.execute(instruction)

    def _dispatch(self, index: int, instruction: Instruction) -> Optional[Value]:
        if isinstance(instruction, Assume):
            value = self.trace.eval(index, instruction.expression)
            self.trace.bind_in_global_env(instruction.name, index)
            self._record(index, instruction)
            return value
        if isinstance(instruction, Observe):
            self.trace.eval(index, instruction.expression)
            self._record(index, instruction)
            try:
                self._observe(index, instruction.value)
            except PetVMError:
                self._discard(index)
                raise
            return None
        if isinstance(instruction, Predict):
            value = self.trace.eval(index, instruction.expression)
            self._record(index, instruction)
            return value
        if isinstance(instruction, Forget):
            self.forget(instruction.target)
            return None
        if isinstance(instruction, Infer):
            run_inference(self.trace, instruction.program)
            return None
        if isinstance(instruction, Sample):
            value = self.trace.eval(index, instruction.expression)
            self.trace.uneval(index)
            return value
        if isinstance(instruction, Force):
            self.force(index, instruction.expression, instruction.value)
            return None
        raise TypeError(f"Unsupported instruction: {instruction!r}")

    def _record(self, index: int, instruction: Union[Assume, Observe, Predict]) -> None:
        self.directives[index] = Directive(index, instruction)
        if instruction.label is not None:
            self.labels[instruction.label] = index

    # -- directives ---------------------------------------------------------

    def resolve(self, target: Union[int, str]) -> int:
        if isinstance(target, str):
            if target not in self.labels:
                raise UnknownDirective(f"No directive labelled {target}")
            return self.labels[target]
        if target not in self.directives:
            raise UnknownDirective(f"No directive with index {target}")
        return target

    def forget(self, target: Union[int, str]) -> None:
        """Undo an OBSERVE or PREDICT and drop its family from the trace.

        Raises:
            UnknownDirective: nothing has that index or label.
            ForgetOfAssume: the directive is an ASSUME.
        """
        index = self.resolve(target)
        directive = self.directives[index]
        if isinstance(directive.instruction, Assume):
            raise ForgetOfAssume(f"Directive {index} is an ASSUME and cannot be forgotten")
        self._discard(index)

    def _discard(self, index: int) -> None:
        directive = self.directives.pop(index)
        if isinstance(directive.instruction, Observe):
            self.trace.unobserve(index)
        self.trace.uneval(index)
        if directive.label is not None:
            self.labels.pop(directive.label, None)

    def report(self, target: Union[int, str]) -> Any:
        """Current value of a directive's root."""
        return self.trace.extract_value(self.resolve(target))

    # -- observations -------------------------------------------------------

    def _observe(self, index: int, value: Value) -> None:
        weight = self.trace.observe(index, value)
        if weight == -math.inf:
            logger.warning("Observation [%d] has probability zero under the current trace; resimulating", index)
            self._restore_consistency()

    def _restore_consistency(self) -> None:
        retries = self.config.consistency_retries
        for attempt in range(1, retries + 1):
            if math.isfinite(self._resimulate()):
                logger.info("Found a trace consistent with the observations after %d retries", attempt)
                return
        raise ConsistencyRetriesExhausted(f"No consistent trace found in {retries} retries")

    def _resimulate(self) -> float:
        """Tear down every directive, evaluate them afresh and re-install the observations."""
        ordered = sorted(self.directives)
        for index in reversed(ordered):
            instruction = self.directives[index].instruction
            if isinstance(instruction, Observe):
                self.trace.unobserve(index)
            self.trace.uneval(index)
        names = {d.instruction.name for d in self.directives.values() if isinstance(d.instruction, Assume)}
        for name in sorted(names):
            self.trace.unbind_in_global_env(name)
        weight = 0.0
        for index in ordered:
            instruction = self.directives[index].instruction
            self.trace.eval(index, instruction.expression)
            if isinstance(instruction, Assume):
                self.trace.bind_in_global_env(instruction.name, index)
        for index in ordered:
            instruction = self.directives[index].instruction
            if isinstance(instruction, Observe):
                weight += self.trace.observe(index, instruction.value)
        return weight

    def force(self, index: int, expression: Expression, value: Value) -> None:
        """Move the random choice behind ``expression`` to ``value`` in one always-accepted step."""
        self.trace.eval(index, expression)
        try:
            root = self.trace.families[index]
            app = self.trace.get_constrainable_node(root)
            if self.trace.is_constrained_at(app):
                raise InvalidObservation(f"Cannot force {app}: it is constrained by an observation")
            psp = self.trace.psp_at(app)
            if psp.log_density(value, self.trace.args_at(app)) == -math.inf:
                logger.warning("Forcing %s to %s, which lies outside its support", app, value)
            scaffold = construct_scaffold(self.trace, [{app}])
            scaffold.lkernels[app] = DeterministicKernel(psp, value)
            detach_scaffold(self.trace, scaffold)
            regen_scaffold(self.trace, scaffold, False, OmegaDB())
        finally:
            self.trace.uneval(index)

    # -- views --------------------------------------------------------------

    def scaffold(self, scope: Value, block: BlockSpec) -> Scaffold:
        """The scaffold a transition on ``(scope, block)`` would build right now."""
        selection = select_principal_nodes(self.trace, scope, block, staged=True)
        return construct_scaffold(self.trace, selection.principal_sets)

    def trace_dot(self, scaffold: Optional[Scaffold] = None) -> str:
        return export_dot(self.trace, scaffold)

    def trace_summary(self) -> dict[str, Any]:
        return trace_summary(self.trace)

    def stats(self) -> dict[str, int]:
        counters = self.trace.stats.to_dict()
        return {
            "nodes": len(reachable_nodes(self.trace)),
            "randomChoices": self.trace.num_random_choices(),
            "directives": len(self.directives),
            "instructions": self.instructions_executed,
            **counters,
        }

    def describe(self, index: int) -> str:
        """The directive's instruction as text."""
        instruction = self.directives[index].instruction
        if isinstance(instruction, Assume):
            return f"[ASSUME {instruction.name} {unparse(instruction.expression)}]"
        if isinstance(instruction, Observe):
            return f"[OBSERVE {unparse(instruction.expression)} {instruction.value}]"
        return f"[PREDICT {unparse(instruction.expression)}]"
