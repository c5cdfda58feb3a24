"""Custom exceptions raised by the petvm virtual machine."""

from __future__ import annotations

from typing import Any


class PetVMError(Exception):
    """Base exception for all petvm specific failures."""


# -- syntax -----------------------------------------------------------------


class ParseError(PetVMError):
    """Raised when instruction or expression text is malformed."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.message = message
        self.position = position

    def __str__(self) -> str:
        if self.position is None:
            return self.message
        return f"{self.message} (at character {self.position})"


class UnknownInstruction(ParseError):
    """Raised for a bracketed instruction whose keyword is not recognized."""


class ArityError(ParseError):
    """Raised when an inference form or special form has the wrong operand count."""


# -- evaluation -------------------------------------------------------------


class EvaluationError(PetVMError):
    """Base class for failures while building or tearing down trace fragments."""


class UnboundSymbol(EvaluationError):
    """Raised when no enclosing frame binds a symbol."""

    def __init__(self, symbol: str):
        super().__init__(f"Unbound symbol: {symbol}")
        self.symbol = symbol


class VMTypeError(EvaluationError):
    """Raised for ill-typed procedure arguments or applying a non-procedure."""


class NotAbsorbing(EvaluationError):
    """Raised when a log density is requested from a procedure that cannot report one."""


class InvalidObservation(EvaluationError):
    """Raised when an observed expression does not bottom out in a constrainable choice."""


class MissingLatent(EvaluationError):
    """Raised when restoring a latent that the latent archive does not hold."""


class DanglingRequest(EvaluationError):
    """Raised when a family still referenced by a requester is scheduled for removal."""


class StatisticsUnderflow(EvaluationError):
    """Raised when unincorporating would drive sufficient statistics negative."""


# -- scaffolds and inference ------------------------------------------------


class ScaffoldError(PetVMError):
    """Base class for scaffold construction failures."""


class CannotAbsorb(ScaffoldError):
    """Raised when a constrained choice would have to be resampled without being re-observed."""


class InferenceError(PetVMError):
    """Base class for transition operator failures."""


class UnknownScope(InferenceError):
    """Raised when an inference expression names a scope with no random choices."""

    def __init__(self, scope: Any):
        super().__init__(f"Unknown scope: {scope}")
        self.scope = scope


class UnknownBlock(InferenceError):
    """Raised when a literal block is not present in its scope."""

    def __init__(self, scope: Any, block: Any):
        super().__init__(f"Unknown block {block} in scope {scope}")
        self.scope = scope
        self.block = block


class NoDensityBound(InferenceError):
    """Raised when rejection sampling meets absorbing procedures without a density bound."""

    def __init__(self, psps: list[str]):
        super().__init__(f"Rejection needs a log density bound from: {', '.join(psps)}")
        self.psps = psps


class ComputeBudgetExceeded(InferenceError):
    """Raised when rejection sampling exhausts its attempt cap."""


class SupportTooLarge(InferenceError):
    """Raised when enumerative Gibbs would enumerate more tuples than allowed."""

    def __init__(self, size: int, cap: int):
        super().__init__(f"Enumeration over {size} value tuples exceeds the cap of {cap}")
        self.size = size
        self.cap = cap


class NonClonableAux(InferenceError):
    """Raised when a particle needs a private copy of an auxiliary store that refuses cloning."""


class BlockMembershipChanged(InferenceError):
    """Raised when a transition adds or removes random choices from the blocks it targeted."""


# -- directives -------------------------------------------------------------


class DirectiveError(PetVMError):
    """Base class for directive bookkeeping failures."""


class ForgetOfAssume(DirectiveError):
    """Raised when FORGET names an ASSUME directive."""


class UnknownDirective(DirectiveError):
    """Raised when FORGET or a report names a directive that does not exist."""


class ConsistencyRetriesExhausted(DirectiveError):
    """Raised when re-simulating the program never satisfies the observations."""


class InstructionFailed(PetVMError):
    """Wraps any error raised while executing one instruction."""

    def __init__(self, index: int, cause: PetVMError):
        super().__init__(str(cause))
        self.index = index
        self.cause = cause

    def __str__(self) -> str:
        return f"[{self.index}] {type(self.cause).__name__}: {self.cause}"
