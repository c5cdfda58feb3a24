"""Request-based procedures: control flow, compound procedures, memoization and evaluation.

Each of these expresses its behaviour as exposed simulation requests. The
evaluator turns every request into a family (or reuses one already registered
under the same address) and wires the family root in as an ESR parent of the
application's output node.
"""

from __future__ import annotations

from collections.abc import Sequence

from ..env import Environment
from ..exceptions import VMTypeError
from ..node import OutputNode
from ..syntax import SCOPE_TAG_OPERATOR, Combination, Expression, SelfEvaluating, datum_to_expression, desugar
from ..values import Atom, EnvironmentRef, Number, SPRef, Symbol, Value, as_bool, list_items, make_list
from .psp import ESR, Args, DeterministicPSP, ESRRefOutputPSP, FunctionPSP, Request
from .sp import SP, SPRecord

__all__ = [
    "ApplyRequestPSP",
    "BranchRequestPSP",
    "CSPRequestPSP",
    "EvalRequestPSP",
    "MakeCSPOutputPSP",
    "MakeMemOutputPSP",
    "MapListOutputPSP",
    "MapListRequestPSP",
    "MemRequestPSP",
    "ScopeIncludeRequestPSP",
    "procedure_sps",
]


def _expression_of(datum: Value) -> Expression:
    return desugar(datum_to_expression(datum))


def _application(operator: Value, operands: Sequence[Value]) -> Expression:
    """An expression applying ``operator`` to already computed values."""
    if not isinstance(operator, SPRef):
        raise VMTypeError(f"Cannot apply non-procedure {operator}")
    return Combination(SelfEvaluating(operator), tuple(SelfEvaluating(v) for v in operands))


class BranchRequestPSP(DeterministicPSP):
    name = "branch"
    min_args = max_args = 3

    def simulate(self, args: Args) -> Request:
        self.check_arity(args)
        predicate = as_bool(args[0])
        chosen = args[1] if predicate else args[2]
        return Request((ESR((args.node, predicate), _expression_of(chosen), args.env),))


class CSPRequestPSP(DeterministicPSP):
    """Requests the body of a compound procedure in its closure extended with the operands."""

    name = "compound"

    def __init__(self, params: tuple[str, ...], body: Expression, env: Environment):
        self.params = params
        self.body = body
        self.env = env

    def simulate(self, args: Args) -> Request:
        if len(args) != len(self.params):
            raise VMTypeError(f"Procedure of ({' '.join(self.params)}) applied to {len(args)} arguments")
        env = self.env.extend(self.params, args.operand_nodes)
        return Request((ESR(args.node, self.body, env),))


class MakeCSPOutputPSP(DeterministicPSP):
    name = "make_csp"
    min_args = max_args = 2

    def simulate(self, args: Args) -> SPRecord:
        self.check_arity(args)
        params = []
        for item in list_items(args[0]):
            if not isinstance(item, Symbol):
                raise VMTypeError(f"Procedure parameters must be symbols, got {item}")
            params.append(item.name)
        body = _expression_of(args[1])
        return SPRecord(SP(CSPRequestPSP(tuple(params), body, args.env), ESRRefOutputPSP(), name="compound"))


class MemRequestPSP(DeterministicPSP):
    """Requests ``(f args...)`` under an address equal to the argument values."""

    name = "memoized"

    def __init__(self, procedure: SPRef):
        self.procedure = procedure

    def simulate(self, args: Args) -> Request:
        values = tuple(args.operand_values)
        return Request((ESR(values, _application(self.procedure, values), args.env),))


class MakeMemOutputPSP(DeterministicPSP):
    name = "mem"
    min_args = max_args = 1

    def simulate(self, args: Args) -> SPRecord:
        self.check_arity(args)
        procedure = args[0]
        if not isinstance(procedure, SPRef):
            raise VMTypeError(f"mem expects a procedure, got {procedure}")
        return SPRecord(SP(MemRequestPSP(procedure), ESRRefOutputPSP(), name="memoized"))


class EvalRequestPSP(DeterministicPSP):
    name = "eval"
    min_args = max_args = 2

    def simulate(self, args: Args) -> Request:
        self.check_arity(args)
        env = args[1]
        if not isinstance(env, EnvironmentRef):
            raise VMTypeError(f"eval expects an environment, got {env}")
        return Request((ESR(args.node, _expression_of(args[0]), env.env),))


class ApplyRequestPSP(DeterministicPSP):
    name = "apply"
    min_args = max_args = 2

    def simulate(self, args: Args) -> Request:
        self.check_arity(args)
        return Request((ESR(args.node, _application(args[0], list_items(args[1])), args.env),))


class MapListRequestPSP(DeterministicPSP):
    name = "map_list"
    min_args = max_args = 2

    def simulate(self, args: Args) -> Request:
        self.check_arity(args)
        procedure = args[0]
        esrs = tuple(
            ESR((args.node, i), _application(procedure, (item,)), args.env)
            for i, item in enumerate(list_items(args[1]))
        )
        return Request(esrs)


class MapListOutputPSP(DeterministicPSP):
    name = "map_list"

    def simulate(self, args: Args) -> Value:
        return make_list(args.esr_values)


def _tag_value(value: Value, what: str, allow_atoms: bool) -> Value:
    if isinstance(value, Symbol):
        return value
    if isinstance(value, Number) and value.value == int(value.value):
        return value
    if allow_atoms and isinstance(value, Atom):
        return value
    raise VMTypeError(f"{what} must be a symbol or an integer, got {value}")


class ScopeIncludeRequestPSP(DeterministicPSP):
    """Evaluates the quoted body with every random choice tagged ``(scope, block)``."""

    name = "scope_include"
    min_args = max_args = 3

    def simulate(self, args: Args) -> Request:
        self.check_arity(args)
        trace = args.trace
        for operand, what in zip(args.operand_nodes[:2], ("Scope", "Block")):
            if isinstance(operand, OutputNode) and trace.psp_at(operand).is_random():
                raise VMTypeError(f"{what} of scope_include must be computed deterministically")
        scope = _tag_value(args[0], "Scope", allow_atoms=False)
        block = _tag_value(args[1], "Block", allow_atoms=True)
        return Request((ESR(args.node, _expression_of(args[2]), args.env, (scope, block)),))


def procedure_sps() -> dict[str, SP]:
    """Fresh instances of the request-based builtins, keyed by their global names."""
    empty_env = Environment()
    return {
        "branch": SP(BranchRequestPSP(), ESRRefOutputPSP(), name="branch"),
        "make_csp": SP(None, MakeCSPOutputPSP()),
        "mem": SP(None, MakeMemOutputPSP()),
        "eval": SP(EvalRequestPSP(), ESRRefOutputPSP(), name="eval"),
        "apply": SP(ApplyRequestPSP(), ESRRefOutputPSP(), name="apply"),
        "map_list": SP(MapListRequestPSP(), MapListOutputPSP()),
        SCOPE_TAG_OPERATOR: SP(ScopeIncludeRequestPSP(), ESRRefOutputPSP(), name="scope_include"),
        "get_empty_environment": SP(
            None, FunctionPSP("get_empty_environment", lambda: EnvironmentRef(empty_env), 0, 0)
        ),
    }
