"""Reader, printer and desugarer for the modeling and instruction languages.

The reader turns text into :mod:`petvm.values` data (numbers, booleans, atoms,
symbols and lists). Model expressions are then built from that data, so quoted
syntax and evaluated code share one representation. ``desugar`` rewrites the
special forms into applications of stochastic procedures:

- ``(lambda (x) body)`` becomes ``(make_csp (quote (x)) (quote body))``
- ``(if p a b)`` becomes ``(branch p (quote a) (quote b))``
- ``(scope_include s b body)`` becomes ``(scope_tag s b (quote body))``
- ``let``, ``and`` and ``or`` expand into the forms above
"""

from __future__ import annotations

import re
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from typing import ClassVar, Optional, Union

from .exceptions import ArityError, ParseError, UnknownInstruction
from .inference.expressions import (
    ALL,
    ONE,
    ORDERED,
    MH,
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
)
from .values import (
    Atom,
    Boolean,
    Nil,
    Number,
    Pair,
    Symbol,
    Value,
    is_list,
    list_items,
    make_list,
)

__all__ = [
    "Assume",
    "Branch",
    "Combination",
    "Expression",
    "Forget",
    "Force",
    "Infer",
    "Instruction",
    "Lambda",
    "Observe",
    "Predict",
    "Quote",
    "SCOPE_TAG_OPERATOR",
    "Sample",
    "ScopeInclude",
    "SelfEvaluating",
    "Variable",
    "datum_to_expression",
    "desugar",
    "expression_to_datum",
    "parse_datum",
    "parse_expression",
    "parse_inference_expr",
    "parse_instruction",
    "parse_scope_block",
    "parse_script",
    "unparse",
]

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_ATOM_RE = re.compile(r"^atom<(\d+)>$")
_DELIMITERS = "()[]'"

# Core operator behind scope_include. It differs from the special form so that a
# desugared body read back as a datum is never desugared a second time.
SCOPE_TAG_OPERATOR = "scope_tag"

# -- reader -----------------------------------------------------------------


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens: list[tuple[str, int]] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in _DELIMITERS:
            tokens.append((ch, i))
            i += 1
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in _DELIMITERS and text[i] != ";":
                i += 1
            tokens.append((text[start:i], start))
    return tokens


def _atom_from_token(token: str) -> Value:
    if _NUMBER_RE.match(token):
        return Number(float(token))
    if token in ("True", "true"):
        return Boolean(True)
    if token in ("False", "false"):
        return Boolean(False)
    match = _ATOM_RE.match(token)
    if match:
        return Atom(int(match.group(1)))
    return Symbol(token)


class _Reader:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def peek(self) -> tuple[str, int]:
        if self.at_end():
            raise ParseError("Unexpected end of input", len(self.text))
        return self.tokens[self.pos]

    def next(self) -> tuple[str, int]:
        token = self.peek()
        self.pos += 1
        return token

    def expect(self, expected: str) -> int:
        token, position = self.next()
        if token != expected:
            raise ParseError(f"Expected {expected!r}, found {token!r}", position)
        return position

    def read_datum(self) -> Value:
        token, position = self.next()
        if token == "(":
            items: list[Value] = []
            while True:
                if self.at_end():
                    raise ParseError("Unbalanced parenthesis", position)
                if self.peek()[0] == ")":
                    self.pos += 1
                    return make_list(items)
                items.append(self.read_datum())
        if token == "'":
            return make_list([Symbol("quote"), self.read_datum()])
        if token in ")[]":
            raise ParseError(f"Unexpected {token!r}", position)
        return _atom_from_token(token)


def parse_datum(text: str) -> Value:
    """Read exactly one datum from ``text``."""
    reader = _Reader(text)
    datum = reader.read_datum()
    if not reader.at_end():
        raise ParseError("Trailing input after datum", reader.peek()[1])
    return datum


# -- expressions ------------------------------------------------------------


class Expression:
    """Base class of model expression syntax."""

    __slots__ = ()

    def __str__(self) -> str:
        return unparse(self)


@dataclass(frozen=True)
class SelfEvaluating(Expression):
    value: Value


@dataclass(frozen=True)
class Variable(Expression):
    name: str


@dataclass(frozen=True)
class Combination(Expression):
    operator: Expression
    operands: tuple[Expression, ...]


@dataclass(frozen=True)
class Quote(Expression):
    datum: Value


@dataclass(frozen=True)
class Lambda(Expression):
    params: tuple[str, ...]
    body: Expression


@dataclass(frozen=True)
class Branch(Expression):
    predicate: Expression
    consequent: Expression
    alternate: Expression


@dataclass(frozen=True)
class ScopeInclude(Expression):
    scope: Expression
    block: Expression
    body: Expression


@dataclass(frozen=True)
class Let(Expression):
    bindings: tuple[tuple[str, Expression], ...]
    body: Expression


@dataclass(frozen=True)
class And(Expression):
    operands: tuple[Expression, ...]


@dataclass(frozen=True)
class Or(Expression):
    operands: tuple[Expression, ...]


def _require_arity(form: str, args: Sequence[Value], expected: int) -> None:
    if len(args) != expected:
        raise ArityError(f"{form} expects {expected} operands, got {len(args)}")


def _symbol_names(datum: Value, form: str) -> tuple[str, ...]:
    names = []
    for item in list_items(datum):
        if not isinstance(item, Symbol):
            raise ParseError(f"{form} parameters must be symbols, got {item}")
        names.append(item.name)
    return tuple(names)


def datum_to_expression(datum: Value) -> Expression:
    """Interpret a datum as model syntax."""
    if isinstance(datum, Symbol):
        return Variable(datum.name)
    if isinstance(datum, Nil):
        raise ParseError("Empty combination")
    if not isinstance(datum, Pair):
        return SelfEvaluating(datum)
    if not is_list(datum):
        raise ParseError(f"Improper list in expression: {datum}")
    head, *args = list_items(datum)
    if isinstance(head, Symbol):
        name = head.name
        if name == "quote":
            _require_arity("quote", args, 1)
            return Quote(args[0])
        if name == "lambda":
            _require_arity("lambda", args, 2)
            return Lambda(_symbol_names(args[0], "lambda"), datum_to_expression(args[1]))
        if name == "if":
            _require_arity("if", args, 3)
            return Branch(*(datum_to_expression(a) for a in args))
        if name == "scope_include":
            _require_arity("scope_include", args, 3)
            return ScopeInclude(*(datum_to_expression(a) for a in args))
        if name == "let":
            _require_arity("let", args, 2)
            bindings = []
            for binding in list_items(args[0]):
                parts = list_items(binding)
                if len(parts) != 2 or not isinstance(parts[0], Symbol):
                    raise ParseError(f"Malformed let binding: {binding}")
                bindings.append((parts[0].name, datum_to_expression(parts[1])))
            return Let(tuple(bindings), datum_to_expression(args[1]))
        if name == "and":
            return And(tuple(datum_to_expression(a) for a in args))
        if name == "or":
            return Or(tuple(datum_to_expression(a) for a in args))
    return Combination(datum_to_expression(head), tuple(datum_to_expression(a) for a in args))


def expression_to_datum(expr: Expression) -> Value:
    """Inverse of :func:`datum_to_expression`."""
    if isinstance(expr, SelfEvaluating):
        return expr.value
    if isinstance(expr, Variable):
        return Symbol(expr.name)
    if isinstance(expr, Quote):
        return make_list([Symbol("quote"), expr.datum])
    if isinstance(expr, Combination):
        return make_list([expression_to_datum(expr.operator), *(expression_to_datum(o) for o in expr.operands)])
    if isinstance(expr, Lambda):
        return make_list(
            [Symbol("lambda"), make_list(Symbol(p) for p in expr.params), expression_to_datum(expr.body)]
        )
    if isinstance(expr, Branch):
        return make_list(
            [Symbol("if"), *(expression_to_datum(e) for e in (expr.predicate, expr.consequent, expr.alternate))]
        )
    if isinstance(expr, ScopeInclude):
        return make_list(
            [Symbol("scope_include"), *(expression_to_datum(e) for e in (expr.scope, expr.block, expr.body))]
        )
    if isinstance(expr, Let):
        bindings = make_list(make_list([Symbol(n), expression_to_datum(e)]) for n, e in expr.bindings)
        return make_list([Symbol("let"), bindings, expression_to_datum(expr.body)])
    if isinstance(expr, And):
        return make_list([Symbol("and"), *(expression_to_datum(e) for e in expr.operands)])
    if isinstance(expr, Or):
        return make_list([Symbol("or"), *(expression_to_datum(e) for e in expr.operands)])
    raise TypeError(f"Not an expression: {expr!r}")


def parse_expression(text: str) -> Expression:
    return datum_to_expression(parse_datum(text))


def unparse(expr: Expression) -> str:
    return str(expression_to_datum(expr))


def _quoted(expr: Expression) -> Quote:
    return Quote(expression_to_datum(desugar(expr)))


def desugar(expr: Expression) -> Expression:
    """Rewrite special forms into core syntax; idempotent."""
    if isinstance(expr, (SelfEvaluating, Variable, Quote)):
        return expr
    if isinstance(expr, Combination):
        return Combination(desugar(expr.operator), tuple(desugar(o) for o in expr.operands))
    if isinstance(expr, Lambda):
        params = Quote(make_list(Symbol(p) for p in expr.params))
        return Combination(Variable("make_csp"), (params, _quoted(expr.body)))
    if isinstance(expr, Branch):
        return Combination(
            Variable("branch"),
            (desugar(expr.predicate), _quoted(expr.consequent), _quoted(expr.alternate)),
        )
    if isinstance(expr, ScopeInclude):
        return Combination(
            Variable(SCOPE_TAG_OPERATOR),
            (desugar(expr.scope), desugar(expr.block), _quoted(expr.body)),
        )
    if isinstance(expr, Let):
        names = tuple(name for name, _ in expr.bindings)
        values = tuple(value for _, value in expr.bindings)
        return desugar(Combination(Lambda(names, expr.body), values))
    if isinstance(expr, And):
        if not expr.operands:
            return SelfEvaluating(Boolean(True))
        if len(expr.operands) == 1:
            return desugar(expr.operands[0])
        rest = And(expr.operands[1:])
        return desugar(Branch(expr.operands[0], rest, SelfEvaluating(Boolean(False))))
    if isinstance(expr, Or):
        if not expr.operands:
            return SelfEvaluating(Boolean(False))
        if len(expr.operands) == 1:
            return desugar(expr.operands[0])
        rest = Or(expr.operands[1:])
        return desugar(Branch(expr.operands[0], SelfEvaluating(Boolean(True)), rest))
    raise TypeError(f"Not an expression: {expr!r}")


# -- inference expressions --------------------------------------------------

_SCOPED_FORMS: dict[str, type] = {
    "mh": MH,
    "drift_mh": DriftMH,
    "rejection": Rejection,
    "enumerative_gibbs": EnumerativeGibbs,
    "gibbs": EnumerativeGibbs,
}
_PARTICLE_FORMS: dict[str, type] = {"pgibbs": PGibbs, "func_pgibbs": FuncPGibbs}


def _unquote(datum: Value) -> Value:
    if isinstance(datum, Pair) and is_list(datum):
        items = list_items(datum)
        if len(items) == 2 and items[0] == Symbol("quote"):
            return items[1]
    return datum


def _scope_value(datum: Value) -> Value:
    datum = _unquote(datum)
    if not isinstance(datum, (Symbol, Number)):
        raise ParseError(f"Scope must be a symbol or an integer, got {datum}")
    return datum


def _block_spec(datum: Value) -> BlockSpec:
    if isinstance(datum, Symbol) and datum.name in (ONE, ALL, ORDERED):
        return BlockSpec(datum.name)
    value = _unquote(datum)
    if not isinstance(value, (Symbol, Number)):
        raise ParseError(f"Block must be one, all, ordered, a symbol or an integer, got {datum}")
    return BlockSpec.literal(value)


def _count(datum: Value, what: str) -> int:
    if not isinstance(datum, Number) or datum.value != int(datum.value):
        raise ParseError(f"{what} must be an integer, got {datum}")
    return int(datum.value)


def _weight(datum: Value) -> float:
    if not isinstance(datum, Number):
        raise ParseError(f"Mixture weight must be a number, got {datum}")
    return datum.value


def inference_from_datum(datum: Value) -> InferenceExpr:
    if not isinstance(datum, Pair) or not is_list(datum):
        raise ParseError(f"Inference expression must be a list, got {datum}")
    head, *args = list_items(datum)
    if not isinstance(head, Symbol):
        raise ParseError(f"Inference operator must be a symbol, got {head}")
    name = head.name
    if name in _SCOPED_FORMS:
        _require_arity(name, args, 3)
        return _SCOPED_FORMS[name](_scope_value(args[0]), _block_spec(args[1]), _count(args[2], "Transitions"))
    if name in _PARTICLE_FORMS:
        _require_arity(name, args, 4)
        return _PARTICLE_FORMS[name](
            scope=_scope_value(args[0]),
            block=_block_spec(args[1]),
            particles=_count(args[2], "Particle count"),
            transitions=_count(args[3], "Transitions"),
        )
    if name == "meanfield":
        _require_arity(name, args, 4)
        return MeanField(
            scope=_scope_value(args[0]),
            block=_block_spec(args[1]),
            iterations=_count(args[2], "Iterations"),
            transitions=_count(args[3], "Transitions"),
        )
    if name == "cycle":
        _require_arity(name, args, 2)
        operators = tuple(inference_from_datum(op) for op in list_items(args[0]))
        return Cycle(operators, _count(args[1], "Transitions"))
    if name == "mixture":
        _require_arity(name, args, 2)
        weights: list[float] = []
        operators: list[InferenceExpr] = []
        for entry in list_items(args[0]):
            parts = list_items(entry)
            if len(parts) != 2:
                raise ArityError(f"Mixture entries are (weight operator) pairs, got {entry}")
            weights.append(_weight(parts[0]))
            operators.append(inference_from_datum(parts[1]))
        return Mixture(tuple(weights), tuple(operators), _count(args[1], "Transitions"))
    raise ParseError(f"Unknown inference operator: {name}")


def parse_inference_expr(text: str) -> InferenceExpr:
    return inference_from_datum(parse_datum(text))


def parse_scope_block(scope: str, block: str) -> tuple[Value, BlockSpec]:
    """Read a scope and a block specification written as in an inference expression."""
    return _scope_value(parse_datum(scope)), _block_spec(parse_datum(block))


# -- instructions -----------------------------------------------------------


class Instruction:
    keyword: ClassVar[str] = ""
    label: Optional[str]


@dataclass(frozen=True)
class Assume(Instruction):
    name: str
    expression: Expression
    label: Optional[str] = None
    keyword: ClassVar[str] = "ASSUME"


@dataclass(frozen=True)
class Observe(Instruction):
    expression: Expression
    value: Value
    label: Optional[str] = None
    keyword: ClassVar[str] = "OBSERVE"


@dataclass(frozen=True)
class Predict(Instruction):
    expression: Expression
    label: Optional[str] = None
    keyword: ClassVar[str] = "PREDICT"


@dataclass(frozen=True)
class Forget(Instruction):
    target: Union[int, str]
    label: Optional[str] = None
    keyword: ClassVar[str] = "FORGET"


@dataclass(frozen=True)
class Infer(Instruction):
    program: InferenceExpr
    label: Optional[str] = None
    keyword: ClassVar[str] = "INFER"


@dataclass(frozen=True)
class Sample(Instruction):
    expression: Expression
    label: Optional[str] = None
    keyword: ClassVar[str] = "SAMPLE"


@dataclass(frozen=True)
class Force(Instruction):
    expression: Expression
    value: Value
    label: Optional[str] = None
    keyword: ClassVar[str] = "FORCE"


def _literal(datum: Value) -> Value:
    return _unquote(datum)


def _build_instruction(keyword: str, args: list[Value], label: str | None, position: int) -> Instruction:
    kw = keyword.upper()
    if kw == "ASSUME":
        _require_arity(kw, args, 2)
        if not isinstance(args[0], Symbol):
            raise ParseError(f"ASSUME needs a symbol name, got {args[0]}", position)
        return Assume(args[0].name, datum_to_expression(args[1]), label)
    if kw == "OBSERVE":
        _require_arity(kw, args, 2)
        return Observe(datum_to_expression(args[0]), _literal(args[1]), label)
    if kw == "PREDICT":
        _require_arity(kw, args, 1)
        return Predict(datum_to_expression(args[0]), label)
    if kw == "FORGET":
        _require_arity(kw, args, 1)
        target = args[0]
        if isinstance(target, Number):
            return Forget(_count(target, "FORGET index"), label)
        if isinstance(target, Symbol):
            return Forget(target.name, label)
        raise ParseError(f"FORGET needs an index or a label, got {target}", position)
    if kw == "INFER":
        _require_arity(kw, args, 1)
        return Infer(inference_from_datum(args[0]), label)
    if kw == "SAMPLE":
        _require_arity(kw, args, 1)
        return Sample(datum_to_expression(args[0]), label)
    if kw == "FORCE":
        _require_arity(kw, args, 2)
        return Force(datum_to_expression(args[0]), _literal(args[1]), label)
    raise UnknownInstruction(f"Unknown instruction: {keyword}", position)


def _read_instruction(reader: _Reader) -> Instruction:
    start = reader.expect("[")
    token, position = reader.next()
    label = None
    if token.endswith(":") and len(token) > 1:
        label = token[:-1]
        token, position = reader.next()
    if token in _DELIMITERS:
        raise ParseError(f"Expected an instruction keyword, found {token!r}", position)
    args: list[Value] = []
    while True:
        if reader.at_end():
            raise ParseError("Unbalanced bracket", start)
        if reader.peek()[0] == "]":
            reader.pos += 1
            break
        args.append(reader.read_datum())
    return _build_instruction(token, args, label, position)


def parse_instruction(text: str) -> Instruction:
    """Parse one bracketed instruction such as ``[ASSUME x (normal 0 1)]``."""
    reader = _Reader(text)
    instruction = _read_instruction(reader)
    if not reader.at_end():
        raise ParseError("Trailing input after instruction", reader.peek()[1])
    return instruction


def iter_instructions(text: str) -> Iterator[Instruction]:
    reader = _Reader(text)
    while not reader.at_end():
        yield _read_instruction(reader)


def parse_script(text: str) -> list[Instruction]:
    """Parse a whole script of whitespace separated instructions."""
    return list(iter_instructions(text))

