"""Runtime value universe shared by the evaluator and the stochastic procedure interface.

Every datum the virtual machine manipulates is an immutable :class:`Value`.
Equality is structural, except for :class:`SPRef` and :class:`EnvironmentRef`
which compare by identity of the node or frame they name. Hashes are derived
from the same fields as equality (and from stable integer ids for the identity
variants), so set and dict iteration orders are reproducible between runs.

Quoted syntax is ordinary data: ``(quote (plus 1 2))`` evaluates to a list of a
symbol and two numbers, which is what ``eval`` and ``make_csp`` consume.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from .exceptions import VMTypeError

if TYPE_CHECKING:
    from .env import Environment

__all__ = [
    "Atom",
    "Boolean",
    "EnvironmentRef",
    "MapValue",
    "NIL",
    "Nil",
    "Number",
    "Pair",
    "SPRef",
    "Symbol",
    "Value",
    "Vector",
    "as_bool",
    "as_int",
    "as_number",
    "as_symbol_name",
    "block_sort_key",
    "is_list",
    "list_items",
    "make_list",
    "to_json",
]


class Value:
    """Base class of every runtime datum."""

    __slots__ = ()

    def to_json(self) -> Any:
        raise NotImplementedError


@dataclass(frozen=True)
class Number(Value):
    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", float(self.value))

    def to_json(self) -> Any:
        return self.value

    def __str__(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class Boolean(Value):
    value: bool

    def to_json(self) -> Any:
        return self.value

    def __str__(self) -> str:
        return "True" if self.value else "False"


@dataclass(frozen=True, order=True)
class Atom(Value):
    """Opaque discrete token; atoms are ordered by their integer identity."""

    index: int

    def to_json(self) -> Any:
        return {"atom": self.index}

    def __str__(self) -> str:
        return f"atom<{self.index}>"


@dataclass(frozen=True)
class Symbol(Value):
    name: str

    def to_json(self) -> Any:
        return self.name

    def __str__(self) -> str:
        return self.name


class Nil(Value):
    """The empty list. Use the :data:`NIL` singleton."""

    __slots__ = ()
    _instance: Nil | None = None

    def __new__(cls) -> Nil:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Nil)

    def __hash__(self) -> int:
        return hash("nil")

    def __repr__(self) -> str:
        return "NIL"

    def __str__(self) -> str:
        return "()"

    def to_json(self) -> Any:
        return []


NIL = Nil()


@dataclass(frozen=True)
class Pair(Value):
    first: Value
    rest: Value

    def to_json(self) -> Any:
        if is_list(self):
            return [to_json(item) for item in list_items(self)]
        return {"pair": [to_json(self.first), to_json(self.rest)]}

    def __str__(self) -> str:
        parts: list[str] = []
        node: Value = self
        while isinstance(node, Pair):
            parts.append(str(node.first))
            node = node.rest
        if isinstance(node, Nil):
            return "(" + " ".join(parts) + ")"
        return "(" + " ".join(parts) + " . " + str(node) + ")"


@dataclass(frozen=True)
class Vector(Value):
    """Integer-indexed immutable sequence."""

    items: tuple[Value, ...]

    def to_json(self) -> Any:
        return [to_json(item) for item in self.items]

    def __str__(self) -> str:
        return "(vector " + " ".join(str(item) for item in self.items) + ")"


class MapValue(Value):
    """Value-keyed associative container."""

    __slots__ = ("_items",)

    def __init__(self, items: Mapping[Value, Value] | Iterable[tuple[Value, Value]] = ()):
        self._items: dict[Value, Value] = dict(items)

    def lookup(self, key: Value) -> Value:
        try:
            return self._items[key]
        except KeyError:
            raise VMTypeError(f"Key {key} not found in dict") from None

    def contains(self, key: Value) -> bool:
        return key in self._items

    def items(self) -> Iterator[tuple[Value, Value]]:
        return iter(self._items.items())

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MapValue) and self._items == other._items

    def __hash__(self) -> int:
        return hash(frozenset(self._items.items()))

    def __repr__(self) -> str:
        return f"MapValue({self._items!r})"

    def __str__(self) -> str:
        keys = " ".join(str(k) for k in self._items)
        values = " ".join(str(v) for v in self._items.values())
        return f"(dict (list {keys}) (list {values}))"

    def to_json(self) -> Any:
        return {"map": [[to_json(k), to_json(v)] for k, v in self._items.items()]}


class EnvironmentRef(Value):
    """First-class handle on an environment frame; compares by frame identity."""

    __slots__ = ("env",)

    def __init__(self, env: Environment):
        self.env = env

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EnvironmentRef) and other.env is self.env

    def __hash__(self) -> int:
        return hash(("env", self.env.env_id))

    def __repr__(self) -> str:
        return f"EnvironmentRef({self.env.env_id})"

    def __str__(self) -> str:
        return f"<environment {self.env.env_id}>"

    def to_json(self) -> Any:
        return {"environment": self.env.env_id}


class SPRef(Value):
    """Handle naming the maker node of a stochastic procedure."""

    __slots__ = ("maker_node",)

    def __init__(self, maker_node: Any):
        self.maker_node = maker_node

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SPRef) and other.maker_node is self.maker_node

    def __hash__(self) -> int:
        return hash(("sp", self.maker_node.node_id))

    def __repr__(self) -> str:
        return f"SPRef({self.maker_node.node_id})"

    def __str__(self) -> str:
        return f"<procedure {self.maker_node.node_id}>"

    def to_json(self) -> Any:
        return {"sp": str(self.maker_node.node_id)}


# -- helpers ----------------------------------------------------------------


def make_list(items: Iterable[Value]) -> Value:
    result: Value = NIL
    for item in reversed(list(items)):
        result = Pair(item, result)
    return result


def is_list(value: Value) -> bool:
    while isinstance(value, Pair):
        value = value.rest
    return isinstance(value, Nil)


def list_items(value: Value) -> list[Value]:
    """Elements of a proper list or a vector."""
    if isinstance(value, Vector):
        return list(value.items)
    items: list[Value] = []
    while isinstance(value, Pair):
        items.append(value.first)
        value = value.rest
    if not isinstance(value, Nil):
        raise VMTypeError(f"Expected a proper list, got {value}")
    return items


def to_json(value: Any) -> Any:
    if isinstance(value, Value):
        return value.to_json()
    return str(value)


def as_number(value: Value) -> float:
    if not isinstance(value, Number):
        raise VMTypeError(f"Expected a number, got {value}")
    return value.value


def as_int(value: Value) -> int:
    number = as_number(value)
    if not math.isfinite(number) or number != int(number):
        raise VMTypeError(f"Expected an integer, got {value}")
    return int(number)


def as_bool(value: Value) -> bool:
    if not isinstance(value, Boolean):
        raise VMTypeError(f"Expected a boolean, got {value}")
    return value.value


def as_symbol_name(value: Value) -> str:
    if not isinstance(value, Symbol):
        raise VMTypeError(f"Expected a symbol, got {value}")
    return value.name


def block_sort_key(value: Value) -> tuple[int, Any]:
    """Canonical order for blocks: numbers ascending, then symbols lexically, then atoms."""
    if isinstance(value, Number):
        return (0, value.value)
    if isinstance(value, Symbol):
        return (1, value.name)
    if isinstance(value, Atom):
        return (2, value.index)
    return (3, str(value))
