"""Lexically scoped environments mapping symbol names to trace nodes."""

from __future__ import annotations

import itertools
from collections.abc import Iterable
from typing import TYPE_CHECKING

from .exceptions import UnboundSymbol

if TYPE_CHECKING:
    from .node import Node

__all__ = ["Environment"]

_env_ids = itertools.count()


class Environment:
    """One frame of bindings plus an optional enclosing frame."""

    __slots__ = ("frame", "outer", "env_id")

    def __init__(self, outer: Environment | None = None, bindings: dict[str, Node] | None = None):
        self.frame: dict[str, Node] = dict(bindings or {})
        self.outer = outer
        self.env_id = next(_env_ids)

    def add_binding(self, symbol: str, node: Node) -> None:
        self.frame[symbol] = node

    def remove_binding(self, symbol: str) -> None:
        del self.frame[symbol]

    def find_symbol(self, symbol: str) -> Node:
        env: Environment | None = self
        while env is not None:
            node = env.frame.get(symbol)
            if node is not None:
                return node
            env = env.outer
        raise UnboundSymbol(symbol)

    def extend(self, symbols: Iterable[str], nodes: Iterable[Node]) -> Environment:
        """A child frame binding ``symbols`` pairwise to ``nodes``."""
        return Environment(self, dict(zip(symbols, nodes)))

    def __repr__(self) -> str:
        return f"Environment(id={self.env_id}, symbols={sorted(self.frame)})"
