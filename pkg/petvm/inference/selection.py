"""Choosing the principal nodes of a transition from a scope and a block specification."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from ..exceptions import UnknownBlock, UnknownScope
from .expressions import ALL, DEFAULT_SCOPE, ONE, ORDERED, BlockSpec

if TYPE_CHECKING:
    from ..node import Node
    from ..trace import Trace
    from ..values import Value

logger = logging.getLogger(__name__)

__all__ = ["Selection", "selection_log_probability", "select_principal_nodes"]


@dataclass
class Selection:
    """The outcome of picking principal nodes, with its log-probability under the current trace."""

    scope: Value
    block: BlockSpec
    blocks: list[Any] = field(default_factory=list)
    principal_sets: list[set[Node]] = field(default_factory=list)
    log_probability: float = 0.0

    @property
    def is_empty(self) -> bool:
        return not any(self.principal_sets)

    def principal_nodes(self) -> set[Node]:
        return set().union(*self.principal_sets) if self.principal_sets else set()


def selection_log_probability(trace: Trace, scope: Value, block: BlockSpec) -> float:
    """Log-probability that ``block`` selects a given block of ``scope`` on ``trace``."""
    if block.kind != ONE:
        return 0.0
    n = trace.num_blocks_in_scope(scope)
    return -math.log(n) if n > 0 else -math.inf


def select_principal_nodes(trace: Trace, scope: Value, block: BlockSpec, staged: bool = False) -> Selection:
    """Select the principal nodes named by ``(scope, block)``.

    ``one`` picks a block uniformly, ``all`` and ``ordered`` take every block and
    a literal names a single block. With ``staged`` an ``ordered`` selection
    keeps one principal set per block, sorted by block; otherwise all blocks form
    a single set.

    Raises:
        UnknownScope: a literal block names a scope without random choices.
        UnknownBlock: a literal block is not present in its scope.
    """
    selection = Selection(scope, block)
    if block.is_literal:
        if scope != DEFAULT_SCOPE and scope not in trace.scopes:
            raise UnknownScope(scope)
        selection.blocks = [block.value]
        selection.principal_sets = [trace.nodes_in_block(scope, block.value)]
        return selection

    if not trace.scope_has_entropy(scope):
        logger.debug("Scope %s has no random choices; nothing to select", scope)
        return selection

    if block.kind == ONE:
        chosen = trace.sample_block(scope)
        selection.blocks = [chosen]
        selection.principal_sets = [trace.nodes_in_block(scope, chosen)]
        selection.log_probability = selection_log_probability(trace, scope, block)
    elif block.kind in (ALL, ORDERED):
        selection.blocks = trace.blocks_in_scope(scope)
        sets = [trace.nodes_in_block(scope, b) for b in selection.blocks]
        if staged and block.kind == ORDERED:
            selection.principal_sets = sets
        else:
            selection.principal_sets = [set().union(*sets)]
    else:
        raise UnknownBlock(scope, block)
    return selection
