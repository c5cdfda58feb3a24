"""Detaching and regenerating a scaffold.

``detach_and_extract`` walks a border group in reverse, unincorporating the
absorbing nodes and extracting the resampled region into an :class:`OmegaDB`;
``regenerate_and_attach`` walks it forward, regenerating the region (either
fresh or restored from the database) and re-attaching the absorbing nodes.
Both return log weights whose difference is the transition's acceptance ratio.

Every node visited by either walk counts once towards ``trace.stats.visits``;
detach visits a node before its parents and regeneration after them, so the
two walks visit the same nodes in opposite orders.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Optional

from . import evaluator
from .node import ApplicationNode, LookupNode, Node, RequestNode
from .omegadb import OmegaDB
from .values import SPRef

if TYPE_CHECKING:
    from .scaffold import Scaffold
    from .trace import Trace

__all__ = [
    "attach",
    "detach",
    "detach_and_extract",
    "detach_scaffold",
    "extract",
    "extract_parents",
    "regen_scaffold",
    "regenerate",
    "regenerate_and_attach",
    "regenerate_esr_parents",
    "regenerate_parents",
]


# -- regeneration -----------------------------------------------------------


def regenerate_and_attach(
    trace: Trace, border: list[Node], scaffold: Scaffold, restore: bool, db: OmegaDB
) -> float:
    weight = 0.0
    constrained: dict[Node, Any] = {}
    for node in border:
        if scaffold.is_absorbing(node):
            weight += attach(trace, node, scaffold, restore, db)
        else:
            weight += regenerate(trace, node, scaffold, restore, db)
            if node.is_observation:
                weight += evaluator.constrain_observation(trace, node, node.observed_value)
                constrained[node] = node.observed_value
    for node, value in constrained.items():
        for child in list(trace.children_at(node)):
            evaluator.propagate_constraint(trace, child, value)
    return weight


def attach(trace: Trace, node: ApplicationNode, scaffold: Scaffold, restore: bool, db: OmegaDB) -> float:
    weight = regenerate_parents(trace, node, scaffold, restore, db)
    trace.stats.visit(node)
    psp = trace.psp_at(node)
    args = trace.args_at(node)
    value = trace.ground_value_at(node)
    weight += psp.log_density(value, args)
    psp.incorporate(value, args)
    return weight


def regenerate_parents(trace: Trace, node: Node, scaffold: Scaffold, restore: bool, db: OmegaDB) -> float:
    weight = 0.0
    for parent in node.definite_parents():
        weight += regenerate(trace, parent, scaffold, restore, db)
    for parent in list(trace.esr_parents_at(node)):
        weight += regenerate(trace, parent, scaffold, restore, db)
    return weight


def regenerate_esr_parents(trace: Trace, node: Node, scaffold: Scaffold, restore: bool, db: OmegaDB) -> float:
    weight = 0.0
    for parent in list(trace.esr_parents_at(node)):
        weight += regenerate(trace, parent, scaffold, restore, db)
    return weight


def regenerate(trace: Trace, node: Node, scaffold: Scaffold, restore: bool, db: OmegaDB) -> float:
    """Regenerate ``node`` on its first reference within the scaffold and count the reference."""
    weight = 0.0
    if scaffold.is_resampling(node):
        if trace.regen_count_at(scaffold, node) == 0:
            weight += regenerate_parents(trace, node, scaffold, restore, db)
            trace.stats.visit(node)
            if isinstance(node, LookupNode):
                trace.set_value_at(node, trace.value_at(node.source_node))
            else:
                assert isinstance(node, ApplicationNode)
                weight += evaluator.apply_psp(trace, node, scaffold, restore, db)
                if isinstance(node, RequestNode):
                    weight += evaluator.eval_requests(trace, node, scaffold, restore, db)
        trace.inc_regen_count_at(scaffold, node)
    weight += _maybe_regenerate_stale_aaa(trace, node, scaffold, restore, db)
    return weight


def _maybe_regenerate_stale_aaa(trace: Trace, node: Node, scaffold: Scaffold, restore: bool, db: OmegaDB) -> float:
    # a reference to a procedure whose maker is being re-made must see the new record
    value = trace.value_at(node)
    if isinstance(value, SPRef) and value.maker_node is not node and scaffold.is_aaa(value.maker_node):
        return regenerate(trace, value.maker_node, scaffold, restore, db)
    return 0.0


# -- detach -----------------------------------------------------------------


def detach_and_extract(
    trace: Trace, border: list[Node], scaffold: Scaffold, db: Optional[OmegaDB] = None
) -> tuple[float, OmegaDB]:
    weight = 0.0
    if db is None:
        db = OmegaDB()
    for node in reversed(border):
        if scaffold.is_absorbing(node):
            weight += detach(trace, node, scaffold, db)
        else:
            if node.is_observation:
                weight += evaluator.unconstrain(trace, trace.get_constrainable_node(node))
            weight += extract(trace, node, scaffold, db)
    return weight, db


def detach(trace: Trace, node: ApplicationNode, scaffold: Scaffold, db: OmegaDB) -> float:
    trace.stats.visit(node)
    psp = trace.psp_at(node)
    args = trace.args_at(node)
    # the ground value, since a made procedure's node only holds its SPRef
    value = trace.ground_value_at(node)
    psp.unincorporate(value, args)
    weight = psp.log_density(value, args)
    weight += extract_parents(trace, node, scaffold, db)
    return weight


def extract_parents(trace: Trace, node: Node, scaffold: Scaffold, db: OmegaDB) -> float:
    weight = 0.0
    for parent in reversed(list(trace.esr_parents_at(node))):
        weight += extract(trace, parent, scaffold, db)
    for parent in reversed(node.definite_parents()):
        weight += extract(trace, parent, scaffold, db)
    return weight


def extract(trace: Trace, node: Node, scaffold: Scaffold, db: OmegaDB) -> float:
    """Drop one reference to ``node``; the last reference within the scaffold extracts it."""
    weight = 0.0
    value = trace.value_at(node)
    if isinstance(value, SPRef) and value.maker_node is not node and scaffold.is_aaa(value.maker_node):
        weight += extract(trace, value.maker_node, scaffold, db)

    if scaffold.is_resampling(node):
        trace.dec_regen_count_at(scaffold, node)
        if trace.regen_count_at(scaffold, node) < 0:
            raise AssertionError(f"Regeneration count of {node} went negative")
        if trace.regen_count_at(scaffold, node) == 0:
            trace.stats.visit(node)
            if isinstance(node, ApplicationNode):
                if isinstance(node, RequestNode):
                    weight += evaluator.uneval_requests(trace, node, scaffold, db)
                weight += evaluator.unapply_psp(trace, node, scaffold, db)
            else:
                trace.set_value_at(node, None)
            weight += extract_parents(trace, node, scaffold, db)
    return weight


# -- whole scaffolds --------------------------------------------------------


def detach_scaffold(trace: Trace, scaffold: Scaffold, db: Optional[OmegaDB] = None) -> tuple[float, OmegaDB]:
    """Detach every border group, last group first, into one database."""
    weight = 0.0
    if db is None:
        db = OmegaDB()
    for group in reversed(scaffold.border):
        w, _ = detach_and_extract(trace, group, scaffold, db)
        weight += w
    return weight, db


def regen_scaffold(trace: Trace, scaffold: Scaffold, restore: bool, db: OmegaDB) -> float:
    weight = 0.0
    for group in scaffold.border:
        weight += regenerate_and_attach(trace, group, scaffold, restore, db)
    return weight
