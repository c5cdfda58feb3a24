"""Scaffold construction.

A scaffold partitions the trace around a set of principal nodes: the nodes
whose values may change (the DRG), the children that only need their densities
re-scored (absorbing), made procedures whose applications are scored as a block
(AAA), and families that may stop being requested altogether (the brush).
Construction follows the classic walk: candidate DRG, brush, border, regen
counts, then local kernels.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Optional

from .exceptions import CannotAbsorb
from .kernels import AAAKernel, DriftKernel, LocalKernel
from .node import LookupNode, Node, OutputNode, RequestNode
from .values import SPRef

if TYPE_CHECKING:
    from .trace import Trace

logger = logging.getLogger(__name__)

__all__ = [
    "Scaffold",
    "compute_regen_counts",
    "construct_scaffold",
    "find_border",
    "find_brush",
    "scaffold_to_json",
]


@dataclass
class Scaffold:
    principal_sets: list[set[Node]] = field(default_factory=lambda: [set()])
    drg: set[Node] = field(default_factory=set)
    absorbing: set[Node] = field(default_factory=set)
    aaa: set[Node] = field(default_factory=set)
    brush: set[Node] = field(default_factory=set)
    border: list[list[Node]] = field(default_factory=lambda: [[]])
    regen_counts: dict[Node, int] = field(default_factory=dict)
    lkernels: dict[Node, LocalKernel] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> Scaffold:
        """The scaffold of plain forward evaluation: nothing is resampled."""
        return cls()

    def is_resampling(self, node: Node) -> bool:
        return node in self.regen_counts

    def is_absorbing(self, node: Node) -> bool:
        return node in self.absorbing

    def is_aaa(self, node: Node) -> bool:
        return node in self.aaa

    def has_kernel(self, node: Node) -> bool:
        return node in self.lkernels

    def get_kernel(self, node: Node) -> LocalKernel:
        return self.lkernels[node]

    def border_nodes(self) -> list[Node]:
        return [node for group in self.border for node in group]

    def principal_nodes(self) -> set[Node]:
        return set().union(*self.principal_sets)

    def is_empty(self) -> bool:
        return not self.drg and not self.absorbing

    def __repr__(self) -> str:
        return (
            f"Scaffold(drg={len(self.drg)}, absorbing={len(self.absorbing)}, aaa={len(self.aaa)}, "
            f"brush={len(self.brush)}, border={[len(g) for g in self.border]})"
        )


def construct_scaffold(trace: Trace, principal_sets: list[set[Node]], drift: bool = False) -> Scaffold:
    """Build the scaffold for ``principal_sets``; one border group per set.

    Raises:
        CannotAbsorb: a constrained choice would be resampled without an
            observation in the border to re-constrain it.
    """
    if not principal_sets:
        principal_sets = [set()]
    drg: set[Node] = set()
    absorbing: set[Node] = set()
    aaa: set[Node] = set()
    for pnodes in principal_sets:
        _extend_candidate_scaffold(trace, pnodes, drg, absorbing, aaa)

    brush = find_brush(trace, drg)
    drg -= brush
    absorbing -= brush
    aaa -= brush
    border = find_border(trace, drg, absorbing, aaa)
    _check_constraints(trace, drg, absorbing, brush, border)
    regen_counts = compute_regen_counts(trace, drg, absorbing, aaa, border, brush)
    lkernels = _load_kernels(trace, drg, aaa, principal_sets, drift)
    stages = _assign_stages(trace, principal_sets, drg | absorbing)
    groups: list[list[Node]] = [[] for _ in principal_sets]
    for node in sorted(border, key=lambda n: n.node_id):
        groups[stages.get(node, 0)].append(node)

    scaffold = Scaffold(
        principal_sets=[set(p) for p in principal_sets],
        drg=drg,
        absorbing=absorbing,
        aaa=aaa,
        brush=brush,
        border=groups,
        regen_counts=regen_counts,
        lkernels=lkernels,
    )
    logger.debug("Constructed %r", scaffold)
    return scaffold


def _extend_candidate_scaffold(
    trace: Trace, pnodes: Iterable[Node], drg: set[Node], absorbing: set[Node], aaa: set[Node]
) -> None:
    queue: list[tuple[Node, bool, Optional[Node]]] = [(p, True, None) for p in sorted(pnodes, key=lambda n: n.node_id)]
    aaa_enabled = trace.config.aaa_enabled

    def resample(node: Node) -> None:
        absorbing.discard(node)
        aaa.discard(node)
        drg.add(node)
        queue.extend((child, False, node) for child in sorted(trace.children_at(node), key=lambda n: n.node_id))

    while queue:
        node, is_principal, parent = queue.pop()
        if node in drg and node not in aaa:
            continue
        if isinstance(node, LookupNode) or node.operator_node in drg:
            resample(node)
        elif node in aaa:
            continue
        elif not is_principal and trace.psp_at(node).can_absorb(trace, node, parent):
            absorbing.add(node)
        elif aaa_enabled and trace.psp_at(node).children_can_aaa():
            absorbing.discard(node)
            drg.add(node)
            aaa.add(node)
        else:
            resample(node)


def find_brush(trace: Trace, drg: set[Node]) -> set[Node]:
    """Families whose every request comes from a request node in ``drg``."""
    disable_counts: dict[Node, int] = {}
    disabled_requests: set[Node] = set()
    brush: set[Node] = set()

    def disable_requests(node: RequestNode) -> None:
        if node in disabled_requests:
            return
        disabled_requests.add(node)
        assert node.output_node is not None
        for esr_parent in trace.esr_parents_at(node.output_node):
            disable_counts[esr_parent] = disable_counts.get(esr_parent, 0) + 1
            if disable_counts[esr_parent] == trace.num_requests_at(esr_parent):
                disable_family(esr_parent)

    def disable_family(node: Node) -> None:
        if node in brush:
            return
        brush.add(node)
        if isinstance(node, OutputNode):
            brush.add(node.request_node)
            disable_requests(node.request_node)
            disable_family(node.operator_node)
            for operand_node in node.operand_nodes:
                disable_family(operand_node)

    for node in sorted(drg, key=lambda n: n.node_id):
        if isinstance(node, RequestNode):
            disable_requests(node)
    return brush


def find_border(trace: Trace, drg: set[Node], absorbing: set[Node], aaa: set[Node]) -> set[Node]:
    border = absorbing | aaa
    for node in drg - aaa:
        if not any(child in drg or child in absorbing for child in trace.children_at(node)):
            border.add(node)
    return border


def compute_regen_counts(
    trace: Trace,
    drg: set[Node],
    absorbing: set[Node],
    aaa: set[Node],
    border: set[Node],
    brush: set[Node],
) -> dict[Node, int]:
    """How many references to each DRG node a full regeneration makes."""
    counts: dict[Node, int] = {}
    for node in drg:
        if node in aaa:
            counts[node] = 1
        elif node in border:
            counts[node] = len(trace.children_at(node)) + 1
        else:
            counts[node] = len(trace.children_at(node))

    def count_reference(node: Node) -> None:
        value = trace.value_at(node)
        if isinstance(value, SPRef) and value.maker_node in aaa:
            counts[value.maker_node] += 1

    if aaa:
        for node in drg | absorbing:
            for parent in (*node.definite_parents(), *trace.esr_parents_at(node)):
                count_reference(parent)
        for node in brush:
            if isinstance(node, OutputNode):
                for esr_parent in trace.esr_parents_at(node):
                    count_reference(esr_parent)
            elif isinstance(node, LookupNode):
                count_reference(node.source_node)
    return counts


def _check_constraints(
    trace: Trace, drg: set[Node], absorbing: set[Node], brush: set[Node], border: set[Node]
) -> None:
    covered: set[Node] = set()
    for node in border:
        if node.is_observation and node not in absorbing:
            covered.update(trace.observation_chain(node))
    for node in drg | brush:
        if trace.is_constrained_at(node) and node not in covered:
            raise CannotAbsorb(f"Constrained choice {node} would be resampled without being re-observed")


def _load_kernels(
    trace: Trace, drg: set[Node], aaa: set[Node], principal_sets: list[set[Node]], drift: bool
) -> dict[Node, LocalKernel]:
    lkernels: dict[Node, LocalKernel] = {node: AAAKernel(trace.psp_at(node)) for node in aaa}
    if not drift:
        return lkernels
    principals = set().union(*principal_sets)
    for node in drg - aaa:
        if node not in principals or not isinstance(node, OutputNode) or node.is_observation:
            continue
        if node.operator_node in drg or any(operand in drg for operand in node.operand_nodes):
            continue
        psp = trace.psp_at(node)
        if psp.has_drift_kernel():
            lkernels[node] = DriftKernel(psp, trace.config.drift_sigma, trace.value_at(node))
    return lkernels


def _assign_stages(trace: Trace, principal_sets: list[set[Node]], region: set[Node]) -> dict[Node, int]:
    """A node's stage is the latest principal set it depends on within the scaffold."""
    stages: dict[Node, int] = {}
    queue: list[Node] = []
    for index, pnodes in enumerate(principal_sets):
        for node in pnodes:
            if node in region and stages.get(node, -1) < index:
                stages[node] = index
                queue.append(node)
    while queue:
        node = queue.pop()
        for child in trace.children_at(node):
            if child in region and stages.get(child, -1) < stages[node]:
                stages[child] = stages[node]
                queue.append(child)
    return stages


def scaffold_to_json(scaffold: Scaffold) -> dict[str, Any]:
    def ids(nodes: Iterable[Node]) -> list[int]:
        return sorted(n.node_id for n in nodes)

    return {
        "drg": ids(scaffold.drg),
        "absorbing": ids(scaffold.absorbing),
        "aaa": ids(scaffold.aaa),
        "brush": ids(scaffold.brush),
        "border": [[n.node_id for n in group] for group in scaffold.border],
        "regenCounts": {
            str(n.node_id): count
            for n, count in sorted(scaffold.regen_counts.items(), key=lambda kv: kv[0].node_id)
        },
    }
