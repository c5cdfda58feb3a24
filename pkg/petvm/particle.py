"""Copy-on-write views of a trace for running alternative regenerations side by side.

A :class:`Particle` records every write the regenerator makes in overlays on
top of a base :class:`~petvm.trace.Trace`; reads consult the overlays first and
fall back to the base. Procedure stores are cloned on first access. Particles
only ever grow a trace, so the detach-side operations are not supported.
``commit`` writes the overlays into the base trace.
"""

from __future__ import annotations

import logging
from collections.abc import Hashable, Iterable
from typing import TYPE_CHECKING, Any, Optional

from .exceptions import NonClonableAux, VMTypeError
from .trace import Trace

if TYPE_CHECKING:
    from .node import Node
    from .scaffold import Scaffold
    from .spi.sp import SPAux, SPRecord

logger = logging.getLogger(__name__)

__all__ = ["Particle"]

_DISCARDED = object()


def _clone_aux(aux: Optional[SPAux], node: Node) -> Optional[SPAux]:
    if aux is None:
        return None
    if not aux.clonable:
        raise NonClonableAux(f"The procedure made at {node} keeps a store that cannot be cloned")
    return aux.clone()


class Particle(Trace):
    def __init__(self, source: Trace):
        # shares configuration and bookkeeping with the base; owns only overlays
        base = source.base if isinstance(source, Particle) else source
        self.base = base
        self.rng = base.rng
        self.config = base.config
        self.stats = base.stats
        self.global_env = base.global_env
        self.families = base.families
        self._node_ids = base._node_ids

        self.weight = 0.0
        self._values: dict[Node, Any] = {}
        self._children: dict[Node, set[Node]] = {}
        self._esr_parents: dict[Node, list[Node]] = {}
        self._num_requests: dict[Node, int] = {}
        self._regen_counts: dict[Node, int] = {}
        self._regen_scaffold: Optional[Scaffold] = None
        self._made_records: dict[Node, Optional[SPRecord]] = {}
        self._made_auxes: dict[Node, Optional[SPAux]] = {}
        self._made_families: dict[Node, dict[Hashable, Node]] = {}
        self._aaa_auxes: dict[Node, Any] = {}
        self._constrained: dict[Node, bool] = {}
        self._ops: list[tuple[str, Node]] = []

        if isinstance(source, Particle):
            self._copy_overlays(source)

    def _copy_overlays(self, other: Particle) -> None:
        self.weight = other.weight
        self._values = dict(other._values)
        self._children = {node: set(children) for node, children in other._children.items()}
        self._esr_parents = {node: list(parents) for node, parents in other._esr_parents.items()}
        self._num_requests = dict(other._num_requests)
        self._regen_counts = dict(other._regen_counts)
        self._regen_scaffold = other._regen_scaffold
        self._made_records = {
            node: record.clone() if record is not None else None for node, record in other._made_records.items()
        }
        self._made_auxes = {node: _clone_aux(aux, node) for node, aux in other._made_auxes.items()}
        self._made_families = {node: dict(families) for node, families in other._made_families.items()}
        self._aaa_auxes = {
            node: aux if aux is _DISCARDED else _clone_aux(aux, node) for node, aux in other._aaa_auxes.items()
        }
        self._constrained = dict(other._constrained)
        self._ops = list(other._ops)

    # -- per-node state -----------------------------------------------------

    def value_at(self, node: Node) -> Any:
        if node in self._values:
            return self._values[node]
        return node.value

    def set_value_at(self, node: Node, value: Any) -> None:
        self._values[node] = value

    def children_at(self, node: Node) -> Iterable[Node]:
        added = self._children.get(node)
        return node.children | added if added else node.children

    def add_child_at(self, node: Node, child: Node) -> None:
        self._children.setdefault(node, set()).add(child)

    def remove_child_at(self, node: Node, child: Node) -> None:
        raise NotImplementedError("Particles cannot detach nodes")

    def esr_parents_at(self, node: Node) -> list[Node]:
        return self._esr_parents.get(node, node.esr_parents)

    def append_esr_parent_at(self, node: Node, parent: Node) -> None:
        if node not in self._esr_parents:
            self._esr_parents[node] = list(node.esr_parents)
        self._esr_parents[node].append(parent)

    def pop_esr_parent_at(self, node: Node) -> Node:
        raise NotImplementedError("Particles cannot detach nodes")

    def num_requests_at(self, node: Node) -> int:
        return self._num_requests.get(node, node.num_requests)

    def inc_requests_at(self, node: Node) -> None:
        self._num_requests[node] = self.num_requests_at(node) + 1

    def dec_requests_at(self, node: Node) -> None:
        raise NotImplementedError("Particles cannot detach nodes")

    def regen_count_at(self, scaffold: Scaffold, node: Node) -> int:
        return self._regen_counts.get(node, scaffold.regen_counts[node])

    def inc_regen_count_at(self, scaffold: Scaffold, node: Node) -> None:
        self._regen_scaffold = scaffold
        self._regen_counts[node] = self.regen_count_at(scaffold, node) + 1

    def dec_regen_count_at(self, scaffold: Scaffold, node: Node) -> None:
        raise NotImplementedError("Particles cannot detach nodes")

    def made_sp_record_at(self, node: Node) -> SPRecord:
        if node in self._made_records:
            record = self._made_records[node]
        else:
            record = node.made_sp_record
        if record is None:
            raise VMTypeError(f"{node} does not hold a made procedure")
        return record

    def set_made_sp_record_at(self, node: Node, record: Optional[SPRecord]) -> None:
        self._made_records[node] = record

    def made_sp_aux_at(self, node: Node) -> Optional[SPAux]:
        if node in self._made_records:
            return self.made_sp_record_at(node).aux
        if node not in self._made_auxes:
            self._made_auxes[node] = _clone_aux(self.made_sp_record_at(node).aux, node)
        return self._made_auxes[node]

    def made_sp_families_at(self, node: Node) -> dict[Hashable, Node]:
        if node in self._made_records:
            return self.made_sp_record_at(node).families
        if node not in self._made_families:
            self._made_families[node] = dict(self.made_sp_record_at(node).families)
        return self._made_families[node]

    def aaa_made_aux_at(self, node: Node) -> Optional[SPAux]:
        if node not in self._aaa_auxes:
            base_aux = self.base.aaa_made_aux.get(node)
            if base_aux is None:
                return None
            self._aaa_auxes[node] = _clone_aux(base_aux, node)
        aux = self._aaa_auxes[node]
        return None if aux is _DISCARDED else aux

    def register_aaa_made_aux_at(self, node: Node, aux: Optional[SPAux]) -> None:
        self._aaa_auxes[node] = aux

    def discard_aaa_made_aux_at(self, node: Node) -> None:
        self._aaa_auxes[node] = _DISCARDED

    # -- registries, replayed on commit -------------------------------------

    def register_random_choice(self, node: Node) -> None:
        self._ops.append(("register_random_choice", node))

    def unregister_random_choice(self, node: Node) -> None:
        self._ops.append(("unregister_random_choice", node))

    def register_constrained_choice(self, node: Node) -> None:
        self._constrained[node] = True
        self._ops.append(("register_constrained_choice", node))

    def unregister_constrained_choice(self, node: Node) -> None:
        self._constrained[node] = False
        self._ops.append(("unregister_constrained_choice", node))

    def is_constrained_at(self, node: Node) -> bool:
        if node in self._constrained:
            return self._constrained[node]
        return self.base.is_constrained_at(node)

    def register_ae_kernel(self, node: Node) -> None:
        self._ops.append(("register_ae_kernel", node))

    def unregister_ae_kernel(self, node: Node) -> None:
        self._ops.append(("unregister_ae_kernel", node))

    # -- commit -------------------------------------------------------------

    def commit(self) -> None:
        """Write every overlay into the base trace and replay the registry operations."""
        for node, value in self._values.items():
            node.value = value
        for node, children in self._children.items():
            node.children |= children
        for node, parents in self._esr_parents.items():
            node.esr_parents = list(parents)
        for node, count in self._num_requests.items():
            node.num_requests = count
        if self._regen_scaffold is not None:
            self._regen_scaffold.regen_counts.update(self._regen_counts)
        for node, record in self._made_records.items():
            node.made_sp_record = record
        for node, aux in self._made_auxes.items():
            if node not in self._made_records and node.made_sp_record is not None:
                node.made_sp_record.aux = aux
        for node, families in self._made_families.items():
            if node not in self._made_records and node.made_sp_record is not None:
                node.made_sp_record.families = families
        for node, aux in self._aaa_auxes.items():
            if aux is _DISCARDED:
                self.base.aaa_made_aux.pop(node, None)
            else:
                self.base.aaa_made_aux[node] = aux
        for op, node in self._ops:
            getattr(self.base, op)(node)
        logger.debug("Committed particle: %d values, %d registry operations", len(self._values), len(self._ops))

    def __repr__(self) -> str:
        return f"Particle(weight={self.weight:.4g}, values={len(self._values)})"
