"""The probabilistic execution trace.

A :class:`Trace` owns the node graph built by the evaluator together with the
registries that inference needs: unconstrained random choices, constrained
choices, scope/block membership and the procedures that carry an internal
transition operator. Every read or write of per-node state goes through an
accessor so that :class:`petvm.particle.Particle` can overlay them.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Generic, Optional, TypeVar

import numpy as np

from . import evaluator, regen
from .config import EngineConfig
from .env import Environment
from .exceptions import InvalidObservation, NotAbsorbing, UnknownBlock, UnknownScope, VMTypeError
from .inference.expressions import DEFAULT_SCOPE
from .kernels import DeterministicKernel
from .node import ApplicationNode, ConstantNode, LookupNode, Node, OutputNode, RequestNode, Tags
from .omegadb import OmegaDB
from .scaffold import Scaffold, construct_scaffold
from .spi.builtins import builtin_sps
from .spi.psp import PSP, Args
from .spi.sp import SP, SPAux, SPRecord
from .syntax import Expression, desugar
from .values import SPRef, Value, block_sort_key

if TYPE_CHECKING:
    from collections.abc import Hashable

logger = logging.getLogger(__name__)

__all__ = ["SamplableSet", "Trace", "TraceStats"]

T = TypeVar("T")


class SamplableSet(Generic[T]):
    """A set with uniform sampling; iteration follows insertion order up to swap-removals."""

    __slots__ = ("_items", "_index")

    def __init__(self, items: Iterable[T] = ()):
        self._items: list[T] = []
        self._index: dict[T, int] = {}
        for item in items:
            self.add(item)

    def add(self, item: T) -> None:
        if item in self._index:
            return
        self._index[item] = len(self._items)
        self._items.append(item)

    def remove(self, item: T) -> None:
        index = self._index.pop(item)
        last = self._items.pop()
        if index < len(self._items):
            self._items[index] = last
            self._index[last] = index

    def discard(self, item: T) -> None:
        if item in self._index:
            self.remove(item)

    def sample(self, rng: np.random.Generator) -> T:
        return self._items[int(rng.integers(len(self._items)))]

    def __contains__(self, item: object) -> bool:
        return item in self._index

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[T]:
        return iter(list(self._items))


@dataclass
class TraceStats:
    visits: int = 0
    transitions: int = 0
    accepted: int = 0
    # node ids in visit order, recorded only while a list is installed
    visit_log: Optional[list[int]] = None

    def visit(self, node: Node) -> None:
        self.visits += 1
        if self.visit_log is not None:
            self.visit_log.append(node.node_id)

    def to_dict(self) -> dict[str, int]:
        return {"visits": self.visits, "transitions": self.transitions, "accepted": self.accepted}


class Trace:
    def __init__(self, rng: Optional[np.random.Generator] = None, config: Optional[EngineConfig] = None):
        self.rng = rng if rng is not None else np.random.default_rng()
        self.config = config or EngineConfig()
        self.stats = TraceStats()
        self._node_ids = itertools.count(1)

        self.random_choices: SamplableSet[Node] = SamplableSet()
        self.constrained_choices: set[Node] = set()
        self.scopes: dict[Value, dict[Value, SamplableSet[Node]]] = {}
        self.ae_kernel_nodes: SamplableSet[Node] = SamplableSet()
        self.aaa_made_aux: dict[Node, SPAux] = {}
        self.families: dict[int, Node] = {}

        self.global_env = Environment()
        for name, sp in builtin_sps().items():
            self.bind_primitive_sp(name, sp)
        # a fresh frame so that directives can shadow builtins
        self.global_env = Environment(self.global_env)

    def next_node_id(self) -> int:
        return next(self._node_ids)

    def bind_primitive_sp(self, name: str, sp: SP) -> Node:
        node = self.create_constant_node(SPRecord.fresh(sp))
        evaluator.process_made_sp(self, node, False)
        self.global_env.add_binding(name, node)
        return node

    # -- per-node state; particles override these ---------------------------

    def value_at(self, node: Node) -> Any:
        return node.value

    def set_value_at(self, node: Node, value: Any) -> None:
        node.value = value

    def children_at(self, node: Node) -> Iterable[Node]:
        return node.children

    def add_child_at(self, node: Node, child: Node) -> None:
        node.children.add(child)

    def remove_child_at(self, node: Node, child: Node) -> None:
        node.children.remove(child)

    def esr_parents_at(self, node: Node) -> list[Node]:
        return node.esr_parents

    def append_esr_parent_at(self, node: Node, parent: Node) -> None:
        node.esr_parents.append(parent)

    def pop_esr_parent_at(self, node: Node) -> Node:
        return node.esr_parents.pop()

    def num_requests_at(self, node: Node) -> int:
        return node.num_requests

    def inc_requests_at(self, node: Node) -> None:
        node.num_requests += 1

    def dec_requests_at(self, node: Node) -> None:
        node.num_requests -= 1

    def regen_count_at(self, scaffold: Scaffold, node: Node) -> int:
        return scaffold.regen_counts[node]

    def inc_regen_count_at(self, scaffold: Scaffold, node: Node) -> None:
        scaffold.regen_counts[node] += 1

    def dec_regen_count_at(self, scaffold: Scaffold, node: Node) -> None:
        scaffold.regen_counts[node] -= 1

    def made_sp_record_at(self, node: Node) -> SPRecord:
        record = node.made_sp_record
        if record is None:
            raise VMTypeError(f"{node} does not hold a made procedure")
        return record

    def set_made_sp_record_at(self, node: Node, record: Optional[SPRecord]) -> None:
        node.made_sp_record = record

    def made_sp_aux_at(self, node: Node) -> Optional[SPAux]:
        return self.made_sp_record_at(node).aux

    def made_sp_families_at(self, node: Node) -> dict[Hashable, Node]:
        return self.made_sp_record_at(node).families

    def aaa_made_aux_at(self, node: Node) -> Optional[SPAux]:
        return self.aaa_made_aux.get(node)

    def register_aaa_made_aux_at(self, node: Node, aux: Optional[SPAux]) -> None:
        self.aaa_made_aux[node] = aux

    def discard_aaa_made_aux_at(self, node: Node) -> None:
        self.aaa_made_aux.pop(node, None)

    # -- registries ---------------------------------------------------------

    def register_random_choice(self, node: Node) -> None:
        self.random_choices.add(node)
        for scope, block in getattr(node, "tags", ()):
            self.scopes.setdefault(scope, {}).setdefault(block, SamplableSet()).add(node)

    def unregister_random_choice(self, node: Node) -> None:
        if node not in self.random_choices:
            return
        self.random_choices.remove(node)
        for scope, block in getattr(node, "tags", ()):
            blocks = self.scopes[scope]
            members = blocks[block]
            members.remove(node)
            if not members:
                del blocks[block]
            if not blocks:
                del self.scopes[scope]

    def register_constrained_choice(self, node: Node) -> None:
        if self.is_constrained_at(node):
            raise InvalidObservation(f"{node} is already constrained")
        self.constrained_choices.add(node)
        self.unregister_random_choice(node)

    def unregister_constrained_choice(self, node: Node) -> None:
        self.constrained_choices.discard(node)
        if self.psp_at(node).is_random():
            self.register_random_choice(node)

    def is_constrained_at(self, node: Node) -> bool:
        return node in self.constrained_choices

    def register_ae_kernel(self, node: Node) -> None:
        self.ae_kernel_nodes.add(node)

    def unregister_ae_kernel(self, node: Node) -> None:
        self.ae_kernel_nodes.discard(node)

    # -- derived accessors --------------------------------------------------

    def sp_ref_at(self, node: ApplicationNode) -> SPRef:
        candidate = self.value_at(node.operator_node)
        if not isinstance(candidate, SPRef):
            raise VMTypeError(f"Cannot apply a non-procedure: {candidate}")
        return candidate

    def sp_at(self, node: ApplicationNode) -> SP:
        return self.made_sp_record_at(self.sp_ref_at(node).maker_node).sp

    def spaux_at(self, node: ApplicationNode) -> Optional[SPAux]:
        return self.made_sp_aux_at(self.sp_ref_at(node).maker_node)

    def sp_families_at(self, node: ApplicationNode) -> dict[Hashable, Node]:
        return self.made_sp_families_at(self.sp_ref_at(node).maker_node)

    def psp_at(self, node: ApplicationNode) -> PSP:
        return node.relevant_psp(self.sp_at(node))

    def args_at(self, node: ApplicationNode) -> Args:
        return Args(self, node)

    def ground_value_at(self, node: Node) -> Any:
        value = self.value_at(node)
        if isinstance(value, SPRef):
            return self.made_sp_record_at(value.maker_node)
        return value

    def contains_sp_family_at(self, node: ApplicationNode, addr: Hashable) -> bool:
        return addr in self.sp_families_at(node)

    def sp_family_at(self, node: ApplicationNode, addr: Hashable) -> Node:
        return self.sp_families_at(node)[addr]

    def register_family_at(self, node: ApplicationNode, addr: Hashable, root: Node) -> None:
        self.sp_families_at(node)[addr] = root

    def unregister_family_at(self, node: ApplicationNode, addr: Hashable) -> None:
        del self.sp_families_at(node)[addr]

    # -- graph construction -------------------------------------------------

    def create_constant_node(self, value: Any) -> ConstantNode:
        node = ConstantNode(self.next_node_id())
        self.set_value_at(node, value)
        return node

    def create_lookup_node(self, source: Node) -> LookupNode:
        node = LookupNode(self.next_node_id(), source)
        self.set_value_at(node, self.value_at(source))
        self.add_child_at(source, node)
        return node

    def create_application_nodes(
        self, operator_node: Node, operand_nodes: list[Node], env: Environment, tags: Tags
    ) -> tuple[RequestNode, OutputNode]:
        request_node = RequestNode(self.next_node_id(), operator_node, operand_nodes, env, tags)
        output_node = OutputNode(self.next_node_id(), operator_node, operand_nodes, request_node, env, tags)
        request_node.output_node = output_node
        for parent in (operator_node, *operand_nodes):
            self.add_child_at(parent, request_node)
            self.add_child_at(parent, output_node)
        self.add_child_at(request_node, output_node)
        return request_node, output_node

    def add_esr_edge(self, esr_parent: Node, output_node: OutputNode) -> None:
        self.inc_requests_at(esr_parent)
        self.add_child_at(esr_parent, output_node)
        self.append_esr_parent_at(output_node, esr_parent)

    def pop_last_esr_parent(self, output_node: OutputNode) -> Node:
        esr_parent = self.pop_esr_parent_at(output_node)
        self.remove_child_at(esr_parent, output_node)
        self.dec_requests_at(esr_parent)
        return esr_parent

    def disconnect_lookup(self, node: LookupNode) -> None:
        self.remove_child_at(node.source_node, node)

    def reconnect_lookup(self, node: LookupNode) -> None:
        self.add_child_at(node.source_node, node)

    # -- observations -------------------------------------------------------

    def observation_chain(self, node: Node) -> list[Node]:
        """Nodes from ``node`` through lookups and reference outputs down to the value's origin."""
        chain = [node]
        while True:
            if isinstance(node, LookupNode):
                node = node.source_node
            elif isinstance(node, OutputNode) and self.psp_at(node).is_esr_reference():
                parents = self.esr_parents_at(node)
                if not parents:
                    raise InvalidObservation(f"{node} references no family")
                node = parents[0]
            else:
                return chain
            chain.append(node)

    def get_constrainable_node(self, node: Node) -> OutputNode:
        candidate = self.observation_chain(node)[-1]
        if isinstance(candidate, ConstantNode):
            raise InvalidObservation("Cannot constrain a constant value")
        if not isinstance(candidate, OutputNode):
            raise InvalidObservation(f"Cannot constrain {candidate}")
        psp = self.psp_at(candidate)
        if not psp.is_random():
            raise InvalidObservation("Cannot constrain a deterministic value")
        if not psp.can_absorb(self, candidate, None):
            raise NotAbsorbing(f"{psp.name} cannot report the density of an observed value")
        return candidate

    # -- scopes -------------------------------------------------------------

    def num_random_choices(self) -> int:
        return len(self.random_choices)

    def scope_has_entropy(self, scope: Value) -> bool:
        if scope == DEFAULT_SCOPE:
            return len(self.random_choices) > 0
        return scope in self.scopes

    def blocks_in_scope(self, scope: Value) -> list[Any]:
        """Blocks of ``scope`` in canonical order; the default scope's blocks are its choices."""
        if scope == DEFAULT_SCOPE:
            return sorted(self.random_choices, key=lambda n: n.node_id)
        if scope not in self.scopes:
            raise UnknownScope(scope)
        return sorted(self.scopes[scope], key=block_sort_key)

    def num_blocks_in_scope(self, scope: Value) -> int:
        if scope == DEFAULT_SCOPE:
            return len(self.random_choices)
        return len(self.scopes.get(scope, ()))

    def sample_block(self, scope: Value) -> Any:
        if scope == DEFAULT_SCOPE:
            return self.random_choices.sample(self.rng)
        blocks = self.scopes[scope]
        return list(blocks)[int(self.rng.integers(len(blocks)))]

    def nodes_in_block(self, scope: Value, block: Any) -> set[Node]:
        if scope == DEFAULT_SCOPE:
            if isinstance(block, Node):
                return {block}
            raise UnknownBlock(scope, block)
        if scope not in self.scopes:
            raise UnknownScope(scope)
        members = self.scopes[scope].get(block)
        if members is None:
            raise UnknownBlock(scope, block)
        return set(members)

    def block_size(self, scope: Value, block: Any) -> int:
        if scope == DEFAULT_SCOPE:
            return 1
        return len(self.scopes.get(scope, {}).get(block, ()))

    # -- directives ---------------------------------------------------------

    def eval(self, directive_id: int, expression: Expression) -> Any:
        if directive_id in self.families:
            raise ValueError(f"Directive {directive_id} is already evaluated")
        _, root = evaluator.eval_family(
            self, desugar(expression), self.global_env, Scaffold.empty(), False, OmegaDB()
        )
        self.families[directive_id] = root
        return self.value_at(root)

    def uneval(self, directive_id: int) -> None:
        root = self.families.pop(directive_id)
        evaluator.uneval_family(self, root, Scaffold.empty(), OmegaDB())

    def bind_in_global_env(self, symbol: str, directive_id: int) -> None:
        self.global_env.add_binding(symbol, self.families[directive_id])

    def unbind_in_global_env(self, symbol: str) -> None:
        self.global_env.remove_binding(symbol)

    def extract_value(self, directive_id: int) -> Any:
        return self.value_at(self.families[directive_id])

    def observe(self, directive_id: int, value: Value) -> float:
        """Propose the observed value for the constrained choice, then constrain it.

        Returns the log weight of the move; ``-inf`` means the rest of the trace
        gives the observed value probability zero.
        """
        root = self.families[directive_id]
        app = self.get_constrainable_node(root)
        if self.is_constrained_at(app):
            raise InvalidObservation(f"{app} is already constrained by another observation")
        psp = self.psp_at(app)
        # raises on ill-typed observations before the trace is touched
        psp.log_density(value, self.args_at(app))
        scaffold = construct_scaffold(self, [{app}])
        scaffold.lkernels[app] = DeterministicKernel(psp, value)
        rho_weight, _ = regen.detach_scaffold(self, scaffold)
        xi_weight = regen.regen_scaffold(self, scaffold, False, OmegaDB())
        root.observe(value)
        evaluator.constrain_observation(self, root, value)
        weight = xi_weight - rho_weight
        if math.isnan(weight) or math.isinf(weight):
            return -math.inf
        return weight

    def unobserve(self, directive_id: int) -> float:
        root = self.families[directive_id]
        if not root.is_observation:
            return 0.0
        weight = evaluator.unconstrain(self, self.get_constrainable_node(root))
        root.unobserve()
        return weight
