"""Trace nodes.

Every application contributes a request node and an output node; variables
contribute lookup nodes and literals contribute constant nodes. Edges are stored
on the nodes themselves: parents are implied by the node kind (plus the ESR
parents of output nodes), children are an explicit set.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Optional

from .values import Value

if TYPE_CHECKING:
    from .env import Environment
    from .spi.sp import SP, SPRecord

__all__ = [
    "ApplicationNode",
    "ConstantNode",
    "LookupNode",
    "Node",
    "OutputNode",
    "RequestNode",
    "Tags",
    "merge_tag",
]

# (scope, block) pairs; at most one entry per scope.
Tags = tuple[tuple[Value, Value], ...]


def merge_tag(tags: Tags, tag: Optional[tuple[Value, Value]]) -> Tags:
    """Add ``tag`` to ``tags``, replacing any block already recorded for its scope."""
    if tag is None:
        return tags
    scope = tag[0]
    return tuple(t for t in tags if t[0] != scope) + (tag,)


class Node:
    __slots__ = (
        "node_id",
        "value",
        "children",
        "esr_parents",
        "num_requests",
        "made_sp_record",
        "observed_value",
        "is_observation",
    )

    kind = "node"

    def __init__(self, node_id: int):
        self.node_id = node_id
        self.value: Any = None
        self.children: set[Node] = set()
        self.esr_parents: list[Node] = []
        self.num_requests = 0
        self.made_sp_record: Optional[SPRecord] = None
        self.observed_value: Optional[Value] = None
        self.is_observation = False

    def __hash__(self) -> int:
        return self.node_id

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.node_id})"

    def definite_parents(self) -> list[Node]:
        return []

    def observe(self, value: Value) -> None:
        self.observed_value = value
        self.is_observation = True

    def unobserve(self) -> None:
        self.observed_value = None
        self.is_observation = False


class ConstantNode(Node):
    __slots__ = ()
    kind = "constant"


class LookupNode(Node):
    __slots__ = ("source_node",)
    kind = "lookup"

    def __init__(self, node_id: int, source_node: Node):
        super().__init__(node_id)
        self.source_node = source_node

    def definite_parents(self) -> list[Node]:
        return [self.source_node]


class ApplicationNode(Node):
    __slots__ = ("operator_node", "operand_nodes", "env", "tags")

    def __init__(self, node_id: int, operator_node: Node, operand_nodes: list[Node], env: Environment, tags: Tags):
        super().__init__(node_id)
        self.operator_node = operator_node
        self.operand_nodes = operand_nodes
        self.env = env
        self.tags = tags

    def relevant_psp(self, sp: SP) -> Any:
        raise NotImplementedError


class RequestNode(ApplicationNode):
    __slots__ = ("output_node",)
    kind = "request"

    def __init__(self, node_id: int, operator_node: Node, operand_nodes: list[Node], env: Environment, tags: Tags):
        super().__init__(node_id, operator_node, operand_nodes, env, tags)
        self.output_node: Optional[OutputNode] = None

    def definite_parents(self) -> list[Node]:
        return [self.operator_node, *self.operand_nodes]

    def relevant_psp(self, sp: SP) -> Any:
        return sp.request_psp


class OutputNode(ApplicationNode):
    __slots__ = ("request_node",)
    kind = "output"

    def __init__(
        self,
        node_id: int,
        operator_node: Node,
        operand_nodes: list[Node],
        request_node: RequestNode,
        env: Environment,
        tags: Tags,
    ):
        super().__init__(node_id, operator_node, operand_nodes, env, tags)
        self.request_node = request_node

    def definite_parents(self) -> list[Node]:
        return [self.operator_node, *self.operand_nodes, self.request_node]

    def relevant_psp(self, sp: SP) -> Any:
        return sp.output_psp
