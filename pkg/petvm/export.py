"""Graphviz and JSON views of a trace."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Optional

from .inference.expressions import DEFAULT_SCOPE
from .node import LookupNode, Node, OutputNode, RequestNode
from .values import Number, Value, block_sort_key

if TYPE_CHECKING:
    from .scaffold import Scaffold
    from .trace import Trace

__all__ = ["export_dot", "reachable_nodes", "trace_summary"]

_SHAPES = {
    "constant": "shape=box",
    "lookup": "shape=ellipse, style=dashed",
    "request": "shape=diamond",
    "output": "shape=ellipse",
}

_MAX_LABEL = 40


def reachable_nodes(trace: Trace) -> list[Node]:
    """Every node the directives depend on, ordered by node id."""
    seen: set[Node] = set()
    stack = list(trace.families.values())
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        stack.extend(node.definite_parents())
        stack.extend(trace.esr_parents_at(node))
    return sorted(seen, key=lambda n: n.node_id)


def _label(trace: Trace, node: Node) -> str:
    value = trace.value_at(node)
    if value is None:
        text = "-"
    elif isinstance(value, Value):
        text = str(value)
    else:
        text = type(value).__name__
    if len(text) > _MAX_LABEL:
        text = text[: _MAX_LABEL - 3] + "..."
    return f"{node.node_id}: {text}".replace("\\", "\\\\").replace('"', '\\"')


def _scaffold_style(scaffold: Optional[Scaffold], node: Node) -> str:
    if scaffold is None:
        return ""
    if node in scaffold.aaa:
        colour = "orange"
    elif node in scaffold.drg:
        colour = "gold"
    elif node in scaffold.absorbing:
        colour = "lightblue"
    elif node in scaffold.brush:
        colour = "palegreen"
    else:
        return ""
    style = f", style=filled, fillcolor={colour}"
    if node in scaffold.border_nodes():
        style += ", peripheries=2"
    return style


def export_dot(trace: Trace, scaffold: Optional[Scaffold] = None) -> str:
    """Render the trace as a DOT digraph; identical traces render to identical text."""
    nodes = reachable_nodes(trace)
    lines = ["digraph trace {", "  rankdir=BT;"]
    for node in nodes:
        attributes = f'label="{_label(trace, node)}", {_SHAPES[node.kind]}{_scaffold_style(scaffold, node)}'
        lines.append(f"  n{node.node_id} [{attributes}];")
    for node in nodes:
        if isinstance(node, LookupNode):
            lines.append(f"  n{node.source_node.node_id} -> n{node.node_id} [style=dashed];")
        elif isinstance(node, (RequestNode, OutputNode)):
            lines.append(f"  n{node.operator_node.node_id} -> n{node.node_id} [style=bold];")
            for operand in node.operand_nodes:
                lines.append(f"  n{operand.node_id} -> n{node.node_id};")
            if isinstance(node, OutputNode):
                lines.append(f"  n{node.request_node.node_id} -> n{node.node_id} [style=dotted];")
                for parent in trace.esr_parents_at(node):
                    lines.append(f"  n{parent.node_id} -> n{node.node_id} [color=red];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _key(value: Value) -> str:
    if isinstance(value, Number) and value.value.is_integer():
        return str(int(value.value))
    return str(value)


def trace_summary(trace: Trace) -> dict[str, Any]:
    scopes: dict[str, dict[str, int]] = {}
    for scope in sorted(trace.scopes, key=block_sort_key):
        if scope == DEFAULT_SCOPE:
            continue
        scopes[_key(scope)] = {
            _key(block): len(members)
            for block, members in sorted(trace.scopes[scope].items(), key=lambda kv: block_sort_key(kv[0]))
        }
    return {
        "nodeCount": len(reachable_nodes(trace)),
        "randomChoiceCount": trace.num_random_choices(),
        "scopes": scopes,
    }
