"""Building and tearing down trace fragments.

``eval_family`` grows the family of an expression, ``uneval_family`` removes
it again and records everything it removes in an :class:`OmegaDB` so that
``restore_family`` can rebuild the identical fragment. The per-application steps
(apply the request PSP, evaluate the requests, apply the output PSP) are shared
with the scaffold regenerator in :mod:`petvm.regen`.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Any

from . import regen
from .exceptions import DanglingRequest, EvaluationError, InvalidObservation
from .node import ConstantNode, LookupNode, Node, OutputNode, RequestNode, Tags, merge_tag
from .spi.psp import NullRequestPSP, Request
from .spi.sp import SPRecord
from .syntax import Combination, Expression, Quote, SelfEvaluating, Variable
from .values import SPRef, Value

if TYPE_CHECKING:
    from .env import Environment
    from .omegadb import OmegaDB
    from .scaffold import Scaffold
    from .trace import Trace

logger = logging.getLogger(__name__)

__all__ = [
    "apply_psp",
    "apply_sp",
    "constrain",
    "constrain_observation",
    "eval_family",
    "eval_requests",
    "process_made_sp",
    "restore_family",
    "teardown_made_sp",
    "unapply_psp",
    "unapply_sp",
    "unconstrain",
    "uneval_family",
    "uneval_requests",
]


def eval_family(
    trace: Trace,
    expr: Expression,
    env: Environment,
    scaffold: Scaffold,
    restore: bool,
    db: OmegaDB,
    tags: Tags = (),
) -> tuple[float, Node]:
    """Evaluate ``expr`` into a fresh family; returns the weight and the family root."""
    if isinstance(expr, Variable):
        source = env.find_symbol(expr.name)
        weight = regen.regenerate(trace, source, scaffold, restore, db)
        return weight, trace.create_lookup_node(source)
    if isinstance(expr, SelfEvaluating):
        return 0.0, trace.create_constant_node(expr.value)
    if isinstance(expr, Quote):
        return 0.0, trace.create_constant_node(expr.datum)
    if isinstance(expr, Combination):
        weight, operator_node = eval_family(trace, expr.operator, env, scaffold, restore, db, tags)
        operand_nodes = []
        for operand in expr.operands:
            w, operand_node = eval_family(trace, operand, env, scaffold, restore, db, tags)
            weight += w
            operand_nodes.append(operand_node)
        request_node, output_node = trace.create_application_nodes(operator_node, operand_nodes, env, tags)
        weight += apply_sp(trace, request_node, output_node, scaffold, restore, db)
        return weight, output_node
    raise EvaluationError(f"Cannot evaluate {type(expr).__name__}; expressions must be desugared first")


def apply_sp(
    trace: Trace,
    request_node: RequestNode,
    output_node: OutputNode,
    scaffold: Scaffold,
    restore: bool,
    db: OmegaDB,
) -> float:
    weight = apply_psp(trace, request_node, scaffold, restore, db)
    weight += eval_requests(trace, request_node, scaffold, restore, db)
    weight += regen.regenerate_esr_parents(trace, output_node, scaffold, restore, db)
    weight += apply_psp(trace, output_node, scaffold, restore, db)
    return weight


def eval_requests(trace: Trace, node: RequestNode, scaffold: Scaffold, restore: bool, db: OmegaDB) -> float:
    """Resolve every ESR to a family root and run every latent request."""
    weight = 0.0
    request = trace.value_at(node)
    if not isinstance(request, Request):
        raise EvaluationError(f"Request PSP returned {request!r} instead of a request")
    sp = trace.sp_at(node)
    output_node = node.output_node
    assert output_node is not None

    for esr in request.esrs:
        if not trace.contains_sp_family_at(node, esr.addr):
            if restore and db.has_family(sp, esr.addr):
                esr_parent = db.get_family(sp, esr.addr)
                weight += restore_family(trace, esr_parent, scaffold, db)
            else:
                w, esr_parent = eval_family(
                    trace, esr.expression, esr.env, scaffold, restore, db, merge_tag(node.tags, esr.tag)
                )
                weight += w
            if trace.contains_sp_family_at(node, esr.addr):
                # the family's own evaluation requested the same address
                raise EvaluationError(f"Recursive request loop detected in {sp.name} at {esr.addr!r}")
            trace.register_family_at(node, esr.addr, esr_parent)
        trace.add_esr_edge(trace.sp_family_at(node, esr.addr), output_node)

    for lsr in request.lsrs:
        latent_db = db.get_latent_db(sp) if db.has_latent_db(sp) else None
        weight += sp.simulate_latents(trace.spaux_at(node), lsr, restore, latent_db, trace.rng)
    return weight


def apply_psp(trace: Trace, node: RequestNode | OutputNode, scaffold: Scaffold, restore: bool, db: OmegaDB) -> float:
    psp = trace.psp_at(node)
    args = trace.args_at(node)
    old_value = db.get_value(node) if db.has_value(node) else None

    if restore:
        new_value = old_value
    elif scaffold.has_kernel(node):
        new_value = scaffold.get_kernel(node).simulate(trace, old_value, args)
    else:
        new_value = psp.simulate(args)

    weight = 0.0
    if scaffold.has_kernel(node):
        weight += scaffold.get_kernel(node).weight(trace, new_value, old_value, args)

    trace.set_value_at(node, new_value)
    psp.incorporate(new_value, args)
    if isinstance(new_value, SPRecord):
        process_made_sp(trace, node, scaffold.is_aaa(node))
    if psp.is_random():
        trace.register_random_choice(node)
    return weight


def process_made_sp(trace: Trace, node: Node, is_aaa: bool) -> None:
    """Move a freshly made record into the maker slot and leave an SPRef as the node's value."""
    record = trace.value_at(node)
    trace.set_made_sp_record_at(node, record)
    if is_aaa:
        trace.discard_aaa_made_aux_at(node)
    if record.sp.has_ae_kernel():
        trace.register_ae_kernel(node)
    trace.set_value_at(node, SPRef(node))


def teardown_made_sp(trace: Trace, node: Node, is_aaa: bool) -> None:
    record = trace.made_sp_record_at(node)
    trace.set_value_at(node, record)
    if record.sp.has_ae_kernel():
        trace.unregister_ae_kernel(node)
    if is_aaa:
        trace.register_aaa_made_aux_at(node, trace.made_sp_aux_at(node))
    trace.set_made_sp_record_at(node, None)


def restore_family(trace: Trace, node: Node, scaffold: Scaffold, db: OmegaDB) -> float:
    """Rebuild a family that ``uneval_family`` archived in ``db``."""
    if isinstance(node, ConstantNode):
        return 0.0
    if isinstance(node, LookupNode):
        weight = regen.regenerate_parents(trace, node, scaffold, True, db)
        trace.reconnect_lookup(node)
        trace.set_value_at(node, trace.value_at(node.source_node))
        return weight
    assert isinstance(node, OutputNode)
    weight = restore_family(trace, node.operator_node, scaffold, db)
    for operand_node in node.operand_nodes:
        weight += restore_family(trace, operand_node, scaffold, db)
    weight += apply_sp(trace, node.request_node, node, scaffold, True, db)
    return weight


def uneval_family(trace: Trace, node: Node, scaffold: Scaffold, db: OmegaDB) -> float:
    weight = 0.0
    if isinstance(node, ConstantNode):
        pass
    elif isinstance(node, LookupNode):
        trace.disconnect_lookup(node)
        trace.set_value_at(node, None)
        weight += regen.extract_parents(trace, node, scaffold, db)
    else:
        assert isinstance(node, OutputNode)
        weight += unapply_sp(trace, node, scaffold, db)
        for operand_node in reversed(node.operand_nodes):
            weight += uneval_family(trace, operand_node, scaffold, db)
        weight += uneval_family(trace, node.operator_node, scaffold, db)
    return weight


def unapply_sp(trace: Trace, node: OutputNode, scaffold: Scaffold, db: OmegaDB) -> float:
    weight = unapply_psp(trace, node, scaffold, db)
    for parent in reversed(list(trace.esr_parents_at(node))):
        weight += regen.extract(trace, parent, scaffold, db)
    weight += uneval_requests(trace, node.request_node, scaffold, db)
    weight += unapply_psp(trace, node.request_node, scaffold, db)
    return weight


def uneval_requests(trace: Trace, node: RequestNode, scaffold: Scaffold, db: OmegaDB) -> float:
    """Undo ``eval_requests``; families nobody requests any more are archived and unevaluated."""
    weight = 0.0
    request = trace.value_at(node)
    sp = trace.sp_at(node)
    output_node = node.output_node
    assert output_node is not None

    if request.lsrs and not db.has_latent_db(sp):
        db.register_latent_db(sp, sp.construct_latent_db())
    for lsr in reversed(request.lsrs):
        weight += sp.detach_latents(trace.spaux_at(node), lsr, db.get_latent_db(sp))

    for esr in reversed(request.esrs):
        esr_parent = trace.pop_last_esr_parent(output_node)
        remaining = trace.num_requests_at(esr_parent)
        if remaining < 0:
            raise DanglingRequest(f"{esr_parent} released more often than it was requested")
        if remaining == 0:
            trace.unregister_family_at(node, esr.addr)
            db.register_family(sp, esr.addr, esr_parent)
            weight += uneval_family(trace, esr_parent, scaffold, db)
    return weight


def unapply_psp(trace: Trace, node: RequestNode | OutputNode, scaffold: Scaffold, db: OmegaDB) -> float:
    psp = trace.psp_at(node)
    args = trace.args_at(node)
    if psp.is_random():
        trace.unregister_random_choice(node)
    value = trace.value_at(node)
    if isinstance(value, SPRef) and value.maker_node is node:
        teardown_made_sp(trace, node, scaffold.is_aaa(node))

    weight = 0.0
    value = trace.value_at(node)
    psp.unincorporate(value, args)
    if scaffold.has_kernel(node):
        weight += scaffold.get_kernel(node).reverse_weight(trace, value, args)
    db.extract_value(node, value)
    trace.set_value_at(node, None)
    return weight


# -- constraints ------------------------------------------------------------


def constrain(trace: Trace, node: OutputNode, value: Value) -> float:
    """Pin ``node`` to ``value``; returns the value's log density."""
    psp = trace.psp_at(node)
    args = trace.args_at(node)
    psp.unincorporate(trace.value_at(node), args)
    weight = psp.log_density(value, args)
    trace.set_value_at(node, value)
    psp.incorporate(value, args)
    trace.register_constrained_choice(node)
    return weight


def unconstrain(trace: Trace, node: OutputNode) -> float:
    psp = trace.psp_at(node)
    args = trace.args_at(node)
    value = trace.value_at(node)
    trace.unregister_constrained_choice(node)
    psp.unincorporate(value, args)
    weight = psp.log_density(value, args)
    psp.incorporate(value, args)
    return weight


def constrain_observation(trace: Trace, root: Node, value: Value) -> float:
    """Constrain the choice behind an observed root and copy the value along the chain to the root."""
    chain = trace.observation_chain(root)
    app = trace.get_constrainable_node(root)
    weight = constrain(trace, app, value)
    for node in chain[:-1]:
        trace.set_value_at(node, value)
    return weight


def propagate_constraint(trace: Trace, node: Node, value: Any) -> None:
    """Push a value constrained during regeneration into the deterministic nodes downstream of it."""
    if isinstance(node, LookupNode):
        trace.set_value_at(node, value)
    elif isinstance(node, RequestNode):
        if not isinstance(trace.psp_at(node), NullRequestPSP):
            raise InvalidObservation("Cannot make requests downstream of a node constrained during regeneration")
    else:
        assert isinstance(node, OutputNode)
        psp = trace.psp_at(node)
        if psp.is_random():
            raise InvalidObservation("Cannot make random choices downstream of a node constrained during regeneration")
        trace.set_value_at(node, psp.simulate(trace.args_at(node)))
    for child in list(trace.children_at(node)):
        propagate_constraint(trace, child, trace.value_at(node))
