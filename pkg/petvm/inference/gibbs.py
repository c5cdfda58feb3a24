"""Enumerative Gibbs: one particle per joint value of the principal choices.

The principal choices are pinned to each tuple of their supports in turn; the
rest of the scaffold (brush included) is resimulated per particle. With
``boosted_particle_acceptance`` the new state is drawn among the non-current
particles and accepted with ``w_{-rho} / w_{-xi}``; otherwise it is drawn
among every particle and always accepted.
"""

from __future__ import annotations

import itertools
import logging
import math
from typing import TYPE_CHECKING, Any

from ..exceptions import InferenceError, SupportTooLarge
from ..kernels import DeterministicKernel
from ..node import Node
from ..omegadb import OmegaDB
from ..regen import detach_scaffold, regen_scaffold
from ..scaffold import Scaffold, construct_scaffold
from .expressions import LATENTS_SCOPE, BlockSpec
from .sampling import accept, boosted_log_alpha, sample_log_categorical
from .selection import select_principal_nodes

if TYPE_CHECKING:
    from ..trace import Trace
    from ..values import Value

logger = logging.getLogger(__name__)

__all__ = ["enumerable_principals", "enumerative_gibbs_transition"]


def enumerable_principals(trace: Trace, scaffold: Scaffold) -> list[Node]:
    """Principal choices whose support can be listed without knowing other resampled values.

    The rest are resimulated like any other scaffold node.
    """
    nodes = []
    for node in sorted(scaffold.principal_nodes(), key=lambda n: n.node_id):
        if node not in scaffold.drg or scaffold.is_aaa(node):
            continue
        if node.operator_node in scaffold.drg or any(op in scaffold.drg for op in node.operand_nodes):
            continue
        if trace.psp_at(node).can_enumerate():
            nodes.append(node)
    return nodes


def enumerative_gibbs_transition(trace: Trace, scope: Value, block: BlockSpec) -> bool:
    """Resample the selected block by enumerating its joint support.

    Raises:
        SupportTooLarge: the product of the supports exceeds ``enumeration_cap``;
            the old trace is restored first.
    """
    if scope == LATENTS_SCOPE:
        raise InferenceError("enumerative_gibbs cannot target the latents scope")
    selection = select_principal_nodes(trace, scope, block)
    trace.stats.transitions += 1
    if selection.is_empty:
        trace.stats.accepted += 1
        return True

    scaffold = construct_scaffold(trace, selection.principal_sets)
    principals = enumerable_principals(trace, scaffold)
    for node in principals:
        scaffold.lkernels[node] = DeterministicKernel(trace.psp_at(node), trace.value_at(node))
    rho_weight, rho_db = detach_scaffold(trace, scaffold)

    # supports are read on the detached trace, where the old values are no longer counted
    supports = [trace.psp_at(p).enumerate_values(trace.args_at(p), rho_db.get_value(p)) for p in principals]
    size = math.prod(len(s) for s in supports)
    if size > trace.config.enumeration_cap:
        regen_scaffold(trace, scaffold, True, rho_db)
        raise SupportTooLarge(size, trace.config.enumeration_cap)

    rho_values = tuple(rho_db.get_value(p) for p in principals)
    xi_weights: list[float] = []
    xi_dbs: list[OmegaDB] = []
    for values in itertools.product(*supports):
        if values == rho_values:
            continue
        _pin(trace, scaffold, principals, values)
        xi_weights.append(regen_scaffold(trace, scaffold, False, OmegaDB()))
        _, db = detach_scaffold(trace, scaffold)
        xi_dbs.append(db)
    logger.debug("enumerative_gibbs %s %s: %d particles besides the current state", scope, block, len(xi_dbs))

    accepted = _choose(trace, scaffold, principals, rho_values, rho_weight, rho_db, xi_weights, xi_dbs)
    if accepted:
        trace.stats.accepted += 1
    return accepted


def _pin(trace: Trace, scaffold: Scaffold, principals: list[Node], values: tuple[Any, ...]) -> None:
    for node, value in zip(principals, values):
        scaffold.lkernels[node] = DeterministicKernel(trace.psp_at(node), value)


def _choose(
    trace: Trace,
    scaffold: Scaffold,
    principals: list[Node],
    rho_values: tuple[Any, ...],
    rho_weight: float,
    rho_db: OmegaDB,
    xi_weights: list[float],
    xi_dbs: list[OmegaDB],
) -> bool:
    if not xi_dbs:
        regen_scaffold(trace, scaffold, True, rho_db)
        return True

    if trace.config.boosted_particle_acceptance:
        index = sample_log_categorical(trace.rng, xi_weights)
        if not accept(trace.rng, boosted_log_alpha(xi_weights, index, rho_weight)):
            _pin(trace, scaffold, principals, rho_values)
            regen_scaffold(trace, scaffold, True, rho_db)
            return False
    else:
        index = sample_log_categorical(trace.rng, xi_weights + [rho_weight])
        if index == len(xi_dbs):
            _pin(trace, scaffold, principals, rho_values)
            regen_scaffold(trace, scaffold, True, rho_db)
            return True
    regen_scaffold(trace, scaffold, True, xi_dbs[index])
    return True
