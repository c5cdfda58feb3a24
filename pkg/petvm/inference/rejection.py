"""Exact sampling of a scaffold by rejection.

Proposals resimulate the scaffold from its prior; the regeneration weight is
bounded above by the sum of the absorbing procedures' density bounds, so a
proposal accepted with probability ``exp(weight - bound)`` is an exact draw from
the conditioned distribution.
"""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING

from ..exceptions import ComputeBudgetExceeded, InferenceError, NoDensityBound, NotAbsorbing
from ..node import ApplicationNode, Node
from ..omegadb import OmegaDB
from ..regen import detach_scaffold, regen_scaffold
from ..scaffold import Scaffold, construct_scaffold
from .expressions import LATENTS_SCOPE, BlockSpec
from .sampling import accept
from .selection import select_principal_nodes

if TYPE_CHECKING:
    from ..trace import Trace
    from ..values import Value

logger = logging.getLogger(__name__)

__all__ = ["rejection_transition", "scaffold_log_bound"]


def _bound_at(trace: Trace, node: ApplicationNode, drg: set[Node]) -> float:
    psp = trace.psp_at(node)
    if not psp.has_log_density_bound():
        raise NotAbsorbing(psp.name)
    args = trace.args_at(node)
    args.operand_values = [
        None if operand in drg else value for operand, value in zip(node.operand_nodes, args.operand_values)
    ]
    return psp.log_density_bound(args)


def scaffold_log_bound(trace: Trace, scaffold: Scaffold) -> float:
    """Upper bound on the regeneration weight of ``scaffold`` under resimulation.

    Raises:
        NoDensityBound: some absorbing procedure reports no bound, or the bound is infinite.
    """
    bound = 0.0
    missing: list[str] = []
    for node in scaffold.border_nodes():
        if scaffold.is_aaa(node):
            made = trace.made_sp_record_at(node).sp.output_psp
            # counts of discrete applications score at most probability one
            if made.can_enumerate():
                continue
            missing.append(made.name)
            continue
        if scaffold.is_absorbing(node):
            target = node
        elif node.is_observation:
            target = trace.get_constrainable_node(node)
        else:
            continue
        try:
            bound += _bound_at(trace, target, scaffold.drg)
        except NotAbsorbing:
            missing.append(trace.psp_at(target).name)
    if missing:
        raise NoDensityBound(sorted(set(missing)))
    if not math.isfinite(bound):
        names = sorted({trace.psp_at(n).name for n in scaffold.absorbing})
        raise NoDensityBound(names)
    return bound


def rejection_transition(trace: Trace, scope: Value, block: BlockSpec) -> None:
    """Replace the selected region with an exact sample from its conditional.

    Raises:
        NoDensityBound: an absorbing procedure cannot bound its density.
        ComputeBudgetExceeded: no proposal was accepted within ``rejection_attempts``;
            the old trace is restored first.
    """
    if scope == LATENTS_SCOPE:
        raise InferenceError("rejection cannot target the latents scope")
    selection = select_principal_nodes(trace, scope, block)
    trace.stats.transitions += 1
    if selection.is_empty:
        trace.stats.accepted += 1
        return

    scaffold = construct_scaffold(trace, selection.principal_sets)
    bound = scaffold_log_bound(trace, scaffold)
    _, rho_db = detach_scaffold(trace, scaffold)
    attempts = trace.config.rejection_attempts
    for attempt in range(1, attempts + 1):
        weight = regen_scaffold(trace, scaffold, False, OmegaDB())
        if accept(trace.rng, weight - bound):
            trace.stats.accepted += 1
            logger.debug("rejection %s %s accepted after %d attempts", scope, block, attempt)
            return
        detach_scaffold(trace, scaffold)

    regen_scaffold(trace, scaffold, True, rho_db)
    raise ComputeBudgetExceeded(f"Rejection on scope {scope} accepted nothing in {attempts} attempts")
