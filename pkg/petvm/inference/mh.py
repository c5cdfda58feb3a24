"""Single-proposal Metropolis-Hastings over a scaffold.

A transition selects principal nodes, detaches the scaffold into a database,
regenerates it (resimulating, or drifting where a drift kernel applies) and
accepts with probability ``min(1, exp(xi - rho + delta_selection))``. The
selection term corrects for the proposal changing how many blocks the scope
holds. A rejected proposal is detached and the old trace restored from the
database.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Optional

from ..exceptions import BlockMembershipChanged
from ..omegadb import OmegaDB
from ..regen import detach_scaffold, regen_scaffold
from ..scaffold import Scaffold, construct_scaffold
from .expressions import DEFAULT_SCOPE, LATENTS_SCOPE, ONE, BlockSpec
from .sampling import accept
from .selection import Selection, select_principal_nodes, selection_log_probability

if TYPE_CHECKING:
    from ..trace import Trace
    from ..values import Value

logger = logging.getLogger(__name__)

__all__ = [
    "ae_transition",
    "block_sizes",
    "check_block_membership",
    "mh_transition",
    "restore_rejected",
    "selection_correction",
]


def mh_transition(trace: Trace, scope: Value, block: BlockSpec, drift: bool = False) -> bool:
    """Run one MH transition on ``(scope, block)``; returns whether the proposal was accepted."""
    if scope == LATENTS_SCOPE:
        return ae_transition(trace)
    selection = select_principal_nodes(trace, scope, block)
    trace.stats.transitions += 1
    if selection.is_empty:
        trace.stats.accepted += 1
        return True

    scaffold = construct_scaffold(trace, selection.principal_sets, drift=drift)
    sizes = block_sizes(trace, selection)
    rho_weight, rho_db = detach_scaffold(trace, scaffold)
    xi_weight = regen_scaffold(trace, scaffold, False, OmegaDB())
    check_block_membership(trace, selection, sizes, scaffold, rho_db)

    log_alpha = xi_weight - rho_weight + selection_correction(trace, selection)
    accepted = accept(trace.rng, log_alpha)
    if accepted:
        trace.stats.accepted += 1
    else:
        restore_rejected(trace, scaffold, rho_db)
    logger.debug(
        "mh %s %s: rho=%.4g xi=%.4g log_alpha=%.4g accepted=%s",
        scope,
        block,
        rho_weight,
        xi_weight,
        log_alpha,
        accepted,
    )
    return accepted


def restore_rejected(trace: Trace, scaffold: Scaffold, rho_db: OmegaDB) -> None:
    """Detach the proposal and regenerate the old trace from ``rho_db``."""
    detach_scaffold(trace, scaffold)
    regen_scaffold(trace, scaffold, True, rho_db)


def selection_correction(trace: Trace, selection: Selection) -> float:
    """log P(selection | proposal) - log P(selection | old trace)."""
    if selection.block.kind != ONE or not trace.config.selection_correction:
        return 0.0
    return selection_log_probability(trace, selection.scope, selection.block) - selection.log_probability


def block_sizes(trace: Trace, selection: Selection) -> Optional[list[int]]:
    if selection.scope == DEFAULT_SCOPE:
        return None
    return [trace.block_size(selection.scope, b) for b in selection.blocks]


def check_block_membership(
    trace: Trace, selection: Selection, sizes: Optional[list[int]], scaffold: Scaffold, rho_db: OmegaDB
) -> None:
    """Undo the proposal and raise if it added or removed choices in the selected blocks."""
    if sizes is None or sizes == block_sizes(trace, selection):
        return
    restore_rejected(trace, scaffold, rho_db)
    raise BlockMembershipChanged(
        f"A transition on scope {selection.scope} changed the random choices of the blocks it selected"
    )


def ae_transition(trace: Trace) -> bool:
    """Let one uniformly chosen procedure run its internal transition operator over its latents."""
    trace.stats.transitions += 1
    trace.stats.accepted += 1
    if not len(trace.ae_kernel_nodes):
        return True
    node = trace.ae_kernel_nodes.sample(trace.rng)
    record = trace.made_sp_record_at(node)
    logger.debug("Running the internal transition of %s at %s", record.sp.name, node)
    record.sp.ae_infer(trace.made_sp_aux_at(node), trace.rng)
    return True
