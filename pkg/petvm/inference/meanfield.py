"""Mean-field variational proposals for Metropolis-Hastings.

Resampled nodes whose procedure offers a variational kernel get one,
initialised at their current arguments. The kernels are trained by stochastic
gradient ascent on the expected ``log P/Q`` of forward regenerations from the
detached trace, with the score-function estimator and step size
``a / (b + t)``. The trained kernels then serve as an independent MH proposal.
Nodes without a variational kernel are resimulated, so a scope with none
degrades to plain MH.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from ..exceptions import InferenceError
from ..kernels import VariationalKernel
from ..node import Node, OutputNode
from ..omegadb import OmegaDB
from ..regen import detach_scaffold, regen_scaffold
from ..scaffold import Scaffold, construct_scaffold
from .expressions import LATENTS_SCOPE, BlockSpec
from .mh import restore_rejected, selection_correction
from .sampling import accept
from .selection import select_principal_nodes

if TYPE_CHECKING:
    from ..trace import Trace
    from ..values import Value

logger = logging.getLogger(__name__)

__all__ = ["attach_variational_kernels", "meanfield_transition", "train_variational_kernels"]


def attach_variational_kernels(trace: Trace, scaffold: Scaffold) -> dict[Node, VariationalKernel]:
    """Install a variational kernel on every eligible resampled node of an attached scaffold."""
    kernels: dict[Node, VariationalKernel] = {}
    for node in sorted(scaffold.regen_counts, key=lambda n: n.node_id):
        if not isinstance(node, OutputNode) or scaffold.is_aaa(node) or node in scaffold.lkernels:
            continue
        if trace.is_constrained_at(node) or node.operator_node in scaffold.drg:
            continue
        kernel = trace.psp_at(node).variational_kernel(trace.args_at(node))
        if kernel is not None:
            kernels[node] = kernel
    scaffold.lkernels.update(kernels)
    return kernels


def train_variational_kernels(
    trace: Trace, scaffold: Scaffold, kernels: dict[Node, VariationalKernel], iterations: int
) -> None:
    """Gradient steps on the kernels' parameters; ``scaffold`` must be detached and stays detached."""
    a, b = trace.config.meanfield_step_a, trace.config.meanfield_step_b
    for t in range(iterations):
        gain = regen_scaffold(trace, scaffold, False, OmegaDB())
        detach_scaffold(trace, scaffold)
        step = a / (b + t)
        for kernel in kernels.values():
            kernel.update(gain, step)


def meanfield_transition(trace: Trace, scope: Value, block: BlockSpec, iterations: int) -> bool:
    if scope == LATENTS_SCOPE:
        raise InferenceError("meanfield cannot target the latents scope")
    selection = select_principal_nodes(trace, scope, block)
    if selection.is_empty:
        trace.stats.transitions += 1
        trace.stats.accepted += 1
        return True

    scaffold = construct_scaffold(trace, selection.principal_sets)
    kernels = attach_variational_kernels(trace, scaffold)
    trace.stats.transitions += 1
    if not kernels:
        logger.warning("No variational kernels for scope %s; proposing by resimulation", scope)
        iterations = 0

    _, rho_db = detach_scaffold(trace, scaffold)
    train_variational_kernels(trace, scaffold, kernels, iterations)
    rho_weight = regen_scaffold(trace, scaffold, True, rho_db)
    detach_scaffold(trace, scaffold)
    xi_weight = regen_scaffold(trace, scaffold, False, OmegaDB())

    log_alpha = xi_weight - rho_weight + selection_correction(trace, selection)
    accepted = accept(trace.rng, log_alpha)
    if accepted:
        trace.stats.accepted += 1
    else:
        restore_rejected(trace, scaffold, rho_db)
    logger.debug(
        "meanfield %s %s: %d kernels, log_alpha=%.4g accepted=%s", scope, block, len(kernels), log_alpha, accepted
    )
    return accepted
