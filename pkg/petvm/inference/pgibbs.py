"""Particle Gibbs: conditional sequential Monte Carlo over the stages of a scaffold.

The border is split into stages, one per block of an ``ordered`` selection.
Every stage is detached (last first), keeping one database per stage for the
current trace. New particles then propagate stage by stage, each picking an
ancestor among the previous stage's particles by weight while the current trace
rides along as the conditioned particle. A final particle is drawn by weight
and accepted with ``w_{-rho} / w_{-xi}``.

``pgibbs_transition`` runs every particle on the trace itself, restoring the
ancestor's path from the per-stage databases before each extension.
``func_pgibbs_transition`` keeps each particle as a copy-on-write
:class:`~petvm.particle.Particle` over the detached trace instead.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Optional

from ..exceptions import InferenceError, PetVMError
from ..node import Node
from ..omegadb import OmegaDB
from ..particle import Particle
from ..regen import detach_and_extract, regenerate_and_attach
from ..scaffold import Scaffold, construct_scaffold
from .expressions import LATENTS_SCOPE, BlockSpec
from .sampling import accept, boosted_log_alpha, sample_log_categorical
from .selection import select_principal_nodes

if TYPE_CHECKING:
    from ..trace import Trace
    from ..values import Value

logger = logging.getLogger(__name__)

__all__ = ["func_pgibbs_transition", "pgibbs_transition"]


def _staged_scaffold(trace: Trace, scope: Value, block: BlockSpec, keyword: str) -> Optional[Scaffold]:
    if scope == LATENTS_SCOPE:
        raise InferenceError(f"{keyword} cannot target the latents scope")
    selection = select_principal_nodes(trace, scope, block, staged=True)
    trace.stats.transitions += 1
    if selection.is_empty:
        trace.stats.accepted += 1
        return None
    return construct_scaffold(trace, selection.principal_sets)


def _choose_final(trace: Trace, xi_weights: list[float], rho_weight: float) -> tuple[int, float]:
    """Index of the final particle and the log acceptance ratio; index ``len(xi_weights)`` is rho."""
    if trace.config.boosted_particle_acceptance:
        index = sample_log_categorical(trace.rng, xi_weights)
        return index, boosted_log_alpha(xi_weights, index, rho_weight)
    return sample_log_categorical(trace.rng, xi_weights + [rho_weight]), 0.0


# -- on the trace itself ----------------------------------------------------


def _ancestor_path(ancestors: list[list[int]], t: int, index: int) -> list[int]:
    """Particle indices at stages ``0..t-1`` leading to particle ``index`` at stage ``t``."""
    if t == 0:
        return []
    path = [ancestors[t][index]]
    for i in reversed(range(1, t)):
        path.insert(0, ancestors[i][path[0]])
    return path


def _restore_path(
    trace: Trace, border: list[list[Node]], scaffold: Scaffold, dbs: list[list[Optional[OmegaDB]]], path: list[int]
) -> None:
    for stage, index in enumerate(path):
        db = dbs[stage][index]
        assert db is not None
        regenerate_and_attach(trace, border[stage], scaffold, True, db)


def _detach_stages(trace: Trace, border: list[list[Node]], scaffold: Scaffold, t: int) -> None:
    for stage in reversed(range(t)):
        detach_and_extract(trace, border[stage], scaffold)


def pgibbs_transition(trace: Trace, scope: Value, block: BlockSpec, particles: int) -> bool:
    scaffold = _staged_scaffold(trace, scope, block, "pgibbs")
    if scaffold is None:
        return True
    border = scaffold.border
    stages = len(border)
    rho = particles - 1
    n = rho

    rho_weights = [0.0] * stages
    dbs: list[list[Optional[OmegaDB]]] = [[None] * particles for _ in range(stages)]
    ancestors = [[0] * n + [rho] for _ in range(stages)]
    for t in reversed(range(stages)):
        rho_weights[t], dbs[t][rho] = detach_and_extract(trace, border[t], scaffold)

    xi_weights = [0.0] * n
    for p in range(n):
        regenerate_and_attach(trace, border[0], scaffold, False, OmegaDB())
        xi_weights[p], dbs[0][p] = detach_and_extract(trace, border[0], scaffold)

    for t in range(1, stages):
        new_weights = [0.0] * n
        for p in range(n):
            ancestors[t][p] = sample_log_categorical(trace.rng, xi_weights + [rho_weights[t - 1]])
            _restore_path(trace, border, scaffold, dbs, _ancestor_path(ancestors, t, p))
            regenerate_and_attach(trace, border[t], scaffold, False, OmegaDB())
            new_weights[p], dbs[t][p] = detach_and_extract(trace, border[t], scaffold)
            _detach_stages(trace, border, scaffold, t)
        xi_weights = new_weights

    final, log_alpha = _choose_final(trace, xi_weights, rho_weights[-1])
    path = _ancestor_path(ancestors, stages - 1, final) + [final]
    _restore_path(trace, border, scaffold, dbs, path)
    accepted = final != rho and accept(trace.rng, log_alpha)
    if final != rho and not accepted:
        _detach_stages(trace, border, scaffold, stages)
        _restore_path(trace, border, scaffold, dbs, [rho] * stages)
    if accepted or final == rho:
        trace.stats.accepted += 1
    logger.debug(
        "pgibbs %s %s: %d particles over %d stages, log_alpha=%.4g accepted=%s",
        scope,
        block,
        particles,
        stages,
        log_alpha,
        accepted,
    )
    return accepted or final == rho


# -- on copy-on-write particles ---------------------------------------------


def func_pgibbs_transition(trace: Trace, scope: Value, block: BlockSpec, particles: int) -> bool:
    """Particle Gibbs with each particle held as a :class:`Particle`.

    Raises:
        NonClonableAux: a particle needed a private copy of a store that refuses
            cloning; the old trace is restored first.
    """
    scaffold = _staged_scaffold(trace, scope, block, "func_pgibbs")
    if scaffold is None:
        return True
    border = scaffold.border
    stages = len(border)
    n = particles - 1

    rho_dbs: list[OmegaDB] = [OmegaDB() for _ in range(stages)]
    for t in reversed(range(stages)):
        _, rho_dbs[t] = detach_and_extract(trace, border[t], scaffold)

    try:
        final, log_alpha, rho_particle, chosen = _propagate(trace, scaffold, rho_dbs, n)
    except PetVMError:
        for t in range(stages):
            regenerate_and_attach(trace, border[t], scaffold, True, rho_dbs[t])
        raise

    accepted = final != n and accept(trace.rng, log_alpha)
    if accepted:
        chosen.commit()
    else:
        rho_particle.commit()
    if accepted or final == n:
        trace.stats.accepted += 1
    logger.debug("func_pgibbs %s %s: final particle %d, accepted=%s", scope, block, final, accepted)
    return accepted or final == n


def _propagate(
    trace: Trace, scaffold: Scaffold, rho_dbs: list[OmegaDB], n: int
) -> tuple[int, float, Particle, Particle]:
    border = scaffold.border
    current = [Particle(trace) for _ in range(n + 1)]
    weights = [0.0] * (n + 1)
    for p in range(n):
        weights[p] = regenerate_and_attach(current[p], border[0], scaffold, False, OmegaDB())
    weights[n] = regenerate_and_attach(current[n], border[0], scaffold, True, rho_dbs[0])

    for t in range(1, len(border)):
        extended: list[Particle] = []
        new_weights = [0.0] * (n + 1)
        for p in range(n):
            parent = sample_log_categorical(trace.rng, weights)
            particle = Particle(current[parent])
            new_weights[p] = regenerate_and_attach(particle, border[t], scaffold, False, OmegaDB())
            extended.append(particle)
        rho_particle = Particle(current[n])
        new_weights[n] = regenerate_and_attach(rho_particle, border[t], scaffold, True, rho_dbs[t])
        extended.append(rho_particle)
        current, weights = extended, new_weights

    for particle, weight in zip(current, weights):
        particle.weight = weight
    final, log_alpha = _choose_final(trace, weights[:n], weights[n])
    return final, log_alpha, current[n], current[final]
