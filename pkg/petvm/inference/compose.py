"""Running inference expressions: operator dispatch plus cycle and mixture hybrids."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from ..exceptions import InferenceError
from .expressions import (
    MH,
    Cycle,
    DriftMH,
    EnumerativeGibbs,
    FuncPGibbs,
    InferenceExpr,
    MeanField,
    Mixture,
    PGibbs,
    Rejection,
)
from .gibbs import enumerative_gibbs_transition
from .meanfield import meanfield_transition
from .mh import mh_transition
from .pgibbs import func_pgibbs_transition, pgibbs_transition
from .rejection import rejection_transition

if TYPE_CHECKING:
    from ..trace import Trace

logger = logging.getLogger(__name__)

__all__ = ["run_cycle", "run_inference", "run_mixture"]


def run_inference(trace: Trace, expr: InferenceExpr) -> None:
    """Run every transition named by ``expr`` against ``trace``."""
    if isinstance(expr, Cycle):
        run_cycle(trace, expr)
    elif isinstance(expr, Mixture):
        run_mixture(trace, expr)
    elif isinstance(expr, FuncPGibbs):
        for _ in range(expr.transitions):
            func_pgibbs_transition(trace, expr.scope, expr.block, expr.particles)
    elif isinstance(expr, PGibbs):
        for _ in range(expr.transitions):
            pgibbs_transition(trace, expr.scope, expr.block, expr.particles)
    elif isinstance(expr, DriftMH):
        for _ in range(expr.transitions):
            mh_transition(trace, expr.scope, expr.block, drift=True)
    elif isinstance(expr, MH):
        for _ in range(expr.transitions):
            mh_transition(trace, expr.scope, expr.block)
    elif isinstance(expr, Rejection):
        for _ in range(expr.transitions):
            rejection_transition(trace, expr.scope, expr.block)
    elif isinstance(expr, EnumerativeGibbs):
        for _ in range(expr.transitions):
            enumerative_gibbs_transition(trace, expr.scope, expr.block)
    elif isinstance(expr, MeanField):
        for _ in range(expr.transitions):
            meanfield_transition(trace, expr.scope, expr.block, expr.iterations)
    else:
        raise InferenceError(f"Unknown inference expression: {expr!r}")


def run_cycle(trace: Trace, expr: Cycle) -> None:
    """Each sub-operator in order, the whole sequence ``transitions`` times."""
    for _ in range(expr.transitions):
        for operator in expr.operators:
            run_inference(trace, operator)


def run_mixture(trace: Trace, expr: Mixture) -> None:
    """One sub-operator per repetition, drawn by the normalized weights."""
    for _ in range(expr.transitions):
        index = int(trace.rng.choice(len(expr.operators), p=list(expr.weights)))
        logger.debug("mixture picked operator %d of %d", index, len(expr.operators))
        run_inference(trace, expr.operators[index])
