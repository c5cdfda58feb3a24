"""Log-space helpers shared by the transition operators."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from scipy.special import logsumexp

__all__ = ["accept", "boosted_log_alpha", "sample_log_categorical"]


def accept(rng: np.random.Generator, log_alpha: float) -> bool:
    """Metropolis-Hastings coin; always consumes one uniform draw."""
    u = rng.random()
    if math.isnan(log_alpha) or log_alpha == -math.inf:
        return False
    return u == 0.0 or math.log(u) < log_alpha


def sample_log_categorical(rng: np.random.Generator, log_weights: Sequence[float]) -> int:
    """Index drawn in proportion to exp(weight); a single candidate consumes no randomness."""
    if len(log_weights) == 1:
        return 0
    weights = np.asarray(log_weights, dtype=float)
    if not np.isfinite(weights).any():
        return int(rng.integers(len(weights)))
    probabilities = np.exp(weights - logsumexp(weights))
    return int(rng.choice(len(weights), p=probabilities / probabilities.sum()))


def boosted_log_alpha(xi_weights: Sequence[float], final_index: int, rho_weight: float) -> float:
    """log(w_{-rho} / w_{-xi}) for the multiple-proposal acceptance rule.

    The chosen proposal is removed from the list instead of being subtracted in
    log space.
    """
    others = [w for i, w in enumerate(xi_weights) if i != final_index] + [rho_weight]
    return float(logsumexp(xi_weights) - logsumexp(others))
