"""Local kernels attached to scaffold nodes.

A node without a kernel is resimulated from its PSP and contributes no weight.
A kernel replaces that proposal: ``simulate`` draws the new value,
``weight`` returns the log of P(new)/K(new) for the node and ``reverse_weight``
returns the same quantity for the value being detached.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, Any, Optional

import numpy as np
from scipy.special import expit, logit

from .values import Boolean, Number, Value, as_bool, as_number

if TYPE_CHECKING:
    from .spi.psp import PSP, Args
    from .spi.sp import SPRecord
    from .trace import Trace

__all__ = [
    "AAAKernel",
    "BernoulliVariationalKernel",
    "DeterministicKernel",
    "DriftKernel",
    "LocalKernel",
    "NormalVariationalKernel",
    "VariationalKernel",
]

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
_MAX_LOG_SCALE = 5.0


class LocalKernel:
    def simulate(self, trace: Trace, old_value: Any, args: Args) -> Any:
        raise NotImplementedError

    def weight(self, trace: Trace, new_value: Any, old_value: Any, args: Args) -> float:
        return 0.0

    def reverse_weight(self, trace: Trace, old_value: Any, args: Args) -> float:
        return self.weight(trace, old_value, None, args)


class DeterministicKernel(LocalKernel):
    """Proposes a fixed value; the weight is the value's density under the PSP."""

    def __init__(self, psp: PSP, value: Value):
        self.psp = psp
        self.value = value

    def simulate(self, trace: Trace, old_value: Any, args: Args) -> Value:
        return self.value

    def weight(self, trace: Trace, new_value: Any, old_value: Any, args: Args) -> float:
        return self.psp.log_density(new_value, args)


class DriftKernel(LocalKernel):
    """Symmetric random walk around the value the node held when the scaffold was built.

    Proposals regenerate against an empty database, so the centre is captured here.
    """

    def __init__(self, psp: PSP, sigma: float, center: Value):
        self.psp = psp
        self.sigma = sigma
        self.center = center

    def simulate(self, trace: Trace, old_value: Any, args: Args) -> Value:
        return self.psp.drift(self.center if old_value is None else old_value, args, self.sigma)

    def weight(self, trace: Trace, new_value: Any, old_value: Any, args: Args) -> float:
        return self.psp.log_density(new_value, args)


class AAAKernel(LocalKernel):
    """Re-simulates a maker and scores all of its made procedure's applications at once.

    The new record keeps the applications' sufficient statistics, which the
    evaluator stashed when the old record was torn down.
    """

    def __init__(self, maker_psp: PSP):
        self.maker_psp = maker_psp

    def simulate(self, trace: Trace, old_value: Any, args: Args) -> SPRecord:
        record = self.maker_psp.simulate(args)
        if args.made_aux is not None:
            record.aux = args.made_aux
        return record

    def weight(self, trace: Trace, new_value: Any, old_value: Any, args: Args) -> float:
        return new_value.sp.output_psp.log_density_of_counts(new_value.aux)


class VariationalKernel(LocalKernel):
    """Parametric proposal Q trained by score-function gradient ascent on E_Q[log P/Q]."""

    parameters: np.ndarray

    def __init__(self, psp: PSP):
        self.psp = psp
        self.sample: Optional[Value] = None

    def log_q(self, value: Value) -> float:
        raise NotImplementedError

    def gradient(self) -> np.ndarray:
        """Gradient of log Q at the last simulated value."""
        raise NotImplementedError

    def weight(self, trace: Trace, new_value: Any, old_value: Any, args: Args) -> float:
        return self.psp.log_density(new_value, args) - self.log_q(new_value)

    def update(self, gain: float, step: float) -> None:
        self.parameters = self.parameters + step * gain * self.gradient()


class NormalVariationalKernel(VariationalKernel):
    """Gaussian proposal parameterized by mean and log scale."""

    def __init__(self, psp: PSP, mu: float, sigma: float):
        super().__init__(psp)
        self.parameters = np.array([mu, math.log(sigma)])

    @property
    def mu(self) -> float:
        return float(self.parameters[0])

    @property
    def sigma(self) -> float:
        return math.exp(float(np.clip(self.parameters[1], -_MAX_LOG_SCALE, _MAX_LOG_SCALE)))

    def simulate(self, trace: Trace, old_value: Any, args: Args) -> Number:
        self.sample = Number(trace.rng.normal(self.mu, self.sigma))
        return self.sample

    def log_q(self, value: Value) -> float:
        z = (as_number(value) - self.mu) / self.sigma
        return -0.5 * z * z - math.log(self.sigma) - _HALF_LOG_2PI

    def gradient(self) -> np.ndarray:
        z = (as_number(self.sample) - self.mu) / self.sigma
        return np.array([z / self.sigma, z * z - 1.0])

    def update(self, gain: float, step: float) -> None:
        super().update(gain, step)
        self.parameters[1] = np.clip(self.parameters[1], -_MAX_LOG_SCALE, _MAX_LOG_SCALE)


class BernoulliVariationalKernel(VariationalKernel):
    """Bernoulli proposal parameterized by its logit."""

    def __init__(self, psp: PSP, p: float):
        super().__init__(psp)
        p = min(max(p, 1e-6), 1 - 1e-6)
        self.parameters = np.array([float(logit(p))])

    @property
    def p(self) -> float:
        return float(expit(self.parameters[0]))

    def simulate(self, trace: Trace, old_value: Any, args: Args) -> Boolean:
        self.sample = Boolean(bool(trace.rng.random() < self.p))
        return self.sample

    def log_q(self, value: Value) -> float:
        p = self.p
        return math.log(p) if as_bool(value) else math.log1p(-p)

    def gradient(self) -> np.ndarray:
        return np.array([float(as_bool(self.sample)) - self.p])
