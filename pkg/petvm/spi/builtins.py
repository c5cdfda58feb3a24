"""The builtin procedure library bound in every trace's global environment."""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Any, Callable, Optional

import numpy as np
from scipy.stats import beta as beta_dist
from scipy.stats import gamma as gamma_dist

from ..exceptions import VMTypeError
from ..kernels import BernoulliVariationalKernel, NormalVariationalKernel
from ..values import (
    Atom,
    Boolean,
    MapValue,
    Nil,
    Number,
    Pair,
    Symbol,
    Value,
    Vector,
    as_bool,
    as_int,
    as_number,
    list_items,
    make_list,
)
from .collapsed import MakeBetaBernoulliOutputPSP, MakeCRPOutputPSP, MakeSymDirDiscreteOutputPSP
from .hmm import MakeHMMOutputPSP
from .procedures import procedure_sps
from .psp import Args, FunctionPSP, RandomPSP
from .sp import SP

__all__ = [
    "ALIASES",
    "AtomCategoricalOutputPSP",
    "BernoulliOutputPSP",
    "BetaOutputPSP",
    "CategoricalOutputPSP",
    "GammaOutputPSP",
    "NoisyLogisticMapOutputPSP",
    "NormalOutputPSP",
    "UniformContinuousOutputPSP",
    "UniformDiscreteOutputPSP",
    "builtin_sps",
]

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


# -- deterministic functions ------------------------------------------------


def _numbers(values: Sequence[Value]) -> list[float]:
    return [as_number(v) for v in values]


def _plus(*values: Value) -> Number:
    return Number(math.fsum(_numbers(values)))


def _minus(a: Value, b: Optional[Value] = None) -> Number:
    if b is None:
        return Number(-as_number(a))
    return Number(as_number(a) - as_number(b))


def _times(*values: Value) -> Number:
    return Number(math.prod(_numbers(values)))


def _div(a: Value, b: Value) -> Number:
    denominator = as_number(b)
    if denominator == 0:
        raise VMTypeError("Division by zero")
    return Number(as_number(a) / denominator)


def _compare(op: Callable[[float, float], bool]) -> Callable[[Value, Value], Boolean]:
    return lambda a, b: Boolean(op(as_number(a), as_number(b)))


def _log_fn(a: Value) -> Number:
    x = as_number(a)
    if x < 0:
        raise VMTypeError(f"log of a negative number: {a}")
    return Number(_log(x))


def _pow(a: Value, b: Value) -> Number:
    try:
        return Number(math.pow(as_number(a), as_number(b)))
    except (ValueError, OverflowError) as exc:
        raise VMTypeError(f"pow({a}, {b}): {exc}") from None


def _first(value: Value) -> Value:
    if not isinstance(value, Pair):
        raise VMTypeError(f"first of a non-pair: {value}")
    return value.first


def _rest(value: Value) -> Value:
    if not isinstance(value, Pair):
        raise VMTypeError(f"rest of a non-pair: {value}")
    return value.rest


def _dict(keys: Value, values: Value) -> MapValue:
    key_items, value_items = list_items(keys), list_items(values)
    if len(key_items) != len(value_items):
        raise VMTypeError(f"dict needs as many values as keys, got {len(key_items)} and {len(value_items)}")
    return MapValue(zip(key_items, value_items))


def _lookup(container: Value, key: Value) -> Value:
    if isinstance(container, MapValue):
        return container.lookup(key)
    items = list_items(container)
    index = as_int(key)
    if not 0 <= index < len(items):
        raise VMTypeError(f"Index {index} out of range for a sequence of length {len(items)}")
    return items[index]


def _contains(container: Value, key: Value) -> Boolean:
    if isinstance(container, MapValue):
        return Boolean(container.contains(key))
    return Boolean(key in list_items(container))


def _size(container: Value) -> Number:
    if isinstance(container, MapValue):
        return Number(len(container))
    return Number(len(list_items(container)))


def _is(kind: type) -> Callable[[Value], Boolean]:
    return lambda value: Boolean(isinstance(value, kind))


# name -> (function, min args, max args)
_FUNCTIONS: dict[str, tuple[Callable[..., Value], int, Optional[int]]] = {
    "plus": (_plus, 0, None),
    "minus": (_minus, 1, 2),
    "times": (_times, 0, None),
    "div": (_div, 2, 2),
    "eq": (lambda a, b: Boolean(a == b), 2, 2),
    "gt": (_compare(lambda x, y: x > y), 2, 2),
    "lt": (_compare(lambda x, y: x < y), 2, 2),
    "gte": (_compare(lambda x, y: x >= y), 2, 2),
    "lte": (_compare(lambda x, y: x <= y), 2, 2),
    "not": (lambda a: Boolean(not as_bool(a)), 1, 1),
    "log": (_log_fn, 1, 1),
    "exp": (lambda a: Number(math.exp(min(as_number(a), 709.0))), 1, 1),
    "pow": (_pow, 2, 2),
    "abs": (lambda a: Number(abs(as_number(a))), 1, 1),
    "list": (lambda *items: make_list(items), 0, None),
    "vector": (lambda *items: Vector(tuple(items)), 0, None),
    "pair": (lambda a, b: Pair(a, b), 2, 2),
    "first": (_first, 1, 1),
    "rest": (_rest, 1, 1),
    "second": (lambda value: _first(_rest(value)), 1, 1),
    "dict": (_dict, 2, 2),
    "lookup": (_lookup, 2, 2),
    "contains": (_contains, 2, 2),
    "size": (_size, 1, 1),
    "is_pair": (_is(Pair), 1, 1),
    "is_symbol": (_is(Symbol), 1, 1),
    "is_number": (_is(Number), 1, 1),
    "is_atom": (_is(Atom), 1, 1),
    "is_nil": (_is(Nil), 1, 1),
}

ALIASES = {
    "+": "plus",
    "-": "minus",
    "*": "times",
    "/": "div",
    "=": "eq",
    ">": "gt",
    "<": "lt",
    ">=": "gte",
    "<=": "lte",
    "uniform": "uniform_continuous",
}


# -- random choices ---------------------------------------------------------


class BernoulliOutputPSP(RandomPSP):
    """Coin flip with weight ``p`` (0.5 when omitted)."""

    min_args = 0
    max_args = 1

    def __init__(self, name: str = "bernoulli"):
        self.name = name

    def _p(self, args: Args) -> float:
        p = as_number(args[0]) if len(args) else 0.5
        if not 0.0 <= p <= 1.0:
            raise VMTypeError(f"{self.name} weight must lie in [0, 1], got {p}")
        return p

    def simulate(self, args: Args) -> Boolean:
        self.check_arity(args)
        return Boolean(bool(args.rng.random() < self._p(args)))

    def log_density(self, value: Value, args: Args) -> float:
        p = self._p(args)
        return _log(p) if as_bool(value) else _log(1.0 - p)

    def has_log_density_bound(self) -> bool:
        return True

    def log_density_bound(self, args: Args) -> float:
        return 0.0

    def can_enumerate(self) -> bool:
        return True

    def enumerate_values(self, args: Args, current: Optional[Value] = None) -> list[Value]:
        return [Boolean(True), Boolean(False)]

    def variational_kernel(self, args: Args) -> BernoulliVariationalKernel:
        return BernoulliVariationalKernel(self, self._p(args))


class NormalOutputPSP(RandomPSP):
    name = "normal"
    min_args = max_args = 2

    def _params(self, args: Args) -> tuple[float, float]:
        self.check_arity(args)
        mu, sigma = as_number(args[0]), as_number(args[1])
        if not sigma > 0:
            raise VMTypeError(f"normal scale must be positive, got {sigma}")
        return mu, sigma

    def simulate(self, args: Args) -> Number:
        mu, sigma = self._params(args)
        return Number(args.rng.normal(mu, sigma))

    def log_density(self, value: Value, args: Args) -> float:
        mu, sigma = self._params(args)
        z = (as_number(value) - mu) / sigma
        return -0.5 * z * z - math.log(sigma) - _HALF_LOG_2PI

    def has_log_density_bound(self) -> bool:
        return True

    def log_density_bound(self, args: Args) -> float:
        if len(args) != 2 or args[1] is None:
            return math.inf
        return -math.log(as_number(args[1])) - _HALF_LOG_2PI

    def has_drift_kernel(self) -> bool:
        return True

    def drift(self, value: Value, args: Args, sigma: float) -> Number:
        return Number(as_number(value) + sigma * args.rng.standard_normal())

    def variational_kernel(self, args: Args) -> NormalVariationalKernel:
        mu, sigma = self._params(args)
        return NormalVariationalKernel(self, mu, sigma)


class GammaOutputPSP(RandomPSP):
    """Gamma with shape and rate."""

    name = "gamma"
    min_args = max_args = 2

    def _params(self, args: Args) -> tuple[float, float]:
        self.check_arity(args)
        shape, rate = as_number(args[0]), as_number(args[1])
        if not (shape > 0 and rate > 0):
            raise VMTypeError(f"gamma shape and rate must be positive, got {shape} and {rate}")
        return shape, rate

    def simulate(self, args: Args) -> Number:
        shape, rate = self._params(args)
        return Number(args.rng.gamma(shape, 1.0 / rate))

    def log_density(self, value: Value, args: Args) -> float:
        shape, rate = self._params(args)
        return float(gamma_dist.logpdf(as_number(value), shape, scale=1.0 / rate))

    def has_log_density_bound(self) -> bool:
        return True

    def log_density_bound(self, args: Args) -> float:
        if None in args.operand_values:
            return math.inf
        shape, rate = self._params(args)
        if shape < 1:
            return math.inf
        return float(gamma_dist.logpdf((shape - 1) / rate, shape, scale=1.0 / rate))


class BetaOutputPSP(RandomPSP):
    name = "beta"
    min_args = max_args = 2

    def _params(self, args: Args) -> tuple[float, float]:
        self.check_arity(args)
        a, b = as_number(args[0]), as_number(args[1])
        if not (a > 0 and b > 0):
            raise VMTypeError(f"beta shapes must be positive, got {a} and {b}")
        return a, b

    def simulate(self, args: Args) -> Number:
        a, b = self._params(args)
        return Number(args.rng.beta(a, b))

    def log_density(self, value: Value, args: Args) -> float:
        a, b = self._params(args)
        return float(beta_dist.logpdf(as_number(value), a, b))

    def has_log_density_bound(self) -> bool:
        return True

    def log_density_bound(self, args: Args) -> float:
        if None in args.operand_values:
            return math.inf
        a, b = self._params(args)
        if a < 1 or b < 1:
            return math.inf
        if a == 1 and b == 1:
            return 0.0
        return float(beta_dist.logpdf((a - 1) / (a + b - 2), a, b))


class UniformContinuousOutputPSP(RandomPSP):
    name = "uniform_continuous"
    min_args = max_args = 2

    def _params(self, args: Args) -> tuple[float, float]:
        self.check_arity(args)
        low, high = as_number(args[0]), as_number(args[1])
        if not low < high:
            raise VMTypeError(f"uniform_continuous needs low < high, got {low} and {high}")
        return low, high

    def simulate(self, args: Args) -> Number:
        low, high = self._params(args)
        return Number(args.rng.uniform(low, high))

    def log_density(self, value: Value, args: Args) -> float:
        low, high = self._params(args)
        x = as_number(value)
        return -math.log(high - low) if low <= x <= high else -math.inf

    def has_log_density_bound(self) -> bool:
        return True

    def log_density_bound(self, args: Args) -> float:
        if None in args.operand_values:
            return math.inf
        low, high = self._params(args)
        return -math.log(high - low)


class UniformDiscreteOutputPSP(RandomPSP):
    """Integers ``low .. high - 1``."""

    name = "uniform_discrete"
    min_args = max_args = 2

    def _params(self, args: Args) -> tuple[int, int]:
        self.check_arity(args)
        low, high = as_int(args[0]), as_int(args[1])
        if not low < high:
            raise VMTypeError(f"uniform_discrete needs low < high, got {low} and {high}")
        return low, high

    def simulate(self, args: Args) -> Number:
        low, high = self._params(args)
        return Number(int(args.rng.integers(low, high)))

    def log_density(self, value: Value, args: Args) -> float:
        low, high = self._params(args)
        x = as_number(value)
        return -math.log(high - low) if x == int(x) and low <= x < high else -math.inf

    def has_log_density_bound(self) -> bool:
        return True

    def log_density_bound(self, args: Args) -> float:
        if None in args.operand_values:
            return math.inf
        low, high = self._params(args)
        return -math.log(high - low)

    def can_enumerate(self) -> bool:
        return True

    def enumerate_values(self, args: Args, current: Optional[Value] = None) -> list[Value]:
        low, high = self._params(args)
        return [Number(i) for i in range(low, high)]


class CategoricalOutputPSP(RandomPSP):
    """Draws an index ``0 .. n-1`` with probability proportional to a list of weights."""

    name = "categorical"
    min_args = max_args = 1

    def _probabilities(self, args: Args) -> np.ndarray:
        self.check_arity(args)
        weights = np.asarray(_numbers(list_items(args[0])), dtype=float)
        if weights.size == 0 or (weights < 0).any() or not weights.sum() > 0:
            raise VMTypeError(f"{self.name} needs non-negative weights with a positive sum, got {args[0]}")
        return weights / weights.sum()

    def _wrap(self, index: int) -> Value:
        return Number(index)

    def _index(self, value: Value) -> int:
        return as_int(value)

    def simulate(self, args: Args) -> Value:
        p = self._probabilities(args)
        return self._wrap(int(args.rng.choice(len(p), p=p)))

    def log_density(self, value: Value, args: Args) -> float:
        p = self._probabilities(args)
        index = self._index(value)
        return _log(float(p[index])) if 0 <= index < len(p) else -math.inf

    def has_log_density_bound(self) -> bool:
        return True

    def log_density_bound(self, args: Args) -> float:
        if None in args.operand_values:
            return 0.0
        return math.log(float(self._probabilities(args).max()))

    def can_enumerate(self) -> bool:
        return True

    def enumerate_values(self, args: Args, current: Optional[Value] = None) -> list[Value]:
        return [self._wrap(i) for i in range(len(self._probabilities(args)))]


class AtomCategoricalOutputPSP(CategoricalOutputPSP):
    """Categorical draw returning ``atom<i>`` instead of the index ``i``."""

    name = "atom_categorical"

    def _wrap(self, index: int) -> Value:
        return Atom(index)

    def _index(self, value: Value) -> int:
        if not isinstance(value, Atom):
            raise VMTypeError(f"atom_categorical values are atoms, got {value}")
        return value.index


class NoisyLogisticMapOutputPSP(RandomPSP):
    """A likelihood-free simulator: a few chaotic logistic-map steps plus Gaussian noise.

    ``(noisy_logistic_map x)`` or ``(noisy_logistic_map x r)``. It reports no
    density, so changes to its arguments are always resampled through it.
    """

    name = "noisy_logistic_map"
    min_args = 1
    max_args = 2
    steps = 8
    noise = 0.01

    def simulate(self, args: Args) -> Number:
        self.check_arity(args)
        x = min(max(as_number(args[0]), 0.0), 1.0)
        r = as_number(args[1]) if len(args) > 1 else 3.9
        for _ in range(self.steps):
            x = r * x * (1.0 - x)
        return Number(x + self.noise * args.rng.standard_normal())

    def can_absorb(self, trace: Any, node: Any, parent: Any) -> bool:
        return False


def builtin_sps() -> dict[str, SP]:
    """Fresh instances of every builtin procedure, aliases included, keyed by global name."""
    sps: dict[str, SP] = {name: SP(None, FunctionPSP(name, fn, lo, hi)) for name, (fn, lo, hi) in _FUNCTIONS.items()}
    random_psps = [
        BernoulliOutputPSP("bernoulli"),
        BernoulliOutputPSP("flip"),
        NormalOutputPSP(),
        GammaOutputPSP(),
        BetaOutputPSP(),
        UniformContinuousOutputPSP(),
        UniformDiscreteOutputPSP(),
        CategoricalOutputPSP(),
        AtomCategoricalOutputPSP(),
        NoisyLogisticMapOutputPSP(),
        MakeBetaBernoulliOutputPSP(),
        MakeCRPOutputPSP(),
        MakeSymDirDiscreteOutputPSP(),
        MakeHMMOutputPSP(),
    ]
    sps.update((psp.name, SP(None, psp)) for psp in random_psps)
    sps.update(procedure_sps())
    sps.update((alias, sps[target]) for alias, target in ALIASES.items())
    return sps
