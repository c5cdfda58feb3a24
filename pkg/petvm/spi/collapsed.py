"""Collapsed conjugate makers whose applications are exchangeably coupled.

Each maker returns a procedure that keeps sufficient statistics in its aux and
samples from the posterior predictive. Makers report ``children_can_aaa`` so
that a change to their arguments is absorbed by scoring all applications at
once through ``log_density_of_counts`` instead of visiting each of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import betaln, gammaln

from ..exceptions import StatisticsUnderflow, VMTypeError
from ..values import Atom, Boolean, Number, Value, as_bool, as_int, as_number
from .psp import Args, DeterministicPSP, RandomPSP
from .sp import SP, SPAux, SPRecord

__all__ = [
    "BetaBernoulliAux",
    "BetaBernoulliOutputPSP",
    "CRPAux",
    "CRPOutputPSP",
    "MakeBetaBernoulliOutputPSP",
    "MakeCRPOutputPSP",
    "MakeSymDirDiscreteOutputPSP",
    "SymDirDiscreteAux",
    "SymDirDiscreteOutputPSP",
]

_TRUE = Boolean(True)
_FALSE = Boolean(False)


def _positive(value: Value, what: str) -> float:
    number = as_number(value)
    if not number > 0:
        raise VMTypeError(f"{what} must be positive, got {value}")
    return number


class _CollapsedOutputPSP(RandomPSP):
    max_args = 0

    def has_log_density_bound(self) -> bool:
        return True

    def log_density_bound(self, args: Args) -> float:
        return 0.0

    def can_enumerate(self) -> bool:
        return True


class _MakerPSP(DeterministicPSP):
    def children_can_aaa(self) -> bool:
        return True


# -- beta bernoulli ---------------------------------------------------------


@dataclass
class BetaBernoulliAux(SPAux):
    heads: int = 0
    tails: int = 0


class BetaBernoulliOutputPSP(_CollapsedOutputPSP):
    name = "beta_bernoulli"

    def __init__(self, alpha: float, beta: float):
        self.alpha = alpha
        self.beta = beta

    def _p_heads(self, aux: BetaBernoulliAux) -> float:
        return (self.alpha + aux.heads) / (self.alpha + self.beta + aux.heads + aux.tails)

    def simulate(self, args: Args) -> Boolean:
        self.check_arity(args)
        return Boolean(bool(args.rng.random() < self._p_heads(args.aux)))

    def log_density(self, value: Value, args: Args) -> float:
        p = self._p_heads(args.aux)
        return math.log(p) if as_bool(value) else math.log1p(-p)

    def incorporate(self, value: Value, args: Args) -> None:
        aux = args.aux
        if as_bool(value):
            aux.heads += 1
        else:
            aux.tails += 1

    def unincorporate(self, value: Value, args: Args) -> None:
        aux = args.aux
        if as_bool(value):
            if aux.heads == 0:
                raise StatisticsUnderflow("beta_bernoulli has no heads to remove")
            aux.heads -= 1
        else:
            if aux.tails == 0:
                raise StatisticsUnderflow("beta_bernoulli has no tails to remove")
            aux.tails -= 1

    def enumerate_values(self, args: Args, current: Optional[Value] = None) -> list[Value]:
        return [_TRUE, _FALSE]

    def log_density_of_counts(self, aux: BetaBernoulliAux) -> float:
        return float(
            betaln(self.alpha + aux.heads, self.beta + aux.tails) - betaln(self.alpha, self.beta)
        )


class MakeBetaBernoulliOutputPSP(_MakerPSP):
    name = "make_beta_bernoulli"
    min_args = max_args = 2

    def simulate(self, args: Args) -> SPRecord:
        self.check_arity(args)
        alpha = _positive(args[0], "make_beta_bernoulli alpha")
        beta = _positive(args[1], "make_beta_bernoulli beta")
        sp = SP(None, BetaBernoulliOutputPSP(alpha, beta), aux_factory=BetaBernoulliAux)
        return SPRecord.fresh(sp)


# -- chinese restaurant process ---------------------------------------------


@dataclass
class CRPAux(SPAux):
    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0
    next_index: int = 1


class CRPOutputPSP(_CollapsedOutputPSP):
    """Table assignments as atoms; a fresh table takes the next unused index."""

    name = "crp"

    def __init__(self, alpha: float):
        self.alpha = alpha

    def simulate(self, args: Args) -> Atom:
        self.check_arity(args)
        aux: CRPAux = args.aux
        u = args.rng.random() * (aux.total + self.alpha)
        for table in sorted(aux.counts):
            u -= aux.counts[table]
            if u < 0:
                return Atom(table)
        return Atom(aux.next_index)

    def log_density(self, value: Value, args: Args) -> float:
        aux: CRPAux = args.aux
        if not isinstance(value, Atom):
            raise VMTypeError(f"crp values are atoms, got {value}")
        count = aux.counts.get(value.index, 0)
        weight = count if count else self.alpha
        return math.log(weight / (aux.total + self.alpha))

    def incorporate(self, value: Value, args: Args) -> None:
        aux: CRPAux = args.aux
        index = value.index
        aux.counts[index] = aux.counts.get(index, 0) + 1
        aux.total += 1
        aux.next_index = max(aux.next_index, index + 1)

    def unincorporate(self, value: Value, args: Args) -> None:
        aux: CRPAux = args.aux
        index = value.index
        count = aux.counts.get(index, 0)
        if count == 0:
            raise StatisticsUnderflow(f"crp table {index} is already empty")
        if count == 1:
            del aux.counts[index]
        else:
            aux.counts[index] = count - 1
        aux.total -= 1

    def enumerate_values(self, args: Args, current: Optional[Value] = None) -> list[Value]:
        aux: CRPAux = args.aux
        tables = [Atom(t) for t in sorted(aux.counts)]
        if isinstance(current, Atom) and current.index not in aux.counts:
            fresh = current
        else:
            fresh = Atom(aux.next_index)
        return tables + [fresh]

    def log_density_of_counts(self, aux: CRPAux) -> float:
        counts = np.fromiter(aux.counts.values(), dtype=float, count=len(aux.counts))
        return float(
            len(counts) * math.log(self.alpha)
            + gammaln(self.alpha)
            - gammaln(self.alpha + aux.total)
            + gammaln(counts).sum()
        )


class MakeCRPOutputPSP(_MakerPSP):
    name = "make_crp"
    min_args = max_args = 1

    def simulate(self, args: Args) -> SPRecord:
        self.check_arity(args)
        alpha = _positive(args[0], "make_crp alpha")
        return SPRecord.fresh(SP(None, CRPOutputPSP(alpha), aux_factory=CRPAux))


# -- symmetric dirichlet discrete -------------------------------------------


@dataclass
class SymDirDiscreteAux(SPAux):
    counts: list[int] = field(default_factory=list)


class SymDirDiscreteOutputPSP(_CollapsedOutputPSP):
    """Category indices ``0 .. n-1`` with the Dirichlet weights integrated out."""

    name = "sym_dir_discrete"

    def __init__(self, alpha: float, n: int):
        self.alpha = alpha
        self.n = n

    def _index(self, value: Value) -> int:
        index = as_int(value)
        if not 0 <= index < self.n:
            raise VMTypeError(f"Category {index} outside 0..{self.n - 1}")
        return index

    def _probabilities(self, aux: SymDirDiscreteAux) -> np.ndarray:
        weights = np.asarray(aux.counts, dtype=float) + self.alpha
        return weights / weights.sum()

    def simulate(self, args: Args) -> Number:
        self.check_arity(args)
        return Number(int(args.rng.choice(self.n, p=self._probabilities(args.aux))))

    def log_density(self, value: Value, args: Args) -> float:
        aux: SymDirDiscreteAux = args.aux
        index = self._index(value)
        return math.log((self.alpha + aux.counts[index]) / (self.n * self.alpha + sum(aux.counts)))

    def incorporate(self, value: Value, args: Args) -> None:
        args.aux.counts[self._index(value)] += 1

    def unincorporate(self, value: Value, args: Args) -> None:
        counts = args.aux.counts
        index = self._index(value)
        if counts[index] == 0:
            raise StatisticsUnderflow(f"sym_dir_discrete category {index} has no counts to remove")
        counts[index] -= 1

    def enumerate_values(self, args: Args, current: Optional[Value] = None) -> list[Value]:
        return [Number(i) for i in range(self.n)]

    def log_density_of_counts(self, aux: SymDirDiscreteAux) -> float:
        counts = np.asarray(aux.counts, dtype=float)
        total = counts.sum()
        return float(
            gammaln(self.n * self.alpha)
            - gammaln(self.n * self.alpha + total)
            + (gammaln(self.alpha + counts) - gammaln(self.alpha)).sum()
        )


class MakeSymDirDiscreteOutputPSP(_MakerPSP):
    name = "make_sym_dir_discrete"
    min_args = max_args = 2

    def simulate(self, args: Args) -> SPRecord:
        self.check_arity(args)
        alpha = _positive(args[0], "make_sym_dir_discrete alpha")
        n = as_int(args[1])
        if n < 1:
            raise VMTypeError(f"make_sym_dir_discrete needs at least one category, got {n}")
        sp = SP(None, SymDirDiscreteOutputPSP(alpha, n), aux_factory=lambda: SymDirDiscreteAux([0] * n))
        return SPRecord.fresh(sp)
