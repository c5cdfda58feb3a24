"""Uncollapsed lazy hidden Markov model.

``(make_hmm num_states transition_alpha num_symbols emission_alpha)`` draws
transition and emission matrices from symmetric Dirichlet priors and returns a
procedure. ``(my_hmm seq t)`` samples the symbol emitted at step ``t`` of
sequence ``seq``. The hidden state chain lives in the procedure's aux and is
extended on demand through latent simulation requests. The internal
transition operator resamples all latent chains by forward filtering and
backward sampling given every incorporated emission.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Hashable
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.stats import dirichlet

from ..exceptions import MissingLatent, StatisticsUnderflow, VMTypeError
from ..values import Number, Value, as_bool, as_int, as_number
from .psp import Args, DeterministicPSP, RandomPSP, Request
from .sp import SP, SPAux, SPRecord

logger = logging.getLogger(__name__)

__all__ = ["HMMAux", "HMMOutputPSP", "HMMSP", "MakeHMMOutputPSP"]

# Dirichlet draws with small concentrations underflow to exact zeros.
_MIN_PROBABILITY = 1e-300

Step = tuple[int, int]


@dataclass
class HMMAux(SPAux):
    """Latent chains per sequence, live request counts and incorporated emissions."""

    latents: dict[int, list[int]] = field(default_factory=dict)
    lsr_counts: dict[Step, int] = field(default_factory=dict)
    observations: dict[Step, list[int]] = field(default_factory=dict)
    clonable: bool = True


def _sample_stochastic_matrix(rng: np.random.Generator, alpha: float, rows: int, cols: int) -> np.ndarray:
    matrix = rng.dirichlet(np.full(cols, alpha), size=rows)
    matrix = np.maximum(matrix, _MIN_PROBABILITY)
    return matrix / matrix.sum(axis=1, keepdims=True)


def _step(args: Args) -> Step:
    seq, t = as_int(args[0]), as_int(args[1])
    if t < 0:
        raise VMTypeError(f"HMM time steps start at 0, got {t}")
    return seq, t


class HMMRequestPSP(DeterministicPSP):
    name = "hmm_request"
    min_args = max_args = 2

    def simulate(self, args: Args) -> Request:
        self.check_arity(args)
        return Request(lsrs=(_step(args),))


class HMMOutputPSP(RandomPSP):
    name = "hmm"
    min_args = max_args = 2

    def __init__(self, initial: np.ndarray, transition: np.ndarray, emission: np.ndarray):
        self.initial = initial
        self.transition = transition
        self.emission = emission

    def _state(self, args: Args) -> int:
        seq, t = _step(args)
        return args.aux.latents[seq][t]

    def _symbol(self, value: Value) -> int:
        symbol = as_int(value)
        if not 0 <= symbol < self.emission.shape[1]:
            raise VMTypeError(f"HMM symbol {symbol} outside 0..{self.emission.shape[1] - 1}")
        return symbol

    def simulate(self, args: Args) -> Number:
        self.check_arity(args)
        row = self.emission[self._state(args)]
        return Number(int(args.rng.choice(len(row), p=row)))

    def log_density(self, value: Value, args: Args) -> float:
        return math.log(self.emission[self._state(args), self._symbol(value)])

    def has_log_density_bound(self) -> bool:
        return True

    def log_density_bound(self, args: Args) -> float:
        return 0.0

    def can_enumerate(self) -> bool:
        return True

    def enumerate_values(self, args: Args, current: Optional[Value] = None) -> list[Value]:
        return [Number(s) for s in range(self.emission.shape[1])]

    def incorporate(self, value: Value, args: Args) -> None:
        args.aux.observations.setdefault(_step(args), []).append(self._symbol(value))

    def unincorporate(self, value: Value, args: Args) -> None:
        step = _step(args)
        observed = args.aux.observations.get(step, [])
        symbol = self._symbol(value)
        if symbol not in observed:
            raise StatisticsUnderflow(f"HMM emission {symbol} at {step} was never incorporated")
        observed.remove(symbol)
        if not observed:
            del args.aux.observations[step]

    def log_density_of_counts(self, aux: HMMAux) -> float:
        """Joint log probability of the latent chains and the emissions under these matrices."""
        total = 0.0
        for chain in aux.latents.values():
            if not chain:
                continue
            states = np.asarray(chain)
            total += math.log(self.initial[states[0]])
            total += float(np.log(self.transition[states[:-1], states[1:]]).sum())
        for (seq, t), symbols in aux.observations.items():
            state = aux.latents[seq][t]
            total += float(np.log(self.emission[state, symbols]).sum())
        return total


class HMMSP(SP):
    """The made procedure: matrices on the output PSP, latent chains in the aux."""

    def __init__(self, output_psp: HMMOutputPSP, clonable: bool = True):
        super().__init__(HMMRequestPSP(), output_psp, name="hmm", aux_factory=lambda: HMMAux(clonable=clonable))
        self.hmm = output_psp

    def construct_latent_db(self) -> dict[Step, int]:
        return {}

    def simulate_latents(
        self, aux: HMMAux, lsr: Hashable, restore: bool, latent_db: Any, rng: np.random.Generator
    ) -> float:
        seq, t = lsr
        aux.lsr_counts[lsr] = aux.lsr_counts.get(lsr, 0) + 1
        chain = aux.latents.setdefault(seq, [])
        while len(chain) <= t:
            k = len(chain)
            if restore:
                if latent_db is None or (seq, k) not in latent_db:
                    raise MissingLatent(f"No archived latent for sequence {seq} at step {k}")
                chain.append(latent_db[(seq, k)])
            elif k == 0:
                chain.append(int(rng.choice(len(self.hmm.initial), p=self.hmm.initial)))
            else:
                row = self.hmm.transition[chain[-1]]
                chain.append(int(rng.choice(len(row), p=row)))
        return 0.0

    def detach_latents(self, aux: HMMAux, lsr: Hashable, latent_db: Any) -> float:
        count = aux.lsr_counts.get(lsr, 0)
        if count == 0:
            return 0.0
        if count == 1:
            del aux.lsr_counts[lsr]
        else:
            aux.lsr_counts[lsr] = count - 1
        seq = lsr[0]
        live = [t for (s, t) in aux.lsr_counts if s == seq]
        keep = max(live) + 1 if live else 0
        chain = aux.latents.get(seq, [])
        for k in range(keep, len(chain)):
            latent_db[(seq, k)] = chain[k]
        del chain[keep:]
        if not chain:
            aux.latents.pop(seq, None)
        return 0.0

    def has_ae_kernel(self) -> bool:
        return True

    def ae_infer(self, aux: HMMAux, rng: np.random.Generator) -> None:
        for seq, chain in aux.latents.items():
            if chain:
                aux.latents[seq] = self._sample_chain(aux, seq, len(chain), rng)

    def _sample_chain(self, aux: HMMAux, seq: int, length: int, rng: np.random.Generator) -> list[int]:
        initial, transition, emission = self.hmm.initial, self.hmm.transition, self.hmm.emission
        num_states = len(initial)
        likelihood = np.ones((length, num_states))
        for t in range(length):
            for symbol in aux.observations.get((seq, t), ()):
                likelihood[t] *= emission[:, symbol]

        # forward pass, normalized per step
        alpha = np.zeros((length, num_states))
        alpha[0] = initial * likelihood[0]
        alpha[0] /= alpha[0].sum()
        for t in range(1, length):
            alpha[t] = (alpha[t - 1] @ transition) * likelihood[t]
            alpha[t] /= alpha[t].sum()

        states = [0] * length
        states[-1] = int(rng.choice(num_states, p=alpha[-1]))
        for t in range(length - 2, -1, -1):
            weights = alpha[t] * transition[:, states[t + 1]]
            states[t] = int(rng.choice(num_states, p=weights / weights.sum()))
        logger.debug("Resampled %d latent states of sequence %s", length, seq)
        return states


class MakeHMMOutputPSP(RandomPSP):
    """Random maker: the matrices are its random choice, scored by their Dirichlet priors."""

    name = "make_hmm"
    min_args = 4
    max_args = 5

    def _params(self, args: Args) -> tuple[int, float, int, float]:
        num_states = as_int(args[0])
        transition_alpha = as_number(args[1])
        num_symbols = as_int(args[2])
        emission_alpha = as_number(args[3])
        if num_states < 1 or num_symbols < 1:
            raise VMTypeError("make_hmm needs at least one state and one symbol")
        if transition_alpha <= 0 or emission_alpha <= 0:
            raise VMTypeError("make_hmm concentrations must be positive")
        return num_states, transition_alpha, num_symbols, emission_alpha

    def simulate(self, args: Args) -> SPRecord:
        self.check_arity(args)
        num_states, transition_alpha, num_symbols, emission_alpha = self._params(args)
        rng = args.rng
        initial = np.full(num_states, 1.0 / num_states)
        transition = _sample_stochastic_matrix(rng, transition_alpha, num_states, num_states)
        emission = _sample_stochastic_matrix(rng, emission_alpha, num_states, num_symbols)
        clonable = as_bool(args[4]) if len(args) > 4 else True
        return SPRecord.fresh(HMMSP(HMMOutputPSP(initial, transition, emission), clonable))

    def log_density(self, value: Any, args: Args) -> float:
        num_states, transition_alpha, num_symbols, emission_alpha = self._params(args)
        hmm: HMMOutputPSP = value.sp.output_psp
        total = sum(dirichlet.logpdf(row, np.full(num_states, transition_alpha)) for row in hmm.transition)
        total += sum(dirichlet.logpdf(row, np.full(num_symbols, emission_alpha)) for row in hmm.emission)
        return float(total)

    def children_can_aaa(self) -> bool:
        return True
