"""Tests for Metropolis-Hastings and its drift variant."""

import math
from unittest.mock import MagicMock

import numpy as np
import pytest
from scipy.stats import norm

from petvm import Engine, EngineConfig
from petvm.exceptions import BlockMembershipChanged, InstructionFailed
from petvm.inference.expressions import DEFAULT_SCOPE, ONE, BlockSpec
from petvm.inference.mh import mh_transition
from petvm.inference.sampling import accept

from ._engine_fixtures import plain, sample_predictions

# x ~ N(0, 1), 2.0 ~ N(x, 1) gives x | data ~ N(1, 1/2)
CONJUGATE = "[ASSUME x (normal 0 1)] [OBSERVE (normal x 1) 2.0]"


class TestBookkeeping:
    def test_counts_transitions(self, engine: Engine):
        engine.execute_text(CONJUGATE + " [INFER (mh default one 30)]")
        stats = engine.stats()
        assert stats["transitions"] == 30
        assert 0 < stats["accepted"] <= 30

    def test_returns_acceptance(self, engine: Engine):
        engine.execute_text("[ASSUME b (flip 0.5)]")
        accepted = [mh_transition(engine.trace, DEFAULT_SCOPE, BlockSpec(ONE)) for _ in range(10)]
        assert all(isinstance(a, bool) for a in accepted)
        assert sum(accepted) == engine.stats()["accepted"]

    def test_prior_only_proposals_are_always_accepted(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)] [INFER (mh default one 10)]")
        assert engine.stats()["accepted"] == 10

    def test_observations_stay_fixed(self, engine: Engine):
        engine.execute_text(CONJUGATE + " [INFER (mh default one 20)]")
        observed = engine.trace.families[2]
        assert plain(engine.trace.value_at(observed)) == 2.0
        assert engine.stats()["randomChoices"] == 1

    def test_same_seed_same_chain(self):
        values = []
        for _ in range(2):
            engine = Engine(seed=99, config=EngineConfig())
            engine.execute_text(CONJUGATE + " [INFER (mh default one 25)]")
            values.append(plain(engine.report(1)))
        assert values[0] == values[1]

    def test_drift_mh_steps_from_the_current_value(self):
        engine = Engine(seed=5, config=EngineConfig(drift_sigma=1e-3))
        engine.execute_text(CONJUGATE)
        before = plain(engine.report(1))
        engine.execute_text("[INFER (drift_mh default one 5)]")
        assert engine.stats()["transitions"] == 5
        assert plain(engine.report(1)) == pytest.approx(before, abs=0.05)

    def test_block_membership_change_is_refused(self, engine: Engine):
        engine.execute_text(
            "[ASSUME n (scope_include 's 0 (flip 0.5))]"
            " [ASSUME y (if n (scope_include 's 0 (normal 0 1)) 1)]"
        )
        with pytest.raises(InstructionFailed, match="BlockMembershipChanged") as excinfo:
            engine.execute_text("[INFER (mh s 0 200)]")
        assert isinstance(excinfo.value.cause, BlockMembershipChanged)
        n, y = plain(engine.report(1)), plain(engine.report(2))
        assert (y == 1.0) != n


class TestScopes:
    def test_literal_block_only_moves_that_block(self, engine: Engine):
        engine.execute_text(
            "[ASSUME a (scope_include 'hypers 0 (normal 0 1))] [ASSUME b (scope_include 'hypers 1 (normal 0 1))]"
        )
        b = plain(engine.report(2))
        engine.execute_text("[INFER (mh hypers 0 20)]")
        assert plain(engine.report(2)) == b

    def test_all_blocks_move_together(self, engine: Engine):
        engine.execute_text(
            "[ASSUME a (scope_include 'hypers 0 (normal 0 1))] [ASSUME b (scope_include 'hypers 1 (normal 0 1))]"
        )
        a, b = plain(engine.report(1)), plain(engine.report(2))
        engine.execute_text("[INFER (mh hypers all 1)]")
        assert plain(engine.report(1)) != a
        assert plain(engine.report(2)) != b


def _zero_uniform() -> MagicMock:
    return MagicMock(random=MagicMock(return_value=0.0))


class TestAcceptance:
    def test_impossible_proposal_is_rejected_on_a_zero_draw(self):
        assert not accept(_zero_uniform(), -math.inf)

    def test_zero_draw_accepts_any_possible_proposal(self):
        assert accept(_zero_uniform(), -1e300)

    def test_nan_is_rejected(self, rng):
        assert not accept(rng, math.nan)


@pytest.mark.slow
class TestConvergence:
    def test_mh_posterior_mean(self, engine: Engine):
        draws = sample_predictions(engine, CONJUGATE, "[INFER (mh default one 5)]", "x", 2000)
        assert np.mean(draws[200:]) == pytest.approx(1.0, abs=0.12)
        assert np.var(draws[200:]) == pytest.approx(0.5, abs=0.12)

    def test_drift_mh_posterior_mean(self, engine: Engine):
        draws = sample_predictions(engine, CONJUGATE, "[INFER (drift_mh default one 10)]", "x", 2000)
        assert np.mean(draws[200:]) == pytest.approx(1.0, abs=0.15)

    def test_detailed_balance_on_a_discrete_choice(self, engine: Engine):
        engine.execute_text("[ASSUME k (uniform_discrete 0 3)] [OBSERVE (normal k 1) 1.7]")
        likelihood = norm.pdf(1.7, np.arange(3), 1)
        posterior = likelihood / likelihood.sum()
        # resimulation from the uniform prior, accepted with the likelihood ratio
        expected = np.array([[min(1.0, likelihood[j] / likelihood[i]) / 3 for j in range(3)] for i in range(3)])
        for i in range(3):
            expected[i, i] = 1 - expected[i].sum() + expected[i, i]

        pairs = np.zeros((3, 3))
        state = int(plain(engine.report(1)))
        for _ in range(30000):
            mh_transition(engine.trace, DEFAULT_SCOPE, BlockSpec(ONE))
            new = int(plain(engine.report(1)))
            pairs[state, new] += 1
            state = new

        empirical = pairs / pairs.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(empirical, expected, atol=0.02)
        flows = pairs / pairs.sum()
        np.testing.assert_allclose(flows, flows.T, atol=0.01)
        np.testing.assert_allclose(pairs.sum(axis=1) / pairs.sum(), posterior, atol=0.02)


TRICK_COIN = (
    "[ASSUME is_tricky (bernoulli 0.1)]"
    " [ASSUME weight (if is_tricky (uniform_continuous 0.0 1.0) 0.5)]"
    " [OBSERVE (bernoulli weight) True] [OBSERVE (bernoulli weight) True]"
)


@pytest.mark.slow
class TestSelectionCorrection:
    def _tricky_rate(self, selection_correction: bool) -> float:
        engine = Engine(seed=20240601, config=EngineConfig(selection_correction=selection_correction))
        draws = sample_predictions(engine, TRICK_COIN, "[INFER (mh default one 10)]", "is_tricky", 3000)
        return float(np.mean(draws[300:]))

    def test_trick_coin_matches_the_exact_posterior(self):
        # 0.1 * 1/3 / (0.1 * 1/3 + 0.9 * 1/4)
        assert self._tricky_rate(True) == pytest.approx(0.129, abs=0.04)

    def test_dropping_the_correction_biases_the_chain(self):
        assert self._tricky_rate(False) > 0.18
