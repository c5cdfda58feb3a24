"""Tests for particle Gibbs on the trace and on copy-on-write particles."""

import numpy as np
import pytest

from petvm import Engine, EngineConfig
from petvm.exceptions import InstructionFailed, NonClonableAux
from petvm.inference.expressions import ORDERED, BlockSpec
from petvm.inference.pgibbs import func_pgibbs_transition, pgibbs_transition
from petvm.values import Symbol

from ._engine_fixtures import plain, sample_predictions

# Two-step chain with one noisy reading per step; exact marginals by enumeration:
# P(s0) = 0.8634, P(s1) = 0.8975.
CHAIN = (
    "[ASSUME s0 (scope_include 'state 0 (flip 0.5))]"
    " [ASSUME s1 (scope_include 'state 1 (flip (if s0 0.8 0.2)))]"
    " [OBSERVE (normal (if s0 1 -1) 1) 0.5]"
    " [OBSERVE (normal (if s1 1 -1) 1) 0.8]"
)

STATE = Symbol("state")


class TestStructure:
    @pytest.mark.parametrize("transition", [pgibbs_transition, func_pgibbs_transition])
    def test_trace_stays_well_formed(self, engine: Engine, transition):
        engine.execute_text(CHAIN)
        for _ in range(10):
            accepted = transition(engine.trace, STATE, BlockSpec(ORDERED), 3)
            assert isinstance(accepted, bool)
        stats = engine.stats()
        assert stats["randomChoices"] == 2
        assert stats["transitions"] == 10
        assert engine.trace_summary()["scopes"] == {"state": {"0": 1, "1": 1}}

    @pytest.mark.parametrize("keyword", ["pgibbs", "func_pgibbs"])
    def test_observations_survive(self, engine: Engine, keyword: str):
        engine.execute_text(CHAIN + f" [INFER ({keyword} state ordered 4 5)]")
        assert plain(engine.trace.value_at(engine.trace.families[3])) == 0.5
        assert plain(engine.trace.value_at(engine.trace.families[4])) == 0.8

    def test_empty_scope_is_a_no_op(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)] [INFER (pgibbs nothing ordered 3 2)]")
        assert engine.stats()["transitions"] == 2

    def test_latents_scope_is_refused(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)]")
        with pytest.raises(InstructionFailed, match="pgibbs cannot target the latents scope"):
            engine.execute_text("[INFER (pgibbs latents ordered 3 1)]")

    def test_unordered_blocks_form_one_stage(self, engine: Engine):
        engine.execute_text(CHAIN + " [INFER (pgibbs state all 3 4)]")
        assert engine.stats()["transitions"] == 4


class TestNonClonableStores:
    def test_func_pgibbs_refuses_and_restores(self, engine: Engine):
        engine.execute_text(
            "[ASSUME h (make_hmm 2 1 3 1 False)]"
            " [ASSUME t (scope_include 'step 0 (uniform_discrete 0 3))]"
            " [PREDICT (h 0 t)]"
        )
        before = plain(engine.report(2))
        with pytest.raises(InstructionFailed, match="NonClonableAux") as excinfo:
            engine.execute_text("[INFER (func_pgibbs step ordered 3 1)]")
        assert isinstance(excinfo.value.cause, NonClonableAux)
        assert plain(engine.report(2)) == before
        assert engine.stats()["randomChoices"] == 3

    def test_pgibbs_on_the_trace_accepts_them(self, engine: Engine):
        engine.execute_text(
            "[ASSUME h (make_hmm 2 1 3 1 False)]"
            " [ASSUME t (scope_include 'step 0 (uniform_discrete 0 3))]"
            " [PREDICT (h 0 t)]"
            " [INFER (pgibbs step ordered 3 3)]"
        )
        assert engine.stats()["transitions"] == 3


class TestTwoParticles:
    def test_two_particles_retrace_single_site_mh(self):
        # one fresh particle against the retained one is a resimulation MH step
        chains = {}
        for keyword, program in [("mh", "(mh state one 1)"), ("pgibbs", "(pgibbs state one 2 1)")]:
            engine = Engine(seed=77, config=EngineConfig())
            engine.execute_text(CHAIN)
            path = []
            for _ in range(40):
                engine.execute_text(f"[INFER {program}]")
                path.append((plain(engine.report(1)), plain(engine.report(2))))
            chains[keyword] = (path, engine.stats()["accepted"])
        assert chains["pgibbs"] == chains["mh"]


@pytest.mark.slow
class TestExactness:
    @pytest.mark.parametrize("keyword", ["pgibbs", "func_pgibbs"])
    def test_chain_marginals(self, keyword: str):
        engine = Engine(seed=7, config=EngineConfig())
        draws = sample_predictions(engine, CHAIN, f"[INFER ({keyword} state ordered 4 1)]", "(list s0 s1)", 1500)
        s0 = np.mean([d[0] for d in draws])
        s1 = np.mean([d[1] for d in draws])
        assert s0 == pytest.approx(0.8634, abs=0.04)
        assert s1 == pytest.approx(0.8975, abs=0.04)

    def test_boltzmann_rule(self):
        engine = Engine(seed=8, config=EngineConfig(boosted_particle_acceptance=False))
        draws = sample_predictions(engine, CHAIN, "[INFER (pgibbs state ordered 3 1)]", "s1", 1500)
        assert np.mean(draws) == pytest.approx(0.8975, abs=0.04)
