"""Tests for cycle and mixture composition."""

import pytest

from petvm import Engine, EngineConfig
from petvm.exceptions import InferenceError
from petvm.inference.compose import run_inference
from petvm.syntax import parse_inference_expr

from ._engine_fixtures import plain


class TestCycle:
    def test_runs_every_operator_every_repetition(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)] [INFER (cycle ((mh default one 2) (mh default one 3)) 4)]")
        assert engine.stats()["transitions"] == 20

    def test_nested_cycles(self, engine: Engine):
        engine.execute_text(
            "[ASSUME x (normal 0 1)] [INFER (cycle ((cycle ((mh default one 1)) 3) (rejection default all 1)) 2)]"
        )
        assert engine.stats()["transitions"] == 8

    def test_mixed_operators(self, engine: Engine):
        engine.execute_text(
            "[ASSUME a (scope_include 'hypers 0 (gamma 1 1))]"
            " [ASSUME b (scope_include 'flags 0 (flip 0.5))]"
            " [INFER (cycle ((mh hypers one 1) (gibbs flags one 1) (drift_mh default all 1)) 3)]"
        )
        stats = engine.stats()
        assert stats["transitions"] == 9
        assert stats["randomChoices"] == 2


class TestMixture:
    def test_one_operator_per_repetition(self, engine: Engine):
        engine.execute_text(
            "[ASSUME x (normal 0 1)] [INFER (mixture ((1 (mh default one 1)) (3 (mh default one 2))) 200)]"
        )
        transitions = engine.stats()["transitions"]
        # 200 repetitions of one or two transitions, the second three times as likely
        assert 200 < transitions < 400
        assert transitions == pytest.approx(350, abs=30)

    def test_seeded_mixtures_repeat(self):
        results = []
        for _ in range(2):
            engine = Engine(seed=4, config=EngineConfig())
            engine.execute_text(
                "[ASSUME x (normal 0 1)] [INFER (mixture ((1 (mh default one 1)) (1 (mh default one 5))) 10)]"
            )
            results.append((engine.stats()["transitions"], plain(engine.report(1))))
        assert results[0] == results[1]


class TestDispatch:
    def test_every_operator_is_dispatched(self, engine: Engine):
        engine.execute_text(
            "[ASSUME s0 (scope_include 'state 0 (flip 0.5))] [ASSUME s1 (scope_include 'state 1 (flip 0.5))]"
        )
        for text in (
            "(mh default one 1)",
            "(drift_mh default one 1)",
            "(rejection default all 1)",
            "(enumerative_gibbs default one 1)",
            "(pgibbs state ordered 2 1)",
            "(func_pgibbs state ordered 2 1)",
            "(meanfield default one 2 1)",
            "(mh latents one 1)",
        ):
            run_inference(engine.trace, parse_inference_expr(text))
        assert engine.stats()["transitions"] == 8

    def test_unknown_expression(self, engine: Engine):
        with pytest.raises(InferenceError, match="Unknown inference expression"):
            run_inference(engine.trace, object())
