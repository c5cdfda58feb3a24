"""Tests for family evaluation, compound procedures and requests."""

import pytest

from petvm import Engine
from petvm.exceptions import InstructionFailed
from petvm.export import reachable_nodes
from petvm.values import Boolean, Number, Symbol

from ._engine_fixtures import plain, run_values


class TestCompoundProcedures:
    def test_lambda_application(self, engine: Engine):
        assert run_values(engine, "[PREDICT ((lambda (x y) (+ x y)) 2 3)]") == [Number(5)]

    def test_let(self, engine: Engine):
        assert run_values(engine, "[PREDICT (let ((a 2) (b 4)) (* a b))]") == [Number(8)]

    def test_closures_capture_their_environment(self, engine: Engine):
        text = "[ASSUME adder (lambda (n) (lambda (x) (+ x n)))] [ASSUME add3 (adder 3)] [PREDICT (add3 4)]"
        assert run_values(engine, text)[-1] == Number(7)

    def test_recursion(self, engine: Engine):
        text = "[ASSUME fact (lambda (n) (if (<= n 1) 1 (* n (fact (- n 1)))))] [PREDICT (fact 5)]"
        assert run_values(engine, text)[-1] == Number(120)

    def test_wrong_argument_count(self, engine: Engine):
        engine.execute_text("[ASSUME f (lambda (x y) x)]")
        with pytest.raises(InstructionFailed, match=r"Procedure of \(x y\) applied to 1 arguments"):
            engine.execute_text("[PREDICT (f 1)]")


class TestBranches:
    def test_only_the_taken_branch_is_evaluated(self, engine: Engine):
        assert run_values(engine, "[PREDICT (if True 1 (normal 0 1))]") == [Number(1)]
        assert engine.stats()["randomChoices"] == 0

    def test_and_or_short_circuit(self, engine: Engine):
        values = run_values(engine, "[PREDICT (and True False)] [PREDICT (or False True)] [PREDICT (and)]")
        assert values == [Boolean(False), Boolean(True), Boolean(True)]

    def test_branch_follows_a_random_predicate(self, engine: Engine):
        engine.execute_text("[ASSUME c (flip 0.5)] [ASSUME y (if c 1 2)]")
        c, y = plain(engine.report(1)), plain(engine.report(2))
        assert y == (1.0 if c else 2.0)

    def test_mh_keeps_branches_consistent(self, engine: Engine):
        engine.execute_text("[ASSUME c (flip 0.5)] [ASSUME y (if c (normal 10 1) (normal -10 1))]")
        for _ in range(20):
            engine.execute_text("[INFER (mh default one 1)]")
            c, y = plain(engine.report(1)), plain(engine.report(2))
            assert (y > 0) == c
            assert engine.stats()["randomChoices"] == 2


class TestMem:
    def test_same_arguments_share_one_family(self, engine: Engine):
        engine.execute_text("[ASSUME f (mem (lambda (x) (normal x 1)))]")
        assert run_values(engine, "[PREDICT (= (f 1) (f 1))]") == [Boolean(True)]
        assert engine.stats()["randomChoices"] == 1

    def test_distinct_arguments_get_distinct_choices(self, engine: Engine):
        engine.execute_text("[ASSUME f (mem (lambda (x) (normal x 1)))] [PREDICT (f 1)] [PREDICT (f 2)]")
        assert engine.stats()["randomChoices"] == 2

    def test_forgetting_the_last_use_drops_the_family(self, engine: Engine):
        engine.execute_text("[ASSUME f (mem (lambda (x) (normal x 1)))] [PREDICT (f 1)] [PREDICT (f 1)]")
        engine.forget(2)
        assert engine.stats()["randomChoices"] == 1
        engine.forget(3)
        assert engine.stats()["randomChoices"] == 0

    def test_requires_a_procedure(self, engine: Engine):
        with pytest.raises(InstructionFailed, match="mem expects a procedure"):
            engine.execute_text("[ASSUME f (mem 3)]")


class TestRequests:
    def test_eval_in_an_empty_environment(self, engine: Engine):
        assert run_values(engine, "[PREDICT (eval (list plus 1 2) (get_empty_environment))]") == [Number(3)]

    def test_eval_requires_an_environment(self, engine: Engine):
        with pytest.raises(InstructionFailed, match="eval expects an environment"):
            engine.execute_text("[PREDICT (eval 1 2)]")

    def test_apply(self, engine: Engine):
        assert run_values(engine, "[PREDICT (apply + (list 1 2))]") == [Number(3)]

    def test_apply_rejects_non_procedures(self, engine: Engine):
        with pytest.raises(InstructionFailed, match="Cannot apply non-procedure"):
            engine.execute_text("[PREDICT (apply 4 (list 1 2))]")

    def test_map_list(self, engine: Engine):
        value = run_values(engine, "[PREDICT (map_list (lambda (x) (* x x)) (list 1 2 3))]")[0]
        assert plain(value) == [1.0, 4.0, 9.0]

    def test_quoted_symbols(self, engine: Engine):
        assert run_values(engine, "[PREDICT 'sym]") == [Symbol("sym")]


class TestScopes:
    def test_scope_include_tags_random_choices(self, engine: Engine):
        engine.execute_text("[ASSUME x (scope_include 'hypers 0 (normal 0 1))]")
        assert engine.trace_summary()["scopes"] == {"hypers": {"0": 1}}

    def test_nested_tags_accumulate(self, engine: Engine):
        engine.execute_text("[ASSUME x (scope_include 'outer 1 (scope_include 'inner 2 (normal 0 1)))]")
        assert engine.trace_summary()["scopes"] == {"inner": {"2": 1}, "outer": {"1": 1}}

    def test_tags_inside_a_procedure_body(self, engine: Engine):
        values = run_values(
            engine, "[ASSUME f (lambda (t) (scope_include 'state t (bernoulli 0.3)))] [PREDICT (f 1)] [PREDICT (f 2)]"
        )
        assert isinstance(values[1], Boolean)
        assert isinstance(values[2], Boolean)
        assert engine.trace_summary()["scopes"] == {"state": {"1": 1, "2": 1}}

    def test_tags_inside_a_branch(self, engine: Engine):
        values = run_values(engine, "[PREDICT (if True (scope_include 'arm 0 (normal 0 1)) 0)]")
        assert isinstance(values[0], Number)
        assert engine.trace_summary()["scopes"] == {"arm": {"0": 1}}

    def test_nested_tags_inside_a_procedure_body(self, engine: Engine):
        engine.execute_text(
            "[ASSUME g (lambda () (scope_include 'outer 1 (scope_include 'inner 2 (flip))))] [PREDICT (g)]"
        )
        assert isinstance(engine.report(2), Boolean)
        assert engine.trace_summary()["scopes"] == {"inner": {"2": 1}, "outer": {"1": 1}}

    def test_block_must_be_deterministic(self, engine: Engine):
        with pytest.raises(InstructionFailed, match="computed deterministically"):
            engine.execute_text("[ASSUME x (scope_include 'hypers (uniform_discrete 0 3) (normal 0 1))]")

    def test_scope_must_be_a_symbol_or_integer(self, engine: Engine):
        with pytest.raises(InstructionFailed, match="Scope must be a symbol or an integer"):
            engine.execute_text("[ASSUME x (scope_include 0.5 0 (normal 0 1))]")

    def test_forgetting_untags(self, engine: Engine):
        engine.execute_text("[PREDICT (scope_include 'hypers 0 (normal 0 1))]")
        engine.forget(1)
        assert engine.trace_summary()["scopes"] == {}


class TestUneval:
    def test_sample_leaves_the_trace_unchanged(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)]")
        before = [n.node_id for n in reachable_nodes(engine.trace)]
        engine.execute_text("[SAMPLE (+ x (normal 0 1))]")
        assert [n.node_id for n in reachable_nodes(engine.trace)] == before
        assert engine.stats()["randomChoices"] == 1

    def test_failed_evaluation_reports_the_cause(self, engine: Engine):
        with pytest.raises(InstructionFailed, match="Division by zero"):
            engine.execute_text("[PREDICT (/ 1 0)]")
