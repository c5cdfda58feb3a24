"""Tests for collapsed procedures and their block scoring through makers."""

import copy
import math
from types import SimpleNamespace

import numpy as np
import pytest

from petvm import Engine, EngineConfig
from petvm.exceptions import InstructionFailed, StatisticsUnderflow
from petvm.inference.expressions import ALL, DEFAULT_SCOPE, BlockSpec
from petvm.regen import detach_scaffold, regen_scaffold
from petvm.spi.collapsed import (
    BetaBernoulliAux,
    BetaBernoulliOutputPSP,
    CRPAux,
    CRPOutputPSP,
    SymDirDiscreteAux,
    SymDirDiscreteOutputPSP,
)
from petvm.values import Atom, Boolean, Number

from ._engine_fixtures import run_values

COIN = "[ASSUME alpha (gamma 1.0 1.0)] [ASSUME coin (make_beta_bernoulli alpha alpha)]"


def observe_flips(engine: Engine, flips: list[bool]) -> None:
    engine.execute_text(COIN)
    engine.execute_text(" ".join(f"[OBSERVE (coin) {flip}]" for flip in flips))


class TestCountDensities:
    def test_beta_bernoulli_matches_sequential_prediction(self):
        psp = BetaBernoulliOutputPSP(1.0, 1.0)
        # 1/2 * 2/3 * 1/4 for heads, heads, tails
        assert psp.log_density_of_counts(BetaBernoulliAux(heads=2, tails=1)) == pytest.approx(math.log(1 / 12))

    def test_crp_matches_sequential_seating(self):
        psp = CRPOutputPSP(1.0)
        aux = CRPAux(counts={1: 2, 2: 1}, total=3, next_index=3)
        assert psp.log_density_of_counts(aux) == pytest.approx(-math.log(6))

    def test_sym_dir_discrete_matches_sequential_prediction(self):
        psp = SymDirDiscreteOutputPSP(1.0, 3)
        assert psp.log_density_of_counts(SymDirDiscreteAux([2, 0, 1])) == pytest.approx(math.log(1 / 30))

    def test_empty_counts_have_density_one(self):
        assert BetaBernoulliOutputPSP(2.0, 3.0).log_density_of_counts(BetaBernoulliAux()) == pytest.approx(0.0)
        assert CRPOutputPSP(0.5).log_density_of_counts(CRPAux()) == pytest.approx(0.0)


def _collapsed_cases():
    return [
        (BetaBernoulliOutputPSP(0.7, 1.3), BetaBernoulliAux, lambda rng: Boolean(bool(rng.random() < 0.6))),
        (CRPOutputPSP(1.5), CRPAux, lambda rng: Atom(int(rng.integers(1, 5)))),
        (SymDirDiscreteOutputPSP(0.5, 4), lambda: SymDirDiscreteAux([0] * 4), lambda rng: Number(int(rng.integers(4)))),
    ]


def _sequential_log_density(psp, aux, values) -> float:
    args = SimpleNamespace(aux=aux)
    total = 0.0
    for value in values:
        total += psp.log_density(value, args)
        psp.incorporate(value, args)
    return total


def _statistics(aux):
    if isinstance(aux, CRPAux):
        # table numbering only grows, so compare occupancy
        return aux.counts, aux.total
    return aux


class TestExchangeability:
    @pytest.mark.parametrize("case", range(3), ids=["beta_bernoulli", "crp", "sym_dir_discrete"])
    def test_sequence_density_ignores_order(self, rng: np.random.Generator, case: int):
        psp, make_aux, draw = _collapsed_cases()[case]
        for _ in range(1000):
            values = [draw(rng) for _ in range(int(rng.integers(1, 12)))]
            shuffled = [values[i] for i in rng.permutation(len(values))]
            aux = make_aux()
            forward = _sequential_log_density(psp, aux, values)
            assert _sequential_log_density(psp, make_aux(), shuffled) == pytest.approx(forward, abs=1e-9)
            assert psp.log_density_of_counts(aux) == pytest.approx(forward, abs=1e-9)

    @pytest.mark.parametrize("case", range(3), ids=["beta_bernoulli", "crp", "sym_dir_discrete"])
    def test_unincorporate_undoes_incorporate(self, rng: np.random.Generator, case: int):
        psp, make_aux, draw = _collapsed_cases()[case]
        for _ in range(1000):
            values = [draw(rng) for _ in range(int(rng.integers(1, 12)))]
            keep = int(rng.integers(len(values) + 1))
            aux = make_aux()
            args = SimpleNamespace(aux=aux)
            for value in values:
                psp.incorporate(value, args)
            expected = make_aux()
            for value in values[:keep]:
                psp.incorporate(value, SimpleNamespace(aux=expected))
            snapshot = copy.deepcopy(aux)
            removed = [values[i] for i in keep + rng.permutation(len(values) - keep)]
            for value in removed:
                psp.unincorporate(value, args)
            assert _statistics(aux) == _statistics(expected)
            for value in removed:
                psp.incorporate(value, args)
            assert _statistics(aux) == _statistics(snapshot)


class TestStatistics:
    def test_observations_are_incorporated(self, engine: Engine):
        observe_flips(engine, [True, True, False])
        aux = engine.trace.made_sp_aux_at(engine.trace.families[2])
        assert (aux.heads, aux.tails) == (2, 1)

    def test_forgetting_an_observation_unincorporates_it(self, engine: Engine):
        observe_flips(engine, [True, False])
        engine.forget(3)
        aux = engine.trace.made_sp_aux_at(engine.trace.families[2])
        assert (aux.heads, aux.tails) == (0, 1)

    def test_predictive_uses_the_counts(self, engine: Engine):
        engine.execute_text("[ASSUME coin (make_beta_bernoulli 1.0 1.0)]")
        engine.execute_text(" ".join("[OBSERVE (coin) True]" for _ in range(4)))
        engine.execute_text("[PREDICT (coin)]")
        app = engine.trace.get_constrainable_node(engine.trace.families[6])
        args = engine.trace.args_at(app)
        psp = engine.trace.psp_at(app)
        # (1 + 4) / (2 + 4), with the prediction itself unincorporated
        psp.unincorporate(engine.trace.value_at(app), args)
        assert math.exp(psp.log_density(Boolean(True), args)) == pytest.approx(5 / 6)

    def test_underflow_raises(self):
        psp = BetaBernoulliOutputPSP(1.0, 1.0)
        with pytest.raises(StatisticsUnderflow, match="no heads"):
            psp.unincorporate(Boolean(True), SimpleNamespace(aux=BetaBernoulliAux()))

    def test_crp_underflow_raises(self):
        with pytest.raises(StatisticsUnderflow, match="already empty"):
            CRPOutputPSP(1.0).unincorporate(Atom(4), SimpleNamespace(aux=CRPAux()))

    def test_sym_dir_rejects_out_of_range_categories(self, engine: Engine):
        engine.execute_text("[ASSUME d (make_sym_dir_discrete 1.0 3)]")
        with pytest.raises(InstructionFailed, match="outside 0..2"):
            engine.execute_text("[OBSERVE (d) 5]")

    def test_makers_validate_their_parameters(self, engine: Engine):
        with pytest.raises(InstructionFailed, match="must be positive"):
            engine.execute_text("[ASSUME coin (make_beta_bernoulli 0 1)]")


class TestCRP:
    def test_first_customer_opens_table_one(self, engine: Engine):
        values = run_values(engine, "[ASSUME crp (make_crp 1.0)] [ASSUME a (crp)]")
        assert values[1] == Atom(1)

    def test_enumeration_offers_a_fresh_table(self, engine: Engine):
        engine.execute_text("[ASSUME crp (make_crp 1.0)] [ASSUME a (crp)] [PREDICT (crp)]")
        app = engine.trace.get_constrainable_node(engine.trace.families[3])
        psp = engine.trace.psp_at(app)
        args = engine.trace.args_at(app)
        current = engine.trace.value_at(app)
        psp.unincorporate(current, args)
        # a lone customer's table is offered back as the fresh one
        assert psp.enumerate_values(args, current) == [Atom(1), Atom(2)]

    def test_rejects_non_atoms(self, engine: Engine):
        engine.execute_text("[ASSUME crp (make_crp 1.0)]")
        with pytest.raises(InstructionFailed, match="crp values are atoms"):
            engine.execute_text("[OBSERVE (crp) 1]")


class TestAbsorbingAtApplications:
    def _scaffold(self, engine: Engine):
        return engine.scaffold(DEFAULT_SCOPE, BlockSpec(ALL))

    def test_maker_is_scored_as_a_block(self, engine: Engine):
        observe_flips(engine, [True, False, True])
        scaffold = self._scaffold(engine)
        maker = engine.trace.families[2]
        assert scaffold.aaa == {maker}
        assert not scaffold.absorbing

    def test_scaffold_does_not_grow_with_observations(self):
        sizes = []
        for n in (2, 8):
            engine = Engine(seed=3, config=EngineConfig())
            observe_flips(engine, [True] * n)
            scaffold = self._scaffold(engine)
            sizes.append((len(scaffold.drg), len(scaffold.absorbing)))
        assert sizes[0] == sizes[1]

    def test_without_aaa_the_applications_are_resampled(self):
        sizes = []
        for n in (2, 8):
            engine = Engine(seed=3, config=EngineConfig(aaa_enabled=False))
            observe_flips(engine, [True] * n)
            scaffold = self._scaffold(engine)
            assert not scaffold.aaa
            sizes.append(len(scaffold.drg))
        assert sizes[1] > sizes[0]

    @pytest.mark.parametrize("aaa_enabled", [True, False])
    def test_regeneration_cost(self, aaa_enabled: bool):
        visits = []
        for n in (2, 8):
            engine = Engine(seed=3, config=EngineConfig(aaa_enabled=aaa_enabled))
            observe_flips(engine, [True] * n)
            scaffold = self._scaffold(engine)
            before = engine.trace.stats.visits
            _, db = detach_scaffold(engine.trace, scaffold)
            regen_scaffold(engine.trace, scaffold, True, db)
            visits.append(engine.trace.stats.visits - before)
        if aaa_enabled:
            assert visits[0] == visits[1]
        else:
            assert visits[1] > visits[0]

    def test_restore_keeps_counts_and_values(self, engine: Engine):
        observe_flips(engine, [True, False, True])
        alpha_before = engine.report(1)
        scaffold = self._scaffold(engine)
        _, db = detach_scaffold(engine.trace, scaffold)
        regen_scaffold(engine.trace, scaffold, True, db)
        aux = engine.trace.made_sp_aux_at(engine.trace.families[2])
        assert (aux.heads, aux.tails) == (2, 1)
        assert engine.report(1) == alpha_before

    def test_mh_on_the_hyperparameter_keeps_the_counts(self, engine: Engine):
        observe_flips(engine, [True, True, False, True])
        engine.execute_text("[INFER (mh default one 25)]")
        aux = engine.trace.made_sp_aux_at(engine.trace.families[2])
        assert (aux.heads, aux.tails) == (3, 1)
        assert engine.stats()["transitions"] == 25
