"""Tests for copy-on-write particles over a trace."""

import pytest

from petvm import Engine
from petvm.exceptions import NonClonableAux
from petvm.omegadb import OmegaDB
from petvm.particle import Particle
from petvm.regen import detach_scaffold, regen_scaffold
from petvm.scaffold import construct_scaffold
from petvm.values import Number

from ._engine_fixtures import plain


class TestOverlays:
    def test_writes_stay_in_the_particle(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)]")
        x = engine.trace.families[1]
        old = engine.trace.value_at(x)
        particle = Particle(engine.trace)
        particle.set_value_at(x, Number(42))
        assert particle.value_at(x) == Number(42)
        assert engine.trace.value_at(x) == old

    def test_nested_particles_copy_then_diverge(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)]")
        x = engine.trace.families[1]
        parent = Particle(engine.trace)
        parent.set_value_at(x, Number(1))
        child = Particle(parent)
        assert child.value_at(x) == Number(1)
        child.set_value_at(x, Number(2))
        assert parent.value_at(x) == Number(1)
        assert child.base is engine.trace

    def test_commit_writes_values_and_registries(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)]")
        x = engine.trace.families[1]
        particle = Particle(engine.trace)
        particle.set_value_at(x, Number(7))
        particle.unregister_random_choice(x)
        assert x in engine.trace.random_choices
        particle.commit()
        assert engine.trace.value_at(x) == Number(7)
        assert x not in engine.trace.random_choices

    def test_particles_cannot_detach(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)] [ASSUME y (normal x 1)]")
        x = engine.trace.families[1]
        particle = Particle(engine.trace)
        with pytest.raises(NotImplementedError, match="cannot detach"):
            particle.pop_esr_parent_at(x)
        with pytest.raises(NotImplementedError, match="cannot detach"):
            particle.remove_child_at(x, next(iter(engine.trace.children_at(x))))


class TestProcedureStores:
    def test_stores_are_cloned_on_first_access(self, engine: Engine):
        engine.execute_text("[ASSUME coin (make_beta_bernoulli 1 1)] [OBSERVE (coin) True]")
        maker = engine.trace.families[1]
        particle = Particle(engine.trace)
        aux = particle.made_sp_aux_at(maker)
        assert aux is not engine.trace.made_sp_aux_at(maker)
        aux.heads += 5
        assert engine.trace.made_sp_aux_at(maker).heads == 1
        particle.commit()
        assert engine.trace.made_sp_aux_at(maker).heads == 6

    def test_non_clonable_store(self, engine: Engine):
        engine.execute_text("[ASSUME h (make_hmm 2 1 2 1 False)]")
        with pytest.raises(NonClonableAux, match="cannot be cloned"):
            Particle(engine.trace).made_sp_aux_at(engine.trace.families[1])


class TestRegenerationIntoParticles:
    def test_regenerate_then_commit(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)] [ASSUME y (normal x 1)]")
        x = engine.trace.families[1]
        scaffold = construct_scaffold(engine.trace, [{x}])
        detach_scaffold(engine.trace, scaffold)
        particle = Particle(engine.trace)
        regen_scaffold(particle, scaffold, False, OmegaDB())
        assert engine.trace.value_at(x) is None
        proposed = particle.value_at(x)
        particle.commit()
        assert engine.trace.value_at(x) == proposed
        assert x in engine.trace.random_choices
        assert isinstance(plain(engine.report(2)), float)
