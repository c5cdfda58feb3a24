"""Tests for scaffold construction."""

import pytest

from petvm import Engine
from petvm.exceptions import CannotAbsorb
from petvm.inference.expressions import ORDERED, BlockSpec
from petvm.kernels import AAAKernel, DriftKernel
from petvm.node import LookupNode, OutputNode
from petvm.scaffold import Scaffold, construct_scaffold, scaffold_to_json
from petvm.values import Symbol

CHAIN = "[ASSUME x (normal 0 1)] [ASSUME y (normal x 1)] [OBSERVE (normal y 1) 0.5]"


def root(engine: Engine, index: int):
    return engine.trace.families[index]


class TestRegions:
    def test_children_with_densities_absorb(self, engine: Engine):
        engine.execute_text(CHAIN)
        x, y = root(engine, 1), root(engine, 2)
        scaffold = construct_scaffold(engine.trace, [{x}])
        assert x in scaffold.drg
        assert y in scaffold.absorbing
        assert y not in scaffold.drg
        assert scaffold.border == [[y]]
        assert not scaffold.brush

    def test_lookups_between_principal_and_absorbing_are_resampled(self, engine: Engine):
        engine.execute_text(CHAIN)
        scaffold = construct_scaffold(engine.trace, [{root(engine, 1)}])
        lookups = [n for n in scaffold.drg if isinstance(n, LookupNode)]
        assert len(lookups) == 1
        # referenced by both the request and the output node of y
        assert scaffold.regen_counts[lookups[0]] == 2

    def test_regen_counts_count_children(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)] [ASSUME a (normal x 1)] [ASSUME b (normal x 1)]")
        x = root(engine, 1)
        scaffold = construct_scaffold(engine.trace, [{x}])
        assert scaffold.regen_counts[x] == 2
        assert scaffold.absorbing == {root(engine, 2), root(engine, 3)}

    def test_principal_leaf_is_its_own_border(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)]")
        x = root(engine, 1)
        scaffold = construct_scaffold(engine.trace, [{x}])
        assert scaffold.border == [[x]]
        # one extra reference for the border itself
        assert scaffold.regen_counts[x] == 1

    def test_deterministic_children_are_resampled(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)] [ASSUME y (+ x 1)] [ASSUME z (normal y 1)]")
        scaffold = construct_scaffold(engine.trace, [{root(engine, 1)}])
        assert root(engine, 2) in scaffold.drg
        assert root(engine, 3) in scaffold.absorbing

    def test_abandoned_branches_form_the_brush(self, engine: Engine):
        engine.execute_text("[ASSUME c (flip 1.0)] [ASSUME y (if c (normal 0 1) 5)]")
        scaffold = construct_scaffold(engine.trace, [{root(engine, 1)}])
        brush_outputs = [n for n in scaffold.brush if isinstance(n, OutputNode)]
        assert any(engine.trace.psp_at(n).name == "normal" for n in brush_outputs)
        assert not scaffold.drg & scaffold.brush

    def test_empty_scaffold(self):
        scaffold = Scaffold.empty()
        assert scaffold.is_empty()
        assert scaffold.border_nodes() == []


class TestConstraints:
    def test_constrained_choice_without_observation_cannot_be_resampled(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)]")
        x = root(engine, 1)
        engine.trace.register_constrained_choice(x)
        with pytest.raises(CannotAbsorb, match="without being re-observed"):
            construct_scaffold(engine.trace, [{x}])

    def test_observation_through_a_lookup_is_covered(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)] [OBSERVE x 0.3]")
        scaffold = construct_scaffold(engine.trace, [{root(engine, 1)}])
        assert scaffold.border == [[root(engine, 2)]]

    def test_observation_root_reconstrains_itself(self, engine: Engine):
        engine.execute_text("[ASSUME x (normal 0 1)] [OBSERVE (normal x 1) 0.3]")
        observed = root(engine, 2)
        scaffold = construct_scaffold(engine.trace, [{observed}])
        assert scaffold.border == [[observed]]


class TestKernels:
    def test_drift_kernels_on_principal_choices(self, engine: Engine):
        engine.execute_text(CHAIN)
        x = root(engine, 1)
        scaffold = construct_scaffold(engine.trace, [{x}], drift=True)
        assert isinstance(scaffold.lkernels[x], DriftKernel)

    def test_drift_kernel_is_centred_on_the_current_value(self, engine: Engine):
        engine.execute_text(CHAIN)
        x = root(engine, 1)
        kernel = construct_scaffold(engine.trace, [{x}], drift=True).lkernels[x]
        assert kernel.center == engine.trace.value_at(x)
        args = engine.trace.args_at(x)
        proposal = kernel.simulate(engine.trace, None, args)
        assert proposal.value == pytest.approx(kernel.center.value, abs=10 * kernel.sigma)

    def test_no_kernels_without_drift(self, engine: Engine):
        engine.execute_text(CHAIN)
        assert construct_scaffold(engine.trace, [{root(engine, 1)}]).lkernels == {}

    def test_aaa_makers_get_block_kernels(self, engine: Engine):
        engine.execute_text(
            "[ASSUME a (gamma 1 1)] [ASSUME coin (make_beta_bernoulli a a)] [OBSERVE (coin) True]"
        )
        scaffold = construct_scaffold(engine.trace, [{root(engine, 1)}])
        maker = root(engine, 2)
        assert isinstance(scaffold.lkernels[maker], AAAKernel)
        assert scaffold.regen_counts[maker] >= 1


class TestStages:
    def test_ordered_blocks_split_the_border(self, engine: Engine):
        engine.execute_text(
            "[ASSUME a (scope_include 's 0 (normal 0 1))] [ASSUME b (scope_include 's 1 (normal a 1))]"
        )
        scaffold = engine.scaffold(Symbol("s"), BlockSpec(ORDERED))
        assert len(scaffold.border) == 2
        assert root(engine, 2) in scaffold.border[1]

    def test_json_view(self, engine: Engine):
        engine.execute_text(CHAIN)
        x, y = root(engine, 1), root(engine, 2)
        view = scaffold_to_json(construct_scaffold(engine.trace, [{x}]))
        assert set(view) == {"drg", "absorbing", "aaa", "brush", "border", "regenCounts"}
        assert view["absorbing"] == [y.node_id]
        assert view["border"] == [[y.node_id]]
        assert view["drg"] == sorted(view["drg"])
