"""Tests for environment frames."""

import numpy as np
import pytest

from petvm.env import Environment
from petvm.exceptions import UnboundSymbol
from petvm.node import ConstantNode

SYMBOLS = [f"v{i}" for i in range(12)]


class TestLookup:
    def test_inner_frames_shadow_outer_bindings(self):
        outer = Environment(bindings={"x": ConstantNode(1)})
        inner = outer.extend(["x"], [ConstantNode(2)])
        assert inner.find_symbol("x").node_id == 2
        assert outer.find_symbol("x").node_id == 1

    def test_lookup_falls_through_to_enclosing_frames(self):
        outer = Environment(bindings={"x": ConstantNode(1)})
        inner = outer.extend(["y"], [ConstantNode(2)]).extend(["z"], [ConstantNode(3)])
        assert inner.find_symbol("x").node_id == 1

    def test_unbound_symbol(self):
        with pytest.raises(UnboundSymbol):
            Environment().find_symbol("missing")

    def test_removed_binding_is_unbound(self):
        env = Environment(bindings={"x": ConstantNode(1)})
        env.remove_binding("x")
        with pytest.raises(UnboundSymbol):
            env.find_symbol("x")

    def test_extension_wins_for_random_symbol_sets(self, rng: np.random.Generator):
        next_id = 0
        for _ in range(200):
            env = Environment()
            expected: dict[str, int] = {}
            for _ in range(int(rng.integers(1, 6))):
                names = [str(s) for s in rng.choice(SYMBOLS, size=int(rng.integers(1, 5)), replace=False)]
                nodes = []
                for name in names:
                    next_id += 1
                    nodes.append(ConstantNode(next_id))
                    expected[name] = next_id
                env = env.extend(names, nodes)
            for name, node_id in expected.items():
                assert env.find_symbol(name).node_id == node_id
