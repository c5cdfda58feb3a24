"""Tests for the bundled example programs."""

import pytest

from petvm import Engine
from petvm.programs import list_programs, load_program
from petvm.values import Boolean, Number

from ._engine_fixtures import plain

LIGHT = ["collapsed_coin", "make_hmm", "sprinkler", "trick_coin"]
HEAVY = ["dp_mixture", "hmm", "inverse_interpretation"]


def _predictions(name: str, seed: int = 5) -> list:
    engine = Engine(seed=seed)
    return [r.value for r in engine.execute_text(load_program(name)) if r.instruction == "PREDICT"]


def test_list_programs():
    assert list_programs() == sorted(LIGHT + HEAVY)


def test_load_program_reads_source():
    source = load_program("trick_coin")
    assert source.startswith(";")
    assert "[ASSUME is_tricky (bernoulli 0.1)]" in source


def test_load_program_unknown_name():
    with pytest.raises(KeyError, match="No bundled program named 'nope'"):
        load_program("nope")


def test_trick_coin():
    is_tricky, flip = _predictions("trick_coin")
    assert isinstance(is_tricky, Boolean)
    assert isinstance(flip, Boolean)


def test_sprinkler():
    rain, sprinkler = _predictions("sprinkler")
    # wet grass without rain or sprinkler is all but impossible
    assert plain(rain) or plain(sprinkler)


def test_collapsed_coin():
    alpha, flip = _predictions("collapsed_coin")
    assert plain(alpha) > 0
    assert isinstance(flip, Boolean)


def test_make_hmm():
    next_symbol, other_sequence = _predictions("make_hmm")
    assert plain(next_symbol) in range(5)
    assert plain(other_sequence) in range(5)


@pytest.mark.slow
def test_hmm():
    state, noise = _predictions("hmm")
    assert isinstance(state, Boolean)
    assert plain(noise) > 0


@pytest.mark.slow
def test_dp_mixture():
    same, different = _predictions("dp_mixture")
    assert isinstance(same, Boolean)
    assert isinstance(different, Boolean)


@pytest.mark.slow
def test_inverse_interpretation():
    (value,) = _predictions("inverse_interpretation")
    assert isinstance(value, Number)


@pytest.mark.slow
@pytest.mark.parametrize("name", LIGHT + HEAVY)
def test_programs_replay_under_a_seed(name: str):
    assert [plain(v) for v in _predictions(name, 9)] == [plain(v) for v in _predictions(name, 9)]
