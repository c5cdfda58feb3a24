"""Helpers shared by the engine, inference and program tests."""

from __future__ import annotations

from typing import Any

import numpy as np

from petvm import Engine
from petvm.values import Value


def run_values(engine: Engine, text: str) -> list[Value]:
    """Execute ``text`` and return the values of the value-returning instructions."""
    return [result.value for result in engine.execute_text(text) if result.has_value]


def plain(value: Value) -> Any:
    """The Python scalar behind a number or boolean value."""
    return value.to_json()


def sample_predictions(engine: Engine, setup: str, step: str, predict: str, samples: int) -> list[Any]:
    """Run ``setup`` once, then alternate ``step`` with a SAMPLE of ``predict``."""
    engine.execute_text(setup)
    draws = []
    for _ in range(samples):
        engine.execute_text(step)
        draws.append(plain(engine.execute_text(f"[SAMPLE {predict}]")[0].value))
    return draws


RANDOM_PROGRAM_BASE = (
    "[ASSUME a (normal 0 1)]"
    " [ASSUME b (scope_include 'hypers 0 (gamma 2 1))]"
    " [ASSUME c (flip 0.4)]"
)

RANDOM_PROGRAM_PARTS = (
    "[ASSUME f (mem (lambda (i) (scope_include 'state i (normal a 1))))] [PREDICT (f 1)]"
    " [OBSERVE (normal (f 2) 1) 0.4]",
    "[OBSERVE (normal (if c a b) 1) 0.7]",
    "[ASSUME coin (make_beta_bernoulli b b)] [OBSERVE (coin) True] [PREDICT (coin)]",
    "[ASSUME crp (make_crp b)] [PREDICT (crp)] [PREDICT (crp)]",
    "[ASSUME h (make_hmm 2 1 2 1)] [OBSERVE (h 0 1) 1] [PREDICT (h 0 2)]",
    "[PREDICT (let ((z (normal b 1))) (+ z a))]",
    "[ASSUME g (lambda (x) (scope_include 'tagged x (flip 0.5)))] [PREDICT (g 3)] [PREDICT (g 4)]",
    "[PREDICT (map_list (lambda (x) (normal x 1)) (list a b))]",
    "[ASSUME d (if c (normal a 1) (uniform_continuous -1 1))]",
)


def random_program(rng: np.random.Generator) -> str:
    """A model built from a random subset of fragments that each stand on the base choices."""
    parts = [part for part in RANDOM_PROGRAM_PARTS if rng.random() < 0.5]
    return " ".join([RANDOM_PROGRAM_BASE, *parts])
