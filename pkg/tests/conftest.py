import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from intentamp.backends import ScriptedBackend, ScriptedScenario
from intentamp.fixtures import build_flip_scenario
from intentamp.masking import PromptPair
from intentamp.vocab import Vocabulary


@pytest.fixture
def flip():
    """(backend, PromptPair) for the shipped logit-flip scenario."""
    scenario, meta = build_flip_scenario()
    backend = ScriptedBackend(scenario)
    pair = PromptPair(
        meta["original_text"], meta["masked_text"], [],
        original_tokens=meta["original_tokens"],
        masked_tokens=meta["masked_tokens"],
    )
    return backend, pair


def make_random_scenario(rng: np.random.Generator, vocab_size: int, depth: int,
                         eos_logit: float = -50.0):
    """A fully-populated scripted backend: every prefix up to depth has an
    entry; end-of-sequence is effectively unreachable.

    Returns (backend, prompt_ids).
    """
    surfaces = [f"t{i}" for i in range(vocab_size)]
    vocab = Vocabulary.from_tokens(surfaces)
    size = len(vocab)
    scenario = ScriptedScenario(name="random", vocabulary=vocab)
    prompt = (int(rng.integers(2, size)),)

    def fill(prefix, remaining):
        vec = rng.normal(0.0, 2.0, size)
        vec[vocab.mask_id] = eos_logit
        vec[vocab.eos_id] = eos_logit
        scenario.add(prompt, prefix, vec)
        if remaining > 1:
            for t in range(size):
                fill(prefix + (t,), remaining - 1)

    fill((), depth)
    return ScriptedBackend(scenario), list(prompt)
