"""Shipped scripted scenarios: the logit-flip case study and a worked
ensemble-grouping example, materialized for inspection and exact tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .backends import ScriptedScenario
from .masking import IntentSpan, build_masked_prompt
from .vocab import Vocabulary

LOW = -8.0  # filler logit for tokens that must never win

FLIP_PROMPT_TEXT = "sum of four even numbers"

# Observed next-token scores at the critical step: with the intent visible the
# correct continuation "2" rises from 0.242 to 0.359 while the incorrect "1"
# dips from 0.419 to 0.407 — yet greedy still picks "1".
FLIP_ORIG = {"1": 0.407, "2": 0.359}
FLIP_MASKED = {"1": 0.419, "2": 0.242}


def _eos_vector(vocab: Vocabulary) -> np.ndarray:
    vec = np.full(len(vocab), LOW)
    vec[vocab.eos_id] = 10.0
    return vec


def _scored_vector(vocab: Vocabulary, scores: dict) -> np.ndarray:
    vec = np.full(len(vocab), LOW)
    for surface, score in scores.items():
        vec[vocab.id_of(surface)] = score
    return vec


def build_flip_scenario() -> tuple[ScriptedScenario, dict]:
    """The logit-flip case study as a two-step scripted backend.

    Returns the scenario plus metadata: original/masked prompt texts and
    encoded token sequences. After the critical step every continuation
    hits end-of-sequence.
    """
    vocab = Vocabulary.from_texts([FLIP_PROMPT_TEXT], extra_tokens=("1", "2"))
    pair = build_masked_prompt(
        FLIP_PROMPT_TEXT, [IntentSpan(0, len(FLIP_PROMPT_TEXT))]
    ).encode(vocab)

    scenario = ScriptedScenario(name="logit-flip", vocabulary=vocab)
    orig = tuple(pair.original_tokens)
    masked = tuple(pair.masked_tokens)
    scenario.add(orig, (), _scored_vector(vocab, FLIP_ORIG))
    scenario.add(masked, (), _scored_vector(vocab, FLIP_MASKED))
    for first in ("1", "2"):
        prefix = (vocab.id_of(first),)
        scenario.add(orig, prefix, _eos_vector(vocab))
        scenario.add(masked, prefix, _eos_vector(vocab))
    meta = {
        "original_text": pair.original_text,
        "masked_text": pair.masked_text,
        "original_tokens": list(orig),
        "masked_tokens": list(masked),
    }
    return scenario, meta


# Ensemble grouping example: with these scores the six grid strengths split
# their top-1 picks two/four between tokens A and B (flip threshold 0.25).
GROUPING_ORIG = {"A": 0.50, "B": 0.45}
GROUPING_MASKED = {"A": 0.50, "B": 0.25}


def build_grouping_scenario() -> tuple[ScriptedScenario, dict]:
    """Single-step scenario realizing the two/four supporter grouping."""
    vocab = Vocabulary.from_tokens(["A", "B"])
    scenario = ScriptedScenario(name="ensemble-grouping", vocabulary=vocab)
    orig = (vocab.id_of("A"), vocab.id_of("B"))  # stand-in prompt context
    masked = (vocab.mask_id,)
    scenario.add(orig, (), _scored_vector(vocab, GROUPING_ORIG))
    scenario.add(masked, (), _scored_vector(vocab, GROUPING_MASKED))
    for first in ("A", "B"):
        prefix = (vocab.id_of(first),)
        scenario.add(orig, prefix, _eos_vector(vocab))
        scenario.add(masked, prefix, _eos_vector(vocab))
    meta = {"original_tokens": list(orig), "masked_tokens": list(masked)}
    return scenario, meta


def write_fixtures(out_dir, which: str = "all") -> list[Path]:
    """Write the bundled fixture scenarios to disk; rerun is byte-identical."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if which in ("all", "flip"):
        scenario, _ = build_flip_scenario()
        path = out_dir / "flip_scenario.json"
        scenario.save(path)
        written.append(path)
    if which in ("all", "grouping"):
        scenario, _ = build_grouping_scenario()
        path = out_dir / "grouping_scenario.json"
        scenario.save(path)
        written.append(path)
    return written
