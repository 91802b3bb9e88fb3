"""Logit providers: the backend boundary plus two deterministic toy backends.

A backend answers next-token logit queries conditioned on (prompt, prefix)
token ids. Scripted backends replay stored vectors for exact tests; the
n-gram backend gives a tiny trainable model with add-k smoothing.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyCorpus, ScenarioMiss, UnknownToken
from .vocab import Vocabulary


class LogitBackend:
    """Base class for logit providers over an in-repo Vocabulary.

    Subclasses implement _query; query_logits validates arguments and the
    returned vector. Backends are read-only after construction and declare
    whether concurrent queries are safe.
    """

    vocabulary: Vocabulary
    concurrent_safe: bool = True

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    @property
    def eos_id(self) -> int:
        return self.vocabulary.eos_id

    @property
    def mask_id(self) -> int:
        return self.vocabulary.mask_id

    def query_logits(self, prompt, prefix) -> np.ndarray:
        self.vocabulary.validate_ids(prompt)
        self.vocabulary.validate_ids(prefix)
        vec = self._query(tuple(prompt), tuple(prefix))
        self._check_vector(vec)
        return vec

    def _query(self, prompt: tuple, prefix: tuple) -> np.ndarray:
        raise NotImplementedError

    def _check_vector(self, vec: np.ndarray) -> None:
        if vec.shape != (self.vocab_size,):
            raise ValueError(
                f"backend returned vector of length {vec.shape}, expected {self.vocab_size}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValueError("backend returned non-finite logits")


@dataclass
class ScriptedScenario:
    """A replayable table of (prompt, prefix) -> logit vector entries."""

    name: str
    vocabulary: Vocabulary
    entries: dict = field(default_factory=dict)  # (prompt ids, prefix ids) -> np.ndarray
    fallback: float | None = None

    def add(self, prompt, prefix, logits) -> None:
        key = (tuple(prompt), tuple(prefix))
        vec = np.asarray(logits, dtype=np.float64)
        if vec.shape != (len(self.vocabulary),):
            raise ValueError("entry logits do not match vocabulary size")
        self.entries[key] = vec

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "vocab": self.vocabulary.to_dict(),
            "fallback": self.fallback,
            "entries": [
                {"prompt": list(p), "prefix": list(x), "logits": v.tolist()}
                for (p, x), v in sorted(self.entries.items())
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ScriptedScenario":
        doc = json.loads(text)
        scenario = cls(
            name=doc["name"],
            vocabulary=Vocabulary.from_dict(doc["vocab"]),
            fallback=doc.get("fallback"),
        )
        for entry in doc["entries"]:
            scenario.add(entry["prompt"], entry["prefix"], entry["logits"])
        return scenario

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ScriptedScenario":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


class ScriptedBackend(LogitBackend):
    """Replays a ScriptedScenario exactly; misses use the scenario fallback."""

    def __init__(self, scenario: ScriptedScenario):
        self.scenario = scenario
        self.vocabulary = scenario.vocabulary

    def _query(self, prompt, prefix) -> np.ndarray:
        entry = self.scenario.entries.get((prompt, prefix))
        if entry is not None:
            return entry.copy()
        if self.scenario.fallback is not None:
            return np.full(self.vocab_size, float(self.scenario.fallback))
        raise ScenarioMiss(
            f"scenario {self.scenario.name!r} has no entry for prompt={prompt} prefix={prefix}"
        )


class NgramBackend(LogitBackend):
    """Order-k n-gram model with add-k smoothing over a toy vocabulary.

    Logits are log-probabilities, so exp of a returned vector sums to 1.
    An unseen context with zero smoothing falls back to a uniform
    distribution (deterministic, never an error).
    """

    def __init__(self, corpus_tokens, order: int, smoothing: float = 0.0,
                 vocabulary: Vocabulary | None = None):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if smoothing < 0:
            raise ValueError(f"smoothing must be >= 0, got {smoothing}")
        corpus_tokens = list(corpus_tokens)
        if not corpus_tokens:
            raise EmptyCorpus("cannot train an n-gram backend on an empty corpus")
        self.order = order
        self.smoothing = float(smoothing)
        self.vocabulary = vocabulary or Vocabulary.from_tokens(corpus_tokens)
        try:
            ids = [self.vocabulary.id_of(tok) for tok in corpus_tokens]
        except UnknownToken as exc:
            raise UnknownToken(f"corpus token missing from vocabulary: {exc}") from exc
        # Successor counts for every context length 0..order-1.
        self._counts: dict[tuple, Counter] = defaultdict(Counter)
        for i, tok in enumerate(ids):
            for ctx_len in range(order):
                if ctx_len > i:
                    break
                ctx = tuple(ids[i - ctx_len:i])
                self._counts[ctx][tok] += 1

    @classmethod
    def from_text(cls, text: str, order: int, smoothing: float = 0.0) -> "NgramBackend":
        from .vocab import segment
        return cls(segment(text), order, smoothing)

    def _query(self, prompt, prefix) -> np.ndarray:
        context = (prompt + prefix)[max(0, len(prompt) + len(prefix) - (self.order - 1)):]
        counts = self._counts.get(tuple(context), Counter())
        total = sum(counts.values())
        k = self.smoothing
        size = self.vocab_size
        if total == 0 and k == 0:
            probs = np.full(size, 1.0 / size)
        else:
            vec = np.full(size, k, dtype=np.float64)
            for tok, c in counts.items():
                vec[tok] += c
            denom = total + k * size
            if denom == 0:
                probs = np.full(size, 1.0 / size)
            else:
                probs = vec / denom
                if k == 0:
                    # Unsmoothed: unseen continuations get a hard floor to keep
                    # logits finite while preserving normalization closely.
                    zero = probs == 0
                    if zero.any():
                        floor = 1e-12
                        probs = np.where(zero, floor, probs)
                        probs = probs / probs.sum()
        return np.log(probs)


def train_ngram(corpus_tokens, order: int, smoothing: float = 0.0) -> NgramBackend:
    """Train an add-k smoothed n-gram backend on an explicit token sequence."""
    return NgramBackend(corpus_tokens, order, smoothing)
