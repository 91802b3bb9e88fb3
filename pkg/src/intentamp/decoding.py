"""Decoding engine: intent-signal extraction, multi-strength amplification,
token-level ensemble, and beam search, plus baseline decoders.

Per step the intent-amplified mode queries logits for the original and the
intent-masked prompt (same generated prefix on both branches), computes the
signal delta, amplifies it at every grid strength, softmaxes each amplified
vector, and ensembles the per-strength top-1 picks by averaging the softmax
probabilities of the strengths that selected each unique token.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlphaOutOfRange, EmptyBeam, LengthMismatch
from .masking import PromptPair

DEFAULT_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)

MODES = ("greedy", "beam", "nucleus", "fixed_alpha", "intent_coding")


@dataclass(frozen=True)
class AmplificationGrid:
    """Strictly increasing amplification strengths in [0, 1]."""

    alphas: tuple = DEFAULT_GRID

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas:
            raise AlphaOutOfRange("grid must contain at least one strength")
        for a in alphas:
            if not 0.0 <= a <= 1.0:
                raise AlphaOutOfRange(f"strength {a} outside [0, 1]")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError(f"grid strengths must be strictly increasing: {alphas}")
        object.__setattr__(self, "alphas", alphas)

    def __len__(self) -> int:
        return len(self.alphas)

    def __iter__(self):
        return iter(self.alphas)


@dataclass(frozen=True)
class CandidateToken:
    """A unique per-step token with its ensemble probability and supporters."""

    token: int
    ensemble_prob: float
    supporters: frozenset  # indices into the grid


@dataclass(frozen=True)
class Hypothesis:
    """A beam entry: generated tokens, cumulative log score, finished flag."""

    tokens: tuple = ()
    cum_log_score: float = 0.0
    finished: bool = False

    def extend(self, token: int, log_score: float, finished: bool) -> "Hypothesis":
        return Hypothesis(self.tokens + (token,), self.cum_log_score + log_score, finished)


@dataclass(frozen=True)
class DecodeConfig:
    mode: str = "intent_coding"
    beam_size: int = 4
    max_tokens: int = 256
    top_p: float = 1.0
    temperature: float = 1.0
    fixed_alpha: float = 0.0
    grid: AmplificationGrid = field(default_factory=AmplificationGrid)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0.0 <= self.fixed_alpha <= 1.0:
            raise AlphaOutOfRange(f"fixed_alpha {self.fixed_alpha} outside [0, 1]")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax; argmax and probabilities are unchanged."""
    shifted = logits - logits.max()
    exps = np.exp(shifted)
    return exps / exps.sum()


def extract_intent_delta(orig: np.ndarray, masked: np.ndarray) -> np.ndarray:
    """Element-wise difference of original minus intent-masked logits."""
    if orig.shape != masked.shape:
        raise LengthMismatch(f"logit lengths differ: {orig.shape} vs {masked.shape}")
    return orig - masked


def amplify(orig: np.ndarray, delta: np.ndarray, alpha: float) -> np.ndarray:
    """Add the alpha-scaled intent signal back onto the original logits."""
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha {alpha} outside [0, 1]")
    if orig.shape != delta.shape:
        raise LengthMismatch(f"logit lengths differ: {orig.shape} vs {delta.shape}")
    return orig + alpha * delta


def ensemble_step(orig: np.ndarray, masked: np.ndarray, grid: AmplificationGrid) -> list[CandidateToken]:
    """Group per-strength top-1 picks by token id; average supporter probs.

    Ties in a per-strength argmax break toward the lowest token id.
    Candidates come back sorted by ensemble probability descending (token id
    ascending on exact ties).
    """
    delta = extract_intent_delta(orig, masked)
    picks: dict[int, list] = {}
    for k, alpha in enumerate(grid):
        probs = softmax(amplify(orig, delta, alpha))
        token = int(np.argmax(probs))  # first max = lowest id on ties
        picks.setdefault(token, []).append((k, float(probs[token])))
    candidates = [
        CandidateToken(
            token=token,
            ensemble_prob=sum(p for _, p in sel) / len(sel),
            supporters=frozenset(k for k, _ in sel),
        )
        for token, sel in picks.items()
    ]
    candidates.sort(key=lambda c: (-c.ensemble_prob, c.token))
    return candidates


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def _prune(pool: list[Hypothesis], beam_size: int) -> list[Hypothesis]:
    """Merge duplicate token sequences (keep the higher score), then keep the
    beam_size best by cumulative log score."""
    best: dict[tuple, Hypothesis] = {}
    for hyp in pool:
        held = best.get(hyp.tokens)
        if held is None or hyp.cum_log_score > held.cum_log_score:
            best[hyp.tokens] = hyp
    ranked = sorted(best.values(), key=lambda h: (-h.cum_log_score, h.tokens))
    return ranked[:beam_size]


def _beam_loop(expand, eos_id: int, config: DecodeConfig) -> list[Hypothesis]:
    """Generic beam search. expand(hyp) yields (token, log_score) children."""
    beam = [Hypothesis()]
    for _ in range(config.max_tokens):
        if all(h.finished for h in beam):
            break
        pool: list[Hypothesis] = [h for h in beam if h.finished]
        for hyp in beam:
            if hyp.finished:
                continue
            children = expand(hyp)
            if not children:
                raise EmptyBeam("beam expansion produced no candidates")
            for token, log_score in children:
                pool.append(hyp.extend(token, log_score, finished=token == eos_id))
        beam = _prune(pool, config.beam_size)
    return sorted(beam, key=lambda h: (-h.cum_log_score, h.tokens))


def decode_greedy(backend, prompt, config: DecodeConfig) -> Hypothesis:
    """Argmax-per-step decoding on the original prompt only."""
    hyp = Hypothesis()
    prompt = tuple(prompt)
    for _ in range(config.max_tokens):
        logits = backend.query_logits(prompt, hyp.tokens)
        token = int(np.argmax(logits))
        log_p = float(_log_softmax(logits)[token])
        hyp = hyp.extend(token, log_p, finished=token == backend.eos_id)
        if hyp.finished:
            break
    return hyp


def decode_beam(backend, prompt, config: DecodeConfig) -> list[Hypothesis]:
    """Standard beam search over original-prompt log-softmax scores."""
    prompt = tuple(prompt)

    def expand(hyp: Hypothesis):
        log_probs = _log_softmax(backend.query_logits(prompt, hyp.tokens))
        top = np.argsort(-log_probs, kind="stable")[:config.beam_size]
        return [(int(t), float(log_probs[t])) for t in top]

    return _beam_loop(expand, backend.eos_id, config)


def decode_nucleus(backend, prompt, config: DecodeConfig) -> Hypothesis:
    """Top-p sampling with temperature and a seeded generator."""
    rng = np.random.default_rng(config.seed)
    prompt = tuple(prompt)
    hyp = Hypothesis()
    for _ in range(config.max_tokens):
        logits = backend.query_logits(prompt, hyp.tokens)
        probs = softmax(logits / config.temperature)
        order = np.argsort(-probs, kind="stable")
        cumulative = np.cumsum(probs[order])
        keep = int(np.searchsorted(cumulative, config.top_p) + 1)
        keep = min(keep, len(order))
        nucleus = order[:keep]
        nucleus_probs = probs[nucleus] / probs[nucleus].sum()
        token = int(rng.choice(nucleus, p=nucleus_probs))
        hyp = hyp.extend(token, math.log(float(probs[token])), finished=token == backend.eos_id)
        if hyp.finished:
            break
    return hyp


def decode_fixed_alpha(backend, pair: PromptPair, config: DecodeConfig) -> list[Hypothesis]:
    """Beam search on logits amplified at a single fixed strength."""
    orig_prompt = tuple(pair.original_tokens)
    masked_prompt = tuple(pair.masked_tokens)

    def expand(hyp: Hypothesis):
        orig = backend.query_logits(orig_prompt, hyp.tokens)
        masked = backend.query_logits(masked_prompt, hyp.tokens)
        amped = amplify(orig, extract_intent_delta(orig, masked), config.fixed_alpha)
        log_probs = _log_softmax(amped)
        top = np.argsort(-log_probs, kind="stable")[:config.beam_size]
        return [(int(t), float(log_probs[t])) for t in top]

    return _beam_loop(expand, backend.eos_id, config)


def decode_intent_coding(backend, pair: PromptPair, config: DecodeConfig,
                         trace: list | None = None) -> list[Hypothesis]:
    """Multi-strength ensemble decoding integrated with beam search.

    Each live hypothesis expands by every ensemble candidate, scored by the
    log of its ensemble probability. End-of-sequence is driven by the
    original branch's token stream only; the masked branch exists solely to
    produce the intent signal.
    """
    orig_prompt = tuple(pair.original_tokens)
    masked_prompt = tuple(pair.masked_tokens)

    def expand(hyp: Hypothesis):
        orig = backend.query_logits(orig_prompt, hyp.tokens)
        masked = backend.query_logits(masked_prompt, hyp.tokens)
        candidates = ensemble_step(orig, masked, config.grid)
        if trace is not None:
            trace.append({
                "prefix": list(hyp.tokens),
                "candidates": [
                    {"token": c.token, "ensemble_prob": c.ensemble_prob,
                     "supporters": sorted(c.supporters)}
                    for c in candidates
                ],
            })
        return [(c.token, math.log(c.ensemble_prob)) for c in candidates]

    return _beam_loop(expand, backend.eos_id, config)


def run_decode(backend, pair: PromptPair, config: DecodeConfig,
               trace: list | None = None) -> list[Hypothesis]:
    """Dispatch on config.mode; always returns hypotheses best-first."""
    if config.mode == "greedy":
        return [decode_greedy(backend, pair.original_tokens, config)]
    if config.mode == "beam":
        return decode_beam(backend, pair.original_tokens, config)
    if config.mode == "nucleus":
        return [decode_nucleus(backend, pair.original_tokens, config)]
    if config.mode == "fixed_alpha":
        return decode_fixed_alpha(backend, pair, config)
    return decode_intent_coding(backend, pair, config, trace=trace)
