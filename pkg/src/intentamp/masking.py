"""Intent-span location and masked-prompt construction.

The masked prompt is the original prompt with each located intent span
replaced by a mask sentinel; everything outside the spans is preserved
byte-for-byte. Per-constraint masking replaces a single constraint
sentence while the rest of the intent stays verbatim.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import InvalidSpan, OverlappingSpans, SpanNotFound, UnknownConstraint
from .vocab import MASK_SURFACE, Vocabulary

WHOLE_INTENT = "whole-intent"

TEMPLATES = (
    "humaneval-docstring",
    "livecodebench-question",
    "codeconstraints-docstring",
    "ifevalcode-constraints",
    "explicit-markers",
)


@dataclass(frozen=True, order=True)
class IntentSpan:
    """Byte range [start, end) of prompt text carrying (part of) the intent."""

    start: int
    end: int
    label: str = WHOLE_INTENT

    def slice(self, text: str) -> str:
        return text[self.start:self.end]


@dataclass
class PromptPair:
    """An original prompt and its intent-masked variant."""

    original_text: str
    masked_text: str
    spans: list[IntentSpan]
    original_tokens: list[int] | None = None
    masked_tokens: list[int] | None = None

    def encode(self, vocabulary: Vocabulary) -> "PromptPair":
        self.original_tokens = vocabulary.encode(self.original_text)
        self.masked_tokens = vocabulary.encode(self.masked_text)
        return self


def _check_spans(text: str, spans) -> list[IntentSpan]:
    if not spans:
        raise InvalidSpan("span list must be non-empty")
    ordered = sorted(spans)
    prev_end = -1
    for span in ordered:
        if not (0 <= span.start < span.end <= len(text)):
            raise InvalidSpan(f"span {span} out of bounds for text of length {len(text)}")
        if span.start < prev_end:
            raise OverlappingSpans(f"span {span} overlaps a previous span")
        prev_end = span.end
    return ordered


_DOCSTRING_RE = re.compile(r"('''|\"\"\")(.*?)\1", re.DOTALL)
_LCB_QUESTION_RE = re.compile(r"### Question\n(.*?)(?=\n\n)", re.DOTALL)
_IFEVAL_BLOCK_RE = re.compile(r"(?<=Constraints:\n)((?:\d+\.[^\n]*\n?)+)")


def locate_intent_span(prompt_text: str, template: str, record: dict | None = None) -> list[IntentSpan]:
    """Find the natural-language intent span(s) for a benchmark template.

    explicit-markers reads spans recorded in the dataset record instead of
    pattern matching; the other templates apply fixed regex patterns.
    """
    if template not in TEMPLATES:
        raise ValueError(f"unknown template {template!r}, expected one of {TEMPLATES}")

    if template == "explicit-markers":
        if record is None or "spans" not in record:
            raise SpanNotFound("explicit-markers requires a record with pre-recorded spans")
        spans = [
            IntentSpan(int(s["start"]), int(s["end"]), s.get("label", WHOLE_INTENT))
            for s in record["spans"]
            if s.get("label", WHOLE_INTENT) == WHOLE_INTENT
        ]
        if not spans:
            raise SpanNotFound("record carries no whole-intent span")
        return _check_spans(prompt_text, spans)

    if template in ("humaneval-docstring", "codeconstraints-docstring"):
        match = _DOCSTRING_RE.search(prompt_text)
        if match is None or match.start(2) == match.end(2):
            raise SpanNotFound(f"no docstring body found for template {template}")
        if match.group(2).strip() == MASK_SURFACE:
            raise SpanNotFound("docstring body is already masked")
        spans = [IntentSpan(match.start(2), match.end(2))]
    elif template == "livecodebench-question":
        match = _LCB_QUESTION_RE.search(prompt_text)
        if match is None or match.start(1) == match.end(1):
            raise SpanNotFound("no question block found after '### Question'")
        spans = [IntentSpan(match.start(1), match.end(1))]
    else:  # ifevalcode-constraints
        match = _IFEVAL_BLOCK_RE.search(prompt_text)
        if match is None or match.start(1) == match.end(1):
            raise SpanNotFound("no numbered constraints block found after 'Constraints:'")
        spans = [IntentSpan(match.start(1), match.end(1))]
    return _check_spans(prompt_text, spans)


def build_masked_prompt(prompt_text: str, spans, mask_surface: str = MASK_SURFACE) -> PromptPair:
    """Replace each span with the mask sentinel, preserving all other bytes."""
    ordered = _check_spans(prompt_text, spans)
    pieces = []
    cursor = 0
    for span in ordered:
        pieces.append(prompt_text[cursor:span.start])
        pieces.append(mask_surface)
        cursor = span.end
    pieces.append(prompt_text[cursor:])
    return PromptPair(prompt_text, "".join(pieces), ordered)


def mask_single_constraint(instance, constraint: str, mask_surface: str = MASK_SURFACE) -> PromptPair:
    """Mask only one constraint sentence of a generated problem instance."""
    spans = [s for s in instance.intent_spans if s.label == constraint]
    if not spans:
        active = sorted({s.label for s in instance.intent_spans if s.label != WHOLE_INTENT})
        raise UnknownConstraint(
            f"constraint {constraint!r} not active in instance {instance.id!r} "
            f"(active: {active})"
        )
    return build_masked_prompt(instance.prompt_text, spans, mask_surface)
