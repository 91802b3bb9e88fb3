"""Toy vocabulary and lossless text segmentation for the deterministic backends.

Real model tokenizers live behind the remote backend boundary; everything
in-repo uses this whitespace-plus-punctuation segmenter, which keeps
whitespace runs as tokens so that decode(encode(text)) == text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import UnknownToken

MASK_SURFACE = "<mask>"
EOS_SURFACE = "<eos>"

# Order matters: special sentinels first, then floats before ints before words.
_TOKEN_RE = re.compile(
    r"<mask>|<eos>|\d+\.\d+|\d+|[A-Za-z_]+|\s+|[^\w\s]"
)


def segment(text: str) -> list[str]:
    """Split text into surface tokens. Concatenating them restores the text."""
    return _TOKEN_RE.findall(text)


@dataclass
class Vocabulary:
    """Ordered token surfaces with mask and end-of-sequence sentinels."""

    tokens: list[str]
    mask_id: int = 0
    eos_id: int = 1
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary surfaces must be unique")
        for name, sid in (("mask_id", self.mask_id), ("eos_id", self.eos_id)):
            if not 0 <= sid < len(self.tokens):
                raise ValueError(f"{name}={sid} outside vocabulary of size {len(self.tokens)}")
        self._index = {tok: i for i, tok in enumerate(self.tokens)}

    @classmethod
    def from_texts(cls, texts, extra_tokens=()) -> "Vocabulary":
        """Build a vocabulary covering every segment of the given texts."""
        surfaces = [MASK_SURFACE, EOS_SURFACE]
        seen = set(surfaces)
        for text in texts:
            for tok in segment(text):
                if tok not in seen:
                    seen.add(tok)
                    surfaces.append(tok)
        for tok in extra_tokens:
            if tok not in seen:
                seen.add(tok)
                surfaces.append(tok)
        return cls(surfaces)

    @classmethod
    def from_tokens(cls, tokens) -> "Vocabulary":
        """Build from explicit surfaces, prepending the sentinels if absent."""
        surfaces = [MASK_SURFACE, EOS_SURFACE]
        seen = set(surfaces)
        for tok in tokens:
            if tok not in seen:
                seen.add(tok)
                surfaces.append(tok)
        return cls(surfaces)

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, surface: str) -> int:
        try:
            return self._index[surface]
        except KeyError:
            raise UnknownToken(f"surface not in vocabulary: {surface!r}") from None

    def surface(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise UnknownToken(f"token id out of range: {token_id}")
        return self.tokens[token_id]

    def encode(self, text: str) -> list[int]:
        return [self.id_of(tok) for tok in segment(text)]

    def decode(self, ids) -> str:
        return "".join(self.surface(i) for i in ids)

    def validate_ids(self, ids) -> None:
        for i in ids:
            if not 0 <= i < len(self.tokens):
                raise UnknownToken(f"token id out of range: {i}")

    def to_dict(self) -> dict:
        return {"tokens": list(self.tokens), "mask_id": self.mask_id, "eos_id": self.eos_id}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(list(d["tokens"]), mask_id=int(d["mask_id"]), eos_id=int(d["eos_id"]))
