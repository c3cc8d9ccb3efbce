"""Whitespace tokenization and vocabulary handling shared by every module."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

PAD_ID, BOS_ID, EOS_ID, SEP_ID, FACET_SEP_ID, UNK_ID = range(6)

# Rendered forms of the reserved ids, in id order.
RESERVED_TOKENS = ("<pad>", "<s>", "</s>", "[SEP]", ",", "<unk>")
N_RESERVED = len(RESERVED_TOKENS)


def normalize(text: str) -> str:
    """Lowercase and collapse all whitespace runs to single spaces."""
    return " ".join(text.lower().split())


def tokenize(text: str) -> list[str]:
    return normalize(text).split()


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token/id mapping with six reserved ids at the bottom.

    Surface tokens that happen to coincide with a reserved rendering (a bare
    ``,`` in some facet text, for instance) are never given a reserved id;
    they encode as ``<unk>``.
    """

    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.id_to_token[:N_RESERVED]) != RESERVED_TOKENS:
            raise ValueError("vocabulary must start with the reserved tokens")
        mapping = {}
        for i, tok in enumerate(self.id_to_token[N_RESERVED:], start=N_RESERVED):
            if tok in RESERVED_TOKENS:
                raise ValueError(f"surface token {tok!r} collides with a reserved token")
            if tok in mapping:
                raise ValueError(f"duplicate token {tok!r}")
            mapping[tok] = i
        object.__setattr__(self, "token_to_id", mapping)

    @classmethod
    def from_tokens(cls, surface_tokens: Iterable[str]) -> "Vocabulary":
        return cls(RESERVED_TOKENS + tuple(surface_tokens))

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    @property
    def surface_tokens(self) -> tuple[str, ...]:
        return self.id_to_token[N_RESERVED:]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        get = self.token_to_id.get
        return [get(tok, UNK_ID) for tok in tokens]

    def decode(self, ids: Iterable[int]) -> str:
        n = len(self.id_to_token)
        out = []
        for i in ids:
            i = int(i)
            if not 0 <= i < n:
                raise ValueError(f"invalid token id {i}")
            if i in (PAD_ID, BOS_ID):
                continue
            out.append(self.id_to_token[i])
        return " ".join(out)

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.id_to_token) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(tuple(lines))


def build_vocabulary(corpus, min_frequency: int = 1) -> Vocabulary:
    """Collect tokens from queries, documents and facets of ``corpus``.

    Ids are assigned by descending corpus frequency, ties broken
    lexicographically, after the reserved block.
    """
    if min_frequency < 1:
        raise ValueError("min_frequency must be >= 1")
    records = list(corpus)
    if not records:
        raise ValueError("empty corpus")
    counts: Counter[str] = Counter()
    for rec in records:
        counts.update(tokenize(rec.query))
        for text in rec.documents:
            counts.update(tokenize(text))
        for text in rec.facets:
            counts.update(tokenize(text))
    kept = [t for t, c in counts.items() if c >= min_frequency and t not in RESERVED_TOKENS]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary.from_tokens(kept)
