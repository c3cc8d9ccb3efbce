"""Decoding: beam search, joint greedy generation, top-z set generation and
sequential set generation."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import QueryRecord, build_model_input
from .model import Parameters, decoder_step, encode
from .text import BOS_ID, EOS_ID, FACET_SEP_ID, PAD_ID, SEP_ID, Vocabulary, normalize

logger = logging.getLogger(__name__)

# Never useful as generated tokens.
_ALWAYS_BANNED = (PAD_ID, BOS_ID)


@dataclass(frozen=True)
class Beam:
    tokens: tuple[int, ...]
    logprob: float

    @property
    def finished(self) -> bool:
        return bool(self.tokens) and self.tokens[-1] == EOS_ID


def _log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def beam_search(
    params: Parameters,
    context: np.ndarray,
    beam_width: int,
    max_len: int,
    banned: Iterable[int] = (),
    length_normalize: bool = False,
) -> list[tuple[tuple[int, ...], float]]:
    """Width-limited search over next-token expansions.

    Each step expands every live hypothesis by every allowed token and keeps
    the best ``beam_width`` candidates; those ending in EOS move to the
    finished pool, so width 1 is greedy decoding.  Hypotheses still open after ``max_len``
    tokens get an EOS appended without scoring it.  Returns up to
    ``beam_width`` sequences, best first, by total log-probability.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    c = np.asarray(context, dtype=np.float64)[None, :]
    banned = sorted(set(banned))

    def rank(beam: Beam):
        score = beam.logprob / len(beam.tokens) if length_normalize else beam.logprob
        return (-score, beam.tokens)

    live = [Beam((), 0.0)]
    states = c
    finished: list[Beam] = []
    for _ in range(max_len):
        prev = np.array([b.tokens[-1] if b.tokens else BOS_ID for b in live])
        h, logits, _ = decoder_step(params, states, prev, np.repeat(c, len(live), axis=0))
        logp = _log_softmax(logits)
        if banned:
            logp[:, banned] = -np.inf
        candidates = []
        for i, b in enumerate(live):
            for tok in np.flatnonzero(np.isfinite(logp[i])):
                candidates.append((Beam(b.tokens + (int(tok),), b.logprob + float(logp[i, tok])), i))
        candidates.sort(key=lambda bc: rank(bc[0]))
        new_live, parents = [], []
        for beam, parent in candidates[:beam_width]:
            if beam.finished:
                finished.append(beam)
            else:
                new_live.append(beam)
                parents.append(parent)
        live, states = new_live, h[parents] if parents else h[:0]
        if not live:
            break
        if len(finished) >= beam_width and not length_normalize:
            worst_kept = sorted(finished, key=rank)[beam_width - 1].logprob
            # Extensions only lower the score, so no live hypothesis can catch up.
            if live[0].logprob <= worst_kept:
                break
    finished += [Beam(b.tokens + (EOS_ID,), b.logprob) for b in live]
    finished.sort(key=rank)
    return [(b.tokens, b.logprob) for b in finished[:beam_width]]


def dedup(facets: Sequence[str]) -> list[str]:
    """Drop empty facets and facets equal (after normalization) to an earlier one."""
    seen: set[str] = set()
    out = []
    for f in facets:
        key = normalize(f)
        if key and key not in seen:
            seen.add(key)
            out.append(key)
    return out


def split_joint(ids: Sequence[int], vocab: Vocabulary) -> list[str]:
    """Cut a generated id sequence at EOS and split it on facet separators."""
    segments: list[list[int]] = [[]]
    for i in ids:
        if i == EOS_ID:
            break
        if i == FACET_SEP_ID:
            segments.append([])
        else:
            segments[-1].append(i)
    return [vocab.decode(seg) for seg in segments if seg]


def facet_text(ids: Sequence[int], vocab: Vocabulary) -> str:
    """Surface form of a single-facet sequence (everything before EOS)."""
    body = []
    for i in ids:
        if i == EOS_ID:
            break
        body.append(i)
    return vocab.decode(body)


def generate_joint(
    params: Parameters,
    record: QueryRecord,
    vocab: Vocabulary,
    max_out: int = 128,
) -> list[str]:
    """Greedy decode of a comma-separated facet sequence."""
    x = build_model_input(record, vocab, (), params.config.max_input_tokens)
    (tokens, _), = beam_search(params, encode(params, x), 1, max_out, banned=_ALWAYS_BANNED)
    return dedup(split_joint(tokens, vocab))


def _single_facet_beams(params, x, vocab, beam_width, max_out):
    banned = _ALWAYS_BANNED + (SEP_ID, FACET_SEP_ID)
    beams = beam_search(params, encode(params, x), beam_width, max_out, banned=banned)
    return [facet_text(tokens, vocab) for tokens, _ in beams]


def generate_set(
    params: Parameters,
    record: QueryRecord,
    vocab: Vocabulary,
    z: int = 3,
    beam_width: int = 5,
    max_out: int = 32,
    distinct: bool = True,
) -> list[str]:
    """Top-``z`` facets from one beam search over single-facet outputs.

    With ``distinct`` a beam whose text repeats an earlier pick is skipped
    and the next beam takes its place; otherwise duplicates use up slots and
    are removed afterwards.
    """
    if z < 1:
        raise ValueError("z must be >= 1")
    x = build_model_input(record, vocab, (), params.config.max_input_tokens)
    texts = _single_facet_beams(params, x, vocab, max(beam_width, z), max_out)
    if not distinct:
        return dedup(texts[:z])
    return dedup(texts)[:z]


def generate_seq_set(
    params: Parameters,
    record: QueryRecord,
    vocab: Vocabulary,
    count: int = 3,
    beam_width: int = 5,
    max_out: int = 32,
) -> list[str]:
    """Generate facets one at a time, appending each to the encoder input.

    A step whose best beam repeats an earlier facet falls back to the next
    beam; when no beam offers a new facet generation stops early.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    facets: list[str] = []
    for _ in range(count):
        x = build_model_input(record, vocab, facets, params.config.max_input_tokens)
        choice = None
        for text in _single_facet_beams(params, x, vocab, beam_width, max_out):
            key = normalize(text)
            if key and key not in facets:
                choice = key
                break
        if choice is None:
            logger.info("early stop for %r after %d facets: no new facet among beams", record.query, len(facets))
            break
        facets.append(choice)
    return facets


def write_predictions(rows: Iterable[tuple[str, Sequence[str]]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for query, facets in rows:
            fh.write(json.dumps({"query": query, "facets": list(facets)}, ensure_ascii=False) + "\n")


def read_predictions(path) -> list[tuple[str, list[str]]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                query, facets = obj["query"], obj["facets"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad prediction row ({exc})") from exc
            if not isinstance(query, str) or not isinstance(facets, list) or not all(isinstance(f, str) for f in facets):
                raise ValueError(f"{path}:{line_no}: bad prediction row")
            rows.append((query, facets))
    return rows
