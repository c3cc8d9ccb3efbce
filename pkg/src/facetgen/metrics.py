"""Matching and diversity metrics for generated facet sets."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import QueryRecord
from .embeddings import EmbeddingProvider, TrigramEmbedder, check_unit
from .inference import dedup
from .text import normalize, tokenize

MAX_ALIGNMENT = 8


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, p: float, r: float) -> "PRF":
        return cls(p, r, 0.0 if p + r == 0 else 2 * p * r / (p + r))

    @classmethod
    def zero(cls) -> "PRF":
        return cls(0.0, 0.0, 0.0)


def _terms(facets: Sequence[str]) -> set[str]:
    return {t for f in facets for t in tokenize(f)}


def term_overlap(pred: Sequence[str], truth: Sequence[str]) -> PRF:
    """Precision/recall of the union of predicted terms against the union of true terms."""
    tp, tt = _terms(pred), _terms(truth)
    if not tp or not tt:
        return PRF.zero()
    hit = len(tp & tt)
    return PRF.from_pr(hit / len(tp), hit / len(tt))


def exact_match(pred: Sequence[str], truth: Sequence[str]) -> PRF:
    if not pred or not truth:
        return PRF.zero()
    hit = len({normalize(f) for f in pred} & {normalize(f) for f in truth})
    return PRF.from_pr(hit / len(pred), hit / len(truth))


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def modified_precision(candidate: list[str], reference: list[str], n: int) -> float:
    cand = _ngrams(candidate, n)
    if not cand:
        return 0.0
    ref = _ngrams(reference, n)
    clipped = sum(min(c, ref[g]) for g, c in cand.items())
    return clipped / sum(cand.values())


def brevity_penalty(c: int, r: int) -> float:
    if c == 0:
        return 0.0
    return 1.0 if c >= r else math.exp(1.0 - r / c)


def pair_bleu(candidate: str, reference: str, n: int, mode: str = "per-order") -> float:
    """BLEU of one candidate facet against one reference facet.

    ``per-order`` scores the order-``n`` clipped precision alone;
    ``cumulative`` takes the geometric mean of orders 1..n.  Both apply the
    brevity penalty and are unsmoothed.
    """
    if not 1 <= n <= 4:
        raise ValueError("n must be within 1..4")
    cand, ref = tokenize(candidate), tokenize(reference)
    if len(cand) < n or not ref:
        return 0.0
    bp = brevity_penalty(len(cand), len(ref))
    if mode == "per-order":
        return bp * modified_precision(cand, ref, n)
    if mode == "cumulative":
        ps = [modified_precision(cand, ref, k) for k in range(1, n + 1)]
        if min(ps) == 0.0:
            return 0.0
        return bp * math.exp(sum(math.log(p) for p in ps) / n)
    raise ValueError(f"unknown BLEU mode {mode!r}")


def best_alignment(scores) -> tuple[int, ...]:
    """Permutation ``perm`` maximizing ``sum(scores[i][perm[i]])``.

    Exhaustive over all orderings; ties go to the lexicographically
    smallest permutation.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
        raise ValueError("score matrix must be square and non-empty")
    size = s.shape[0]
    if size > MAX_ALIGNMENT:
        raise ValueError("alignment too large")
    rows = np.arange(size)
    best, best_val = None, -math.inf
    for perm in itertools.permutations(range(size)):
        val = s[rows, perm].sum()
        if val > best_val:
            best, best_val = perm, val
    return best


def _pad(pred: Sequence[str], truth: Sequence[str]) -> tuple[list[str], list[str]]:
    size = max(len(pred), len(truth))
    return list(pred) + [""] * (size - len(pred)), list(truth) + [""] * (size - len(truth))


def set_bleu(pred: Sequence[str], truth: Sequence[str], n: int, mode: str = "per-order") -> float:
    """Mean pair BLEU under the best one-to-one alignment.

    The shorter side is padded with empty facets, which score 0 against
    anything, so unmatched facets pull the mean down.
    """
    if not truth:
        raise ValueError("truth must be non-empty")
    p, t = _pad(pred, truth)
    mat = np.array([[pair_bleu(a, b, n, mode) for b in t] for a in p])
    perm = best_alignment(mat)
    return float(mat[np.arange(len(p)), perm].mean())


def greedy_match(cand: np.ndarray, ref: np.ndarray) -> PRF:
    """Token-level greedy matching on cosine similarity (inputs are unit rows)."""
    if len(cand) == 0 or len(ref) == 0:
        return PRF.zero()
    sim = cand @ ref.T
    return PRF.from_pr(float(sim.max(axis=1).mean()), float(sim.max(axis=0).mean()))


class _Embedded:
    def __init__(self, provider: EmbeddingProvider):
        self.provider = provider
        self.cache: dict[str, np.ndarray] = {}

    def __call__(self, text: str) -> np.ndarray:
        if text not in self.cache:
            self.cache[text] = check_unit(self.provider.embed(text))
        return self.cache[text]


def set_embedding_score(pred: Sequence[str], truth: Sequence[str], provider: EmbeddingProvider | None = None) -> PRF:
    """Greedy-matching P/R/F1 averaged over the best facet alignment (by F1)."""
    if not truth:
        raise ValueError("truth must be non-empty")
    emb = _Embedded(provider or TrigramEmbedder())
    p, t = _pad(pred, truth)
    cells = [[greedy_match(emb(a), emb(b)) for b in t] for a in p]
    perm = best_alignment([[c.f1 for c in row] for row in cells])
    chosen = [cells[i][j] for i, j in enumerate(perm)]
    return PRF(
        float(np.mean([c.precision for c in chosen])),
        float(np.mean([c.recall for c in chosen])),
        float(np.mean([c.f1 for c in chosen])),
    )


def facet_body(facet: str, query: str) -> str:
    """Facet text with every query word removed."""
    qwords = set(tokenize(query))
    return " ".join(t for t in tokenize(facet) if t not in qwords)


def term_diversity(facets: Sequence[str]) -> float | None:
    """Mean over facet pairs of ``1 - 2|A_i & A_j| / (|A_i| + |A_j|)``.

    ``None`` for fewer than two facets.  Two empty facets count as identical.
    """
    if len(facets) < 2:
        return None
    sets = [set(tokenize(f)) for f in facets]
    vals = []
    for a, b in itertools.combinations(sets, 2):
        denom = len(a) + len(b)
        vals.append(0.0 if denom == 0 else 1.0 - 2.0 * len(a & b) / denom)
    return float(np.mean(vals))


def embedding_diversity(facets: Sequence[str], provider: EmbeddingProvider | None = None) -> PRF | None:
    """One minus the mean pairwise greedy-matching P/R/F1 (candidate i, reference j, i < j)."""
    if len(facets) < 2:
        return None
    emb = _Embedded(provider or TrigramEmbedder())
    sims = []
    for a, b in itertools.combinations(facets, 2):
        ea, eb = emb(a), emb(b)
        if len(ea) == 0 and len(eb) == 0:
            sims.append(PRF(1.0, 1.0, 1.0))
        else:
            sims.append(greedy_match(ea, eb))
    return PRF(
        1.0 - float(np.mean([s.precision for s in sims])),
        1.0 - float(np.mean([s.recall for s in sims])),
        1.0 - float(np.mean([s.f1 for s in sims])),
    )


def count_ratio_term(predicted: int, truth: int) -> float:
    if truth < 1:
        raise ValueError("truth count must be >= 1")
    return 1.0 - abs(predicted - truth) / truth


def count_ratio(pairs: Sequence[tuple[int, int]]) -> float:
    """Mean of ``1 - |f - g| / g``; terms are not clamped at zero."""
    if not pairs:
        raise ValueError("no count pairs")
    return float(np.mean([count_ratio_term(f, g) for f, g in pairs]))


@dataclass(frozen=True)
class EvalOptions:
    ngram_orders: tuple[int, ...] = (1, 2, 3, 4)
    bleu_mode: str = "per-order"
    diversity: bool = True


MATCH_KEYS = (
    "term_overlap_p", "term_overlap_r", "term_overlap_f1",
    "exact_match_p", "exact_match_r", "exact_match_f1",
)
EMBED_KEYS = ("set_bert_p", "set_bert_r", "set_bert_f1")
DIVERSITY_KEYS = ("term_diversity", "bert_diversity_p", "bert_diversity_r", "bert_diversity_f1")


def bleu_key(n: int) -> str:
    return f"set_bleu_{n}"


@dataclass
class MetricReport:
    """Per-query metric rows plus their macro averages.

    Diversity values are ``None`` where fewer than two facet bodies exist;
    such queries are left out of the diversity averages only.
    """

    method: str
    rows: list[dict]
    macro: dict
    facet_count_histogram: dict[int, int] = field(default_factory=dict)

    def column(self, key: str) -> list[float | None]:
        return [row[key] for row in self.rows]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "macro": self.macro,
            "facet_count_histogram": {str(k): v for k, v in sorted(self.facet_count_histogram.items())},
            "rows": self.rows,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        hist = {int(k): int(v) for k, v in data.get("facet_count_histogram", {}).items()}
        return cls(data["method"], list(data["rows"]), dict(data["macro"]), hist)


def _query_row(query, pred, truth, provider, options) -> dict:
    row: dict = {"query": query, "n_pred": len(pred), "n_truth": len(truth)}
    to, em = term_overlap(pred, truth), exact_match(pred, truth)
    row.update(zip(MATCH_KEYS, (to.precision, to.recall, to.f1, em.precision, em.recall, em.f1)))
    for n in options.ngram_orders:
        row[bleu_key(n)] = set_bleu(pred, truth, n, options.bleu_mode)
    sb = set_embedding_score(pred, truth, provider)
    row.update(zip(EMBED_KEYS, (sb.precision, sb.recall, sb.f1)))
    if options.diversity:
        bodies = [facet_body(f, query) for f in pred]
        td = term_diversity(bodies)
        ed = embedding_diversity(bodies, provider)
        row["term_diversity"] = td
        for key, val in zip(DIVERSITY_KEYS[1:], (None, None, None) if ed is None else (ed.precision, ed.recall, ed.f1)):
            row[key] = val
    row["count_ratio"] = count_ratio_term(len(pred), len(truth))
    return row


def macro_average(rows: Sequence[dict]) -> dict:
    keys = [k for k in rows[0] if k not in ("query", "n_pred", "n_truth")]
    macro = {"queries": len(rows)}
    for k in keys:
        vals = [r[k] for r in rows if r[k] is not None]
        macro[k] = float(np.mean(vals)) if vals else None
    return macro


def evaluate(
    predictions: Sequence[tuple[str, Sequence[str]]],
    gold: Sequence[QueryRecord],
    provider: EmbeddingProvider | None = None,
    options: EvalOptions | None = None,
    method: str = "predictions",
) -> MetricReport:
    """Score predictions against gold records matched by normalized query.

    Predicted facets are deduplicated first.  A query listed several times
    in the gold data is matched to its occurrences in order.
    """
    options = options or EvalOptions()
    provider = provider or TrigramEmbedder()
    pool: dict[str, list[QueryRecord]] = {}
    for rec in gold:
        pool.setdefault(normalize(rec.query), []).append(rec)
    used: Counter = Counter()
    pairs, missing = [], []
    for query, facets in predictions:
        key = normalize(query)
        candidates = pool.get(key, [])
        if used[key] >= len(candidates):
            missing.append(query)
            continue
        pairs.append((candidates[used[key]], dedup(facets)))
        used[key] += 1
    if missing:
        raise ValueError(f"predictions for unknown queries: {missing}")
    if not pairs:
        raise ValueError("no predictions to evaluate")
    rows = [_query_row(rec.query, pred, list(rec.facets), provider, options) for rec, pred in pairs]
    hist = Counter(len(pred) for _, pred in pairs)
    return MetricReport(method, rows, macro_average(rows), dict(sorted(hist.items())))
