"""Query records, corpus loaders, synthetic data and model input/target construction."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .text import EOS_ID, FACET_SEP_ID, SEP_ID, Vocabulary, normalize, tokenize

logger = logging.getLogger(__name__)

MAX_FACETS = 5
MAX_DOCUMENTS = 10


class CorpusFormatError(ValueError):
    pass


class CorpusIOError(OSError):
    pass


@dataclass(frozen=True)
class QueryRecord:
    """One (query, documents, facets) triple; facets keep their file order."""

    query: str
    facets: tuple[str, ...]
    documents: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "facets", tuple(self.facets))
        object.__setattr__(self, "documents", tuple(self.documents))

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    def with_facets(self, facets: Sequence[str]) -> "QueryRecord":
        return QueryRecord(self.query, tuple(facets), self.documents)

    def to_dict(self) -> dict:
        return {"query": self.query, "facets": list(self.facets), "documents": list(self.documents)}


def make_record(query: str, facets: Sequence[str], documents: Sequence[str] = ()) -> QueryRecord:
    """Normalize raw fields and enforce the record invariants.

    Raises ``ValueError`` describing the first violated invariant.
    """
    q = normalize(query)
    if not q:
        raise ValueError("empty query")
    fs = [normalize(f) for f in facets]
    if not fs or any(not f for f in fs):
        raise ValueError("empty facet set" if not fs else "empty facet")
    if len(set(fs)) != len(fs):
        raise ValueError("duplicate facets after normalization")
    if len(fs) > MAX_FACETS:
        raise ValueError(f"more than {MAX_FACETS} facets")
    docs = [d for d in (normalize(x) for x in documents) if d]
    if len(docs) > MAX_DOCUMENTS:
        raise ValueError(f"more than {MAX_DOCUMENTS} documents")
    return QueryRecord(q, tuple(fs), tuple(docs))


@dataclass
class LoadReport:
    """Per-line diagnostics for records that were skipped during loading."""

    skipped: list[tuple[int, str]] = field(default_factory=list)

    def add(self, line_no: int, reason: str) -> None:
        logger.warning("line %d skipped: %s", line_no, reason)
        self.skipped.append((line_no, reason))


def load_native(path, report: LoadReport | None = None) -> list[QueryRecord]:
    """Read the JSONL corpus format: ``{"query", "facets", "documents"?}`` per line."""
    report = report if report is not None else LoadReport()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"io: cannot read {path}: {exc}") from exc
    records = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            report.add(line_no, f"malformed json: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            report.add(line_no, "not a json object")
            continue
        query, facets, docs = obj.get("query"), obj.get("facets"), obj.get("documents", [])
        if not isinstance(query, str) or not _is_str_list(facets) or not _is_str_list(docs):
            report.add(line_no, "missing or mistyped fields")
            continue
        try:
            records.append(make_record(query, facets, docs))
        except ValueError as exc:
            report.add(line_no, str(exc))
    return records


def _is_str_list(x) -> bool:
    return isinstance(x, list) and all(isinstance(s, str) for s in x)


def write_native(records: Sequence[QueryRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")


def load_mimics(tsv_path, serp_path=None, report: LoadReport | None = None) -> list[QueryRecord]:
    """Load a MIMICS-style TSV (``query``, ``option_1``..``option_5``).

    ``serp_path`` optionally points at a JSONL file of
    ``{"query": ..., "snippets": [...]}`` rows supplying document text.
    Rows sharing a query string are kept as separate records.
    """
    report = report if report is not None else LoadReport()
    snippets: dict[str, list[str]] = {}
    if serp_path is not None:
        for i, row in enumerate(_read_lines(serp_path), start=1):
            try:
                obj = json.loads(row)
                snippets.setdefault(normalize(obj["query"]), list(obj["snippets"]))
            except (json.JSONDecodeError, KeyError, TypeError):
                report.add(i, "malformed snippet row")
    option_cols = [f"option_{k}" for k in range(1, MAX_FACETS + 1)]
    try:
        fh = open(tsv_path, encoding="utf-8", newline="")
    except OSError as exc:
        raise CorpusIOError(f"io: cannot read {tsv_path}: {exc}") from exc
    records = []
    with fh:
        reader = csv.DictReader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        missing = [c for c in ["query", *option_cols] if c not in (reader.fieldnames or [])]
        if missing:
            raise CorpusFormatError(f"format: missing columns {missing}")
        for line_no, row in enumerate(reader, start=2):
            options = [(row.get(c) or "").strip() for c in option_cols]
            facets = [o for o in options if o]
            if not facets:
                report.add(line_no, "no non-empty options")
                continue
            query = row.get("query") or ""
            docs = snippets.get(normalize(query), [])[:MAX_DOCUMENTS]
            try:
                records.append(make_record(query, facets, docs))
            except ValueError as exc:
                report.add(line_no, str(exc))
    return records


def _read_lines(path) -> list[str]:
    try:
        return [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    except OSError as exc:
        raise CorpusIOError(f"io: cannot read {path}: {exc}") from exc


def synthesize_corpus(
    num_queries: int,
    facet_count_distribution: Mapping[int, float] | Sequence[float] = (0.0, 0.3, 0.7, 0.0, 0.0),
    vocab_size: int = 60,
    seed: int = 0,
    num_documents: int = 2,
    filler_per_document: int = 1,
) -> list[QueryRecord]:
    """Generate a learnable corpus where each query token determines its facet set.

    ``vocab_size`` is the size of the content-word pool shared by facets and
    documents; query tokens (``q0``, ``q1``, ...) come on top of it.  Facets
    are one or two content words, token-disjoint within a query, and every
    document is a shuffle of all facet words plus a few filler words.
    """
    if num_queries < 1:
        raise ValueError("num_queries must be >= 1")
    weights = _count_weights(facet_count_distribution)
    max_words = 2 * max(k for k, w in weights.items() if w > 0)
    if vocab_size < max_words + filler_per_document:
        raise ValueError("vocab_size too small for the requested facet counts")
    counts = np.array(sorted(weights))
    probs = np.array([weights[k] for k in counts], dtype=float)
    probs /= probs.sum()
    width = len(str(vocab_size - 1))
    pool = [f"w{j:0{width}d}" for j in range(vocab_size)]
    records = []
    for i in range(num_queries):
        rng = np.random.default_rng([seed, i])
        m = int(rng.choice(counts, p=probs))
        lengths = rng.integers(1, 3, size=m)
        words = [pool[j] for j in rng.choice(vocab_size, size=int(lengths.sum()), replace=False)]
        facets, pos = [], 0
        for n in lengths:
            facets.append(" ".join(words[pos:pos + n]))
            pos += n
        used = set(words)
        rest = [w for w in pool if w not in used]
        docs = []
        for _ in range(num_documents):
            filler = [rest[j] for j in rng.choice(len(rest), size=filler_per_document, replace=False)]
            toks = words + filler
            docs.append(" ".join(toks[j] for j in rng.permutation(len(toks))))
        records.append(QueryRecord(f"q{i}", tuple(facets), tuple(docs)))
    return records


def _count_weights(dist) -> dict[int, float]:
    if isinstance(dist, Mapping):
        weights = {int(k): float(v) for k, v in dist.items()}
    else:
        weights = {k: float(v) for k, v in enumerate(dist, start=1)}
    if any(k < 1 or k > MAX_FACETS for k in weights) or any(v < 0 for v in weights.values()):
        raise ValueError("facet_count_distribution must weight counts 1..5 nonnegatively")
    if sum(weights.values()) <= 0:
        raise ValueError("facet_count_distribution has no mass")
    return weights


def build_model_input(
    record: QueryRecord,
    vocab: Vocabulary,
    prefix_facets: Sequence[str] = (),
    max_input_tokens: int = 512,
) -> list[int]:
    """Encoder ids for ``q [SEP] d1 ... [SEP] dk [SEP] p1 ... [SEP] pj``.

    When too long, document text is cut from the right first (whole trailing
    documents go before earlier ones); prefix facets are only truncated once
    no document tokens remain.
    """
    q = vocab.encode(tokenize(record.query))
    if max_input_tokens < len(q) + 1:
        raise ValueError("max_input_tokens must exceed the query length")
    docs: list[int] = []
    for d in record.documents:
        docs += [SEP_ID] + vocab.encode(tokenize(d))
    prefix: list[int] = []
    for p in prefix_facets:
        prefix += [SEP_ID] + vocab.encode(tokenize(p))
    budget = max_input_tokens - len(q) - len(prefix)
    if budget >= len(docs):
        return q + docs + prefix
    docs = _strip_sep(docs[:max(budget, 0)])
    out = _strip_sep(q + docs + prefix)
    return _strip_sep(out[:max_input_tokens])


def _strip_sep(ids: list[int]) -> list[int]:
    while ids and ids[-1] == SEP_ID:
        ids = ids[:-1]
    return ids


def build_joint_target(facets: Sequence[str], vocab: Vocabulary) -> list[int]:
    """``f1 , f2 , ... , fm </s>`` in the order given."""
    if not facets:
        raise ValueError("facets must be non-empty")
    out: list[int] = []
    for k, f in enumerate(facets):
        if k:
            out.append(FACET_SEP_ID)
        out += vocab.encode(tokenize(f))
    out.append(EOS_ID)
    return out


def build_facet_target(facet: str, vocab: Vocabulary) -> list[int]:
    return vocab.encode(tokenize(facet)) + [EOS_ID]


@dataclass(frozen=True)
class CorpusStats:
    """Token-level averages used by the per-epoch cost formulas."""

    query_length: float
    documents_length: float
    facet_count: float
    facet_length: float
    n: int

    def to_dict(self) -> dict:
        return {
            "query_length": self.query_length,
            "documents_length": self.documents_length,
            "facet_count": self.facet_count,
            "facet_length": self.facet_length,
            "n": self.n,
        }


def compute_stats(corpus: Sequence[QueryRecord]) -> CorpusStats:
    records = list(corpus)
    if not records:
        raise ValueError("empty corpus")
    n = len(records)
    q = sum(len(tokenize(r.query)) for r in records) / n
    # Documents are measured as one concatenation per query.
    d = sum(sum(len(tokenize(x)) for x in r.documents) for r in records) / n
    m = sum(r.n_facets for r in records) / n
    all_facets = [f for r in records for f in r.facets]
    f = sum(len(tokenize(x)) for x in all_facets) / len(all_facets)
    if not all(math.isfinite(v) for v in (q, d, m, f)):
        raise ValueError("non-finite corpus statistics")
    return CorpusStats(q, d, m, f, n)
