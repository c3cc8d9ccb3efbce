"""Facet orderings, permutation sampling and per-objective training examples."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .corpus import CorpusStats, QueryRecord, build_facet_target, build_joint_target, build_model_input
from .text import EOS_ID, Vocabulary

SEQ_DEFAULT = "seq-default"
SEQ_MIN_PERM = "seq-min-perm"
SEQ_AVG_PERM = "seq-avg-perm"
SET_PRED = "set-pred"
SEQ_SET_PRED = "seq-set-pred"
OBJECTIVES = (SEQ_DEFAULT, SEQ_MIN_PERM, SEQ_AVG_PERM, SET_PRED, SEQ_SET_PRED)

JOINT_OBJECTIVES = (SEQ_DEFAULT, SEQ_MIN_PERM, SEQ_AVG_PERM)

# Samples per query for seq-set-pred, keyed by facet count.
SEQ_SET_SCHEDULE = {1: 6, 2: 8, 3: 9, 4: 11, 5: 13}
PERMUTATIONS_PER_QUERY = 6
MAX_ENUMERATE = 7

Arrangement = tuple[int, ...]


def check_objective(objective: str) -> str:
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    return objective


def default_limits(objective: str) -> tuple[int, int]:
    """(max input tokens, max output tokens) for an objective."""
    check_objective(objective)
    max_in = 640 if objective == SEQ_SET_PRED else 512
    max_out = 128 if objective in JOINT_OBJECTIVES else 32
    return max_in, max_out


def enumerate_permutations(m: int) -> list[Arrangement]:
    if not 1 <= m <= MAX_ENUMERATE:
        raise ValueError("too many facets to enumerate")
    return list(itertools.permutations(range(m)))


def enumerate_arrangements(m: int, j: int) -> list[Arrangement]:
    """All ordered selections of ``j`` distinct indices out of ``range(m)``."""
    if not 0 <= j <= m:
        raise ValueError(f"need 0 <= j <= m, got j={j}, m={m}")
    if m > MAX_ENUMERATE:
        raise ValueError("too many facets to enumerate")
    return list(itertools.permutations(range(m), j))


def sample_permutations(m: int, count: int, rng: np.random.Generator, replace: bool = False) -> list[Arrangement]:
    """Draw full permutations of ``range(m)`` uniformly.

    Without replacement the result is clamped to ``m!`` distinct orderings;
    asking for at least ``m!`` returns every permutation in lexicographic order.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if replace:
        return [tuple(int(i) for i in rng.permutation(m)) for _ in range(count)]
    total = math.factorial(m)
    if count >= total:
        return enumerate_permutations(m)
    if m <= MAX_ENUMERATE:
        perms = enumerate_permutations(m)
        picks = rng.choice(total, size=count, replace=False)
        return [perms[int(i)] for i in picks]
    seen: dict[Arrangement, None] = {}
    while len(seen) < count:
        seen.setdefault(tuple(int(i) for i in rng.permutation(m)), None)
    return list(seen)


def seq_set_sample_count(m: int, schedule: Mapping[int, int] | None = None) -> int:
    schedule = SEQ_SET_SCHEDULE if schedule is None else schedule
    if m not in schedule:
        raise ValueError(f"no seq-set-pred sample count for {m} facets")
    return int(schedule[m])


@dataclass(frozen=True)
class TrainingExample:
    input: tuple[int, ...]
    target: tuple[int, ...]
    group_key: int
    weight: float

    def __post_init__(self):
        if not self.target or self.target[-1] != EOS_ID:
            raise ValueError("target must end with EOS")
        if not self.weight > 0:
            raise ValueError("weight must be positive")


@dataclass(frozen=True)
class SamplingPlan:
    """How many orderings to draw per query.

    ``permutations_per_query=None`` means full enumeration, for both the
    permutation objectives and seq-set-pred.
    """

    objective: str
    permutations_per_query: int | None = PERMUTATIONS_PER_QUERY
    seq_set_schedule: Mapping[int, int] = field(default_factory=lambda: dict(SEQ_SET_SCHEDULE))
    replace: bool = False

    def __post_init__(self):
        check_objective(self.objective)
        if self.permutations_per_query is not None and self.permutations_per_query < 1:
            raise ValueError("permutations_per_query must be >= 1")
        if any(int(v) < 1 for v in self.seq_set_schedule.values()):
            raise ValueError("seq_set_schedule counts must be >= 1")

    @property
    def full(self) -> bool:
        return self.permutations_per_query is None

    @classmethod
    def full_enumeration(cls, objective: str) -> "SamplingPlan":
        return cls(objective, permutations_per_query=None)


@dataclass(frozen=True)
class Limits:
    max_input_tokens: int
    max_output_tokens: int

    @classmethod
    def for_objective(cls, objective: str) -> "Limits":
        return cls(*default_limits(objective))


def orderings_for(record: QueryRecord, plan: SamplingPlan, rng: np.random.Generator | None) -> list[Arrangement]:
    """Orderings used by the permutation objectives for one record."""
    m = record.n_facets
    if plan.full:
        return enumerate_permutations(m)
    if rng is None:
        raise ValueError("sampling requires an rng")
    count = plan.permutations_per_query
    if plan.objective == SEQ_SET_PRED:
        count = seq_set_sample_count(m, plan.seq_set_schedule)
    return sample_permutations(m, count, rng, replace=plan.replace)


def seq_set_pairs(m: int, orderings: list[Arrangement] | None) -> list[tuple[Arrangement, int]]:
    """Distinct (ordered prefix, target index) pairs, in first-seen order.

    ``orderings=None`` enumerates every arrangement directly.
    """
    if orderings is None:
        return [(pre, t) for j in range(m) for pre in enumerate_arrangements(m, j)
                for t in range(m) if t not in pre]
    seen: dict[tuple[Arrangement, int], None] = {}
    for perm in orderings:
        for t in range(m):
            seen.setdefault((tuple(perm[:t]), perm[t]), None)
    return list(seen)


def build_examples(
    objective: str,
    record: QueryRecord,
    plan: SamplingPlan,
    vocab: Vocabulary,
    limits: Limits | None = None,
    rng: np.random.Generator | None = None,
    group_key: int = 0,
) -> list[TrainingExample]:
    check_objective(objective)
    if plan.objective != objective:
        raise ValueError("sampling plan does not match the objective")
    limits = limits or Limits.for_objective(objective)
    facets = record.facets
    m = len(facets)

    def target(ids):
        if len(ids) > limits.max_output_tokens:
            raise ValueError("target longer than max_output_tokens")
        return tuple(ids)

    if objective == SEQ_SET_PRED:
        orderings = None if plan.full else orderings_for(record, plan, rng)
        pairs = seq_set_pairs(m, orderings)
        w = 1.0 / len(pairs)
        return [
            TrainingExample(
                tuple(build_model_input(record, vocab, [facets[i] for i in pre], limits.max_input_tokens)),
                target(build_facet_target(facets[t], vocab)),
                group_key, w,
            )
            for pre, t in pairs
        ]

    x = tuple(build_model_input(record, vocab, (), limits.max_input_tokens))
    if objective == SEQ_DEFAULT:
        return [TrainingExample(x, target(build_joint_target(facets, vocab)), group_key, 1.0)]
    if objective == SET_PRED:
        return [TrainingExample(x, target(build_facet_target(f, vocab)), group_key, 1.0 / m) for f in facets]
    perms = orderings_for(record, plan, rng)
    w = 1.0 / len(perms)
    return [
        TrainingExample(x, target(build_joint_target([facets[i] for i in p], vocab)), group_key, w)
        for p in perms
    ]


def count_full_examples(objective: str, m: int) -> int:
    check_objective(objective)
    if not 1 <= m <= 5:
        raise ValueError("facet count must be within 1..5")
    if objective == SEQ_DEFAULT:
        return 1
    if objective in (SEQ_MIN_PERM, SEQ_AVG_PERM):
        return math.factorial(m)
    if objective == SET_PRED:
        return m
    return sum(math.perm(m, j) * (m - j) for j in range(m))


def _falling(m: float, i: int) -> float:
    """m (m-1) ... (m-i+1), defined for fractional m."""
    return math.exp(math.lgamma(m + 1) - math.lgamma(m - i + 1))


def estimate_epoch_cost(objective: str, stats: CorpusStats) -> float:
    """Abstract per-epoch token-operation count from the objective complexity table.

    Fractional average facet counts go through the gamma function; the
    seq-set-pred sum runs over ``i = 0 .. ceil(m) - 1``.
    """
    check_objective(objective)
    n, m = stats.n, stats.facet_count
    ctx = stats.query_length + stats.documents_length
    f = stats.facet_length
    joint = ctx ** 2 + (m * f) ** 2 + ctx * m * f
    if objective == SEQ_DEFAULT:
        return n * joint
    if objective in (SEQ_MIN_PERM, SEQ_AVG_PERM):
        return n * math.gamma(m + 1) * joint
    if objective == SET_PRED:
        return n * m * (ctx ** 2 + f ** 2 + ctx * f)
    total = 0.0
    for i in range(math.ceil(m)):
        li = ctx + i * f
        total += _falling(m, i) * (m - i) * (li ** 2 + f ** 2 + li * f)
    return n * total
