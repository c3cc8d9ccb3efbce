"""The five facet-generation training losses as reducers over built examples.

Every objective is computed the same way: per-example NLLs come out of one
batched forward pass, examples are grouped per query by ``group_key``, each
group is reduced (weighted mean, or minimum for seq-min-perm), and the batch
loss is the mean over groups.  The reduction also yields the coefficient of
each example NLL, which is all the backward pass needs.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .corpus import QueryRecord
from .model import Parameters, backward, forward
from .permute import (
    OBJECTIVES,
    SEQ_AVG_PERM,
    SEQ_DEFAULT,
    SEQ_MIN_PERM,
    SEQ_SET_PRED,
    SET_PRED,
    Arrangement,
    Limits,
    SamplingPlan,
    TrainingExample,
    build_examples,
    check_objective,
)
from .text import Vocabulary

__all__ = [
    "OBJECTIVES",
    "reduce_group",
    "objective_loss",
    "loss_seq_default",
    "loss_seq_min_perm",
    "loss_seq_avg_perm",
    "loss_set_pred",
    "loss_seq_set_pred",
]


def reduce_group(objective: str, nlls: np.ndarray, weights: np.ndarray) -> tuple[float, np.ndarray]:
    """Reduce one query's example NLLs; return the loss and d(loss)/d(nll).

    The min reducer breaks ties by lowest index.  Weighted means divide by
    the realized weight sum and use exactly rounded summation, so the result
    does not depend on example order.
    """
    nlls = np.asarray(nlls, dtype=np.float64)
    if objective == SEQ_MIN_PERM:
        k = int(np.argmin(nlls))
        coefs = np.zeros_like(nlls)
        coefs[k] = 1.0
        return float(nlls[k]), coefs
    w = np.asarray(weights, dtype=np.float64)
    total = math.fsum(w)
    coefs = w / total
    return math.fsum(coefs * nlls), coefs


def objective_loss(params: Parameters, objective: str, examples: Sequence[TrainingExample], grad: bool = False):
    """Mean per-query loss over ``examples``; with ``grad`` also its gradient."""
    check_objective(objective)
    if not examples:
        raise ValueError("no examples")
    cache = forward(params, [e.input for e in examples], [e.target for e in examples])
    groups: dict = {}
    for i, e in enumerate(examples):
        groups.setdefault(e.group_key, []).append(i)
    coefs = np.zeros(len(examples))
    losses = []
    for idx in groups.values():
        idx = np.array(idx)
        loss, c = reduce_group(objective, cache.nll[idx], [examples[i].weight for i in idx])
        losses.append(loss)
        coefs[idx] = c / len(groups)
    total = math.fsum(losses) / len(groups)
    if not grad:
        return total
    return total, backward(params, cache, coefs)


def _limits(params: Parameters) -> Limits:
    return Limits(params.config.max_input_tokens, params.config.max_output_tokens)


def _loss(params, objective, record, vocab, plan, grad):
    examples = build_examples(objective, record, plan, vocab, _limits(params))
    return objective_loss(params, objective, examples, grad=grad)


def _perm_examples(params, objective, record, vocab, perms):
    plan = SamplingPlan.full_enumeration(objective)
    if perms is None:
        return build_examples(objective, record, plan, vocab, _limits(params))
    perms = list(perms)
    if not perms:
        raise ValueError("perms must be non-empty")
    m = record.n_facets
    for p in perms:
        if sorted(p) != list(range(m)):
            raise ValueError(f"{p} is not a permutation of {m} facets")
    # Build one joint example per given ordering, in the given order.
    out = []
    for p in perms:
        reordered = record.with_facets([record.facets[i] for i in p])
        ex = build_examples(SEQ_DEFAULT, reordered, SamplingPlan(SEQ_DEFAULT), vocab, _limits(params))[0]
        out.append(TrainingExample(ex.input, ex.target, 0, 1.0 / len(perms)))
    return out


def loss_seq_default(params: Parameters, record: QueryRecord, vocab: Vocabulary, grad: bool = False):
    return _loss(params, SEQ_DEFAULT, record, vocab, SamplingPlan(SEQ_DEFAULT), grad)


def loss_seq_min_perm(
    params: Parameters,
    record: QueryRecord,
    vocab: Vocabulary,
    perms: Sequence[Arrangement] | None = None,
    grad: bool = False,
):
    """Minimum joint-sequence NLL over ``perms`` (all orderings when omitted)."""
    examples = _perm_examples(params, SEQ_MIN_PERM, record, vocab, perms)
    return objective_loss(params, SEQ_MIN_PERM, examples, grad=grad)


def loss_seq_avg_perm(
    params: Parameters,
    record: QueryRecord,
    vocab: Vocabulary,
    perms: Sequence[Arrangement] | None = None,
    grad: bool = False,
):
    examples = _perm_examples(params, SEQ_AVG_PERM, record, vocab, perms)
    return objective_loss(params, SEQ_AVG_PERM, examples, grad=grad)


def loss_set_pred(params: Parameters, record: QueryRecord, vocab: Vocabulary, grad: bool = False):
    return _loss(params, SET_PRED, record, vocab, SamplingPlan(SET_PRED), grad)


def loss_seq_set_pred(
    params: Parameters,
    record: QueryRecord,
    vocab: Vocabulary,
    examples: Sequence[TrainingExample] | None = None,
    grad: bool = False,
):
    """Weight-normalized mean over (prefix, next facet) examples.

    Without ``examples`` every arrangement is enumerated.
    """
    if examples is None:
        examples = build_examples(
            SEQ_SET_PRED, record, SamplingPlan.full_enumeration(SEQ_SET_PRED), vocab, _limits(params)
        )
    return objective_loss(params, SEQ_SET_PRED, examples, grad=grad)


def per_permutation_losses(params: Parameters, record: QueryRecord, vocab: Vocabulary, perms=None) -> np.ndarray:
    """Joint-sequence NLL of each ordering, in the order given."""
    examples = _perm_examples(params, SEQ_AVG_PERM, record, vocab, perms)
    return forward(params, [e.input for e in examples], [e.target for e in examples]).nll
