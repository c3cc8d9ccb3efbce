"""Minibatch training of the sequence model under one objective."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import QueryRecord
from .model import ModelConfig, NumericError, Parameters, init_parameters
from .objectives import objective_loss
from .optim import AdamW, OptimizerState, apply_update
from .permute import PERMUTATIONS_PER_QUERY, SEQ_SET_SCHEDULE, Limits, SamplingPlan, build_examples, check_objective
from .text import Vocabulary

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 16
    learning_rate: float = 1e-2
    weight_decay: float = 0.0
    seed: int = 0
    permutations_per_query: int | None = PERMUTATIONS_PER_QUERY
    seq_set_schedule: Mapping[int, int] = field(default_factory=lambda: dict(SEQ_SET_SCHEDULE))
    replace: bool = False

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TrainingLog:
    objective: str
    seed: int
    init_seed: int
    epochs: list[dict] = field(default_factory=list)
    # Wall-clock seconds per epoch; kept apart so the rest stays reproducible.
    wall_time: list[float] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [e["loss"] for e in self.epochs]


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch])


def epoch_examples(objective, corpus, vocab, plan, limits, rng):
    """Examples for every record, grouped by record index, in record order."""
    return [
        build_examples(objective, rec, plan, vocab, limits, rng=rng, group_key=i)
        for i, rec in enumerate(corpus)
    ]


def train(
    objective: str,
    corpus: Sequence[QueryRecord],
    vocab: Vocabulary,
    model_config: ModelConfig,
    train_config: TrainConfig = TrainConfig(),
    on_epoch: Callable[[dict], None] | None = None,
) -> tuple[Parameters, TrainingLog]:
    """Train from ``init_parameters(model_config)``.

    Each epoch draws fresh orderings from its own seeded generator, shuffles
    the queries, and applies one AdamW update per batch of ``batch_size``
    queries.  Raises :class:`NumericError` if the loss stops being finite.
    """
    check_objective(objective)
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    if model_config.vocab_size != len(vocab):
        raise ValueError("model vocab_size does not match the vocabulary")
    plan = SamplingPlan(
        objective,
        permutations_per_query=train_config.permutations_per_query,
        seq_set_schedule=train_config.seq_set_schedule,
        replace=train_config.replace,
    )
    limits = Limits(model_config.max_input_tokens, model_config.max_output_tokens)
    hyper = AdamW(learning_rate=train_config.learning_rate, weight_decay=train_config.weight_decay)
    params = init_parameters(model_config)
    state = OptimizerState.zeros_like(params)
    log = TrainingLog(objective, train_config.seed, model_config.init_seed)
    for epoch in range(train_config.epochs):
        start = time.perf_counter()
        rng = epoch_rng(train_config.seed, epoch)
        per_query = epoch_examples(objective, corpus, vocab, plan, limits, rng)
        order = rng.permutation(len(corpus))
        weighted, n_examples = 0.0, 0
        for b in range(0, len(order), train_config.batch_size):
            batch_ids = order[b:b + train_config.batch_size]
            batch = [e for i in batch_ids for e in per_query[i]]
            try:
                loss, grads = objective_loss(params, objective, batch, grad=True)
            except NumericError as exc:
                raise NumericError(f"training diverged at epoch {epoch}, batch {b // train_config.batch_size}: {exc}") from exc
            if not math.isfinite(loss):
                raise NumericError(f"training diverged at epoch {epoch}: loss {loss}")
            params, state = apply_update(params, grads, state, hyper)
            weighted += loss * len(batch_ids)
            n_examples += len(batch)
        entry = {"epoch": epoch, "loss": weighted / len(corpus), "examples": n_examples}
        log.epochs.append(entry)
        log.wall_time.append(time.perf_counter() - start)
        logger.debug("%s epoch %d loss %.6f", objective, epoch, entry["loss"])
        if on_epoch is not None:
            on_epoch(entry)
    return params, log
