"""scikit-learn style wrapper: ``fit`` trains under one objective, ``predict`` generates facets."""

from __future__ import annotations

from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import inference
from .metrics import exact_match
from .model import ModelConfig, Parameters, load_checkpoint, save_checkpoint
from .permute import JOINT_OBJECTIVES, SET_PRED, check_objective, default_limits
from .text import Vocabulary, build_vocabulary
from .training import TrainConfig, TrainingLog, train
from .validation import check_float, check_int, check_queries, check_records


class FacetGenerator(BaseEstimator):
    """Facet generator trained under one of the five objectives.

    ``X`` is a list of :class:`~facetgen.corpus.QueryRecord` (or dicts with
    ``query``, ``facets`` and optional ``documents``).  ``predict`` returns one
    facet list per query: joint objectives decode greedily and stop on their
    own, ``set-pred`` takes the top ``n_facets`` beams and ``seq-set-pred``
    generates ``n_facets`` facets one after another.

    Fitted attributes: ``vocabulary_``, ``params_``, ``training_log_``.
    """

    def __init__(
        self,
        objective: str = "seq-default",
        embedding_dim: int = 32,
        hidden_dim: int = 64,
        epochs: int = 200,
        batch_size: int = 16,
        learning_rate: float = 1e-2,
        weight_decay: float = 0.0,
        permutations_per_query: int | None = 6,
        seq_set_schedule: Mapping[int, int] | None = None,
        sampling_replace: bool = False,
        n_facets: int = 3,
        beam_width: int = 5,
        max_input_tokens: int | None = None,
        max_output_tokens: int | None = None,
        min_frequency: int = 1,
        random_state: int = 0,
        init_seed: int | None = None,
    ):
        self.objective = objective
        self.embedding_dim = embedding_dim
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.permutations_per_query = permutations_per_query
        self.seq_set_schedule = seq_set_schedule
        self.sampling_replace = sampling_replace
        self.n_facets = n_facets
        self.beam_width = beam_width
        self.max_input_tokens = max_input_tokens
        self.max_output_tokens = max_output_tokens
        self.min_frequency = min_frequency
        self.random_state = random_state
        self.init_seed = init_seed

    def _validate_params(self):
        check_objective(self.objective)
        for name in ("embedding_dim", "hidden_dim", "batch_size", "n_facets", "beam_width", "min_frequency"):
            check_int(getattr(self, name), name, minimum=1)
        check_int(self.epochs, "epochs", minimum=0)
        check_int(self.permutations_per_query, "permutations_per_query", minimum=1, allow_none=True)
        check_int(self.max_input_tokens, "max_input_tokens", minimum=2, allow_none=True)
        check_int(self.max_output_tokens, "max_output_tokens", minimum=2, allow_none=True)
        check_float(self.learning_rate, "learning_rate", strict=True)
        check_float(self.weight_decay, "weight_decay")

    def _model_config(self, vocab_size: int) -> ModelConfig:
        max_in, max_out = default_limits(self.objective)
        return ModelConfig(
            vocab_size=vocab_size,
            embedding_dim=self.embedding_dim,
            hidden_dim=self.hidden_dim,
            max_input_tokens=self.max_input_tokens or max_in,
            max_output_tokens=self.max_output_tokens or max_out,
            init_seed=self.random_state if self.init_seed is None else self.init_seed,
        )

    def _train_config(self) -> TrainConfig:
        kwargs = {}
        if self.seq_set_schedule is not None:
            kwargs["seq_set_schedule"] = {int(k): int(v) for k, v in self.seq_set_schedule.items()}
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            seed=self.random_state,
            permutations_per_query=self.permutations_per_query,
            replace=self.sampling_replace,
            **kwargs,
        )

    def fit(self, X, y=None):
        """Build the vocabulary from ``X`` and train; ``y`` is ignored."""
        self._validate_params()
        records = check_records(X)
        self.vocabulary_ = build_vocabulary(records, self.min_frequency)
        self.params_, self.training_log_ = train(
            self.objective, records, self.vocabulary_, self._model_config(len(self.vocabulary_)), self._train_config()
        )
        return self

    def predict_one(self, record) -> list[str]:
        check_is_fitted(self, "params_")
        record, = check_queries([record])
        if self.objective in JOINT_OBJECTIVES:
            return inference.generate_joint(self.params_, record, self.vocabulary_, self.params_.config.max_output_tokens)
        if self.objective == SET_PRED:
            return inference.generate_set(
                self.params_, record, self.vocabulary_, self.n_facets, self.beam_width, self.params_.config.max_output_tokens
            )
        return inference.generate_seq_set(
            self.params_, record, self.vocabulary_, self.n_facets, self.beam_width, self.params_.config.max_output_tokens
        )

    def predict(self, X) -> list[list[str]]:
        check_is_fitted(self, "params_")
        return [self.predict_one(rec) for rec in check_queries(X)]

    def score(self, X, y=None) -> float:
        """Mean exact-match F1 of the predictions against the facets in ``X``."""
        records = check_records(X)
        preds = self.predict(records)
        return float(np.mean([exact_match(p, r.facets).f1 for p, r in zip(preds, records)]))

    def save(self, path) -> None:
        check_is_fitted(self, "params_")
        meta = {
            "objective": self.objective,
            "estimator_params": _jsonable(self.get_params()),
            "vocabulary": list(self.vocabulary_.id_to_token),
        }
        save_checkpoint(path, self.params_, meta)

    @classmethod
    def load(cls, path) -> "FacetGenerator":
        params, meta = load_checkpoint(path)
        est = cls(**meta.get("estimator_params", {"objective": meta["objective"]}))
        est.vocabulary_ = Vocabulary(tuple(meta["vocabulary"]))
        est.params_ = params
        est.training_log_ = TrainingLog(est.objective, est.random_state, params.config.init_seed)
        if len(est.vocabulary_) != params.config.vocab_size:
            raise ValueError("checkpoint vocabulary does not match its parameters")
        return est

    @classmethod
    def from_parameters(cls, params: Parameters, vocab: Vocabulary, **kwargs) -> "FacetGenerator":
        est = cls(**kwargs)
        est.vocabulary_, est.params_ = vocab, params
        est.training_log_ = TrainingLog(est.objective, est.random_state, params.config.init_seed)
        return est


def _jsonable(params: dict) -> dict:
    out = dict(params)
    if out.get("seq_set_schedule") is not None:
        out["seq_set_schedule"] = {str(k): int(v) for k, v in out["seq_set_schedule"].items()}
    return out
