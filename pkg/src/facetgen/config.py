"""Experiment configuration: JSON documents layered over named profiles."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .permute import OBJECTIVES, SEQ_SET_SCHEDULE, check_objective

_COMMON = {
    "corpus": {
        "source": "synthetic",
        "num_queries": 50,
        "facet_count_distribution": {"2": 0.3, "3": 0.7},
        "vocab_size": 60,
        "seed": 0,
    },
    "objectives": list(OBJECTIVES),
    "sampling": {
        "permutations_per_query": 6,
        "seq_set_schedule": {str(k): v for k, v in SEQ_SET_SCHEDULE.items()},
        "replace": False,
    },
    "inference": {"n_facets": 3, "beam_width": 5},
    "metrics": {
        "ngram_orders": [1, 2, 3, 4],
        "bleu_mode": "per-order",
        "diversity": True,
        "embedding_provider": "trigram",
    },
}

PROFILES: dict[str, dict] = {
    # Reference numerology of the original BART-scale setup; not meant to be
    # run at desk scale.
    "reference": {
        **_COMMON,
        "model": {"embedding_dim": 768, "hidden_dim": 768, "init_seed": 0, "min_frequency": 1},
        "training": {"epochs": 5, "batch_size": 16, "learning_rate": 5e-5, "weight_decay": 0.01, "seed": 0},
    },
    "desk": {
        **_COMMON,
        "model": {"embedding_dim": 32, "hidden_dim": 64, "init_seed": 0, "min_frequency": 1},
        "training": {"epochs": 200, "batch_size": 16, "learning_rate": 1e-2, "weight_decay": 0.0, "seed": 0},
    },
}


class ConfigError(ValueError):
    pass


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class ExperimentConfig:
    data: dict
    base_dir: Path

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".", profile: str | None = None) -> "ExperimentConfig":
        name = profile or raw.get("profile", "desk")
        if name not in PROFILES:
            raise ConfigError(f"unknown profile {name!r}; expected one of {sorted(PROFILES)}")
        data = deep_merge(PROFILES[name], {k: v for k, v in raw.items() if k != "profile"})
        data["profile"] = name
        cfg = cls(data, Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, profile: str | None = None) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw, path.parent, profile)

    def validate(self) -> None:
        objectives = self.data.get("objectives")
        if not objectives:
            raise ConfigError("at least one objective is required")
        for obj in objectives:
            try:
                check_objective(obj)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        source = self.corpus.get("source")
        if source not in ("synthetic", "native", "mimics"):
            raise ConfigError(f"unknown corpus source {source!r}")
        if source == "native" and "path" not in self.corpus:
            raise ConfigError("native corpus needs 'path'")
        if source == "mimics" and "tsv" not in self.corpus:
            raise ConfigError("mimics corpus needs 'tsv'")
        if self.training["epochs"] < 0 or self.training["batch_size"] < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.inference["n_facets"] < 1 or self.inference["beam_width"] < 1:
            raise ConfigError("n_facets and beam_width must be >= 1")

    def override_seed(self, seed: int) -> None:
        self.data["training"]["seed"] = seed
        self.data["model"]["init_seed"] = seed
        self.data["corpus"]["seed"] = seed

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def __getattr__(self, name: str) -> Any:
        data = self.__dict__.get("data", {})
        if name in data:
            return data[name]
        raise AttributeError(name)

    @property
    def seq_set_schedule(self) -> dict[int, int]:
        return {int(k): int(v) for k, v in self.sampling["seq_set_schedule"].items()}

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)
