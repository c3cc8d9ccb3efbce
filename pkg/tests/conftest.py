import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

from facetgen.corpus import make_record
from facetgen.model import ModelConfig, init_parameters
from facetgen.text import Vocabulary

FIXTURES = Path(__file__).parent / "fixtures"

TINY_WORDS = ("a", "b", "c", "d", "e")


def tiny_vocab() -> Vocabulary:
    # 6 reserved + 5 words = 11 ids
    return Vocabulary.from_tokens(TINY_WORDS)


def tiny_params(seed: int, vocab_size: int = 11, embedding_dim: int = 4, hidden_dim: int = 5, scale: float = 1.0):
    """Random parameters, biases included, so nothing sits at a special point."""
    cfg = ModelConfig(vocab_size, embedding_dim, hidden_dim, init_seed=seed)
    base = init_parameters(cfg)
    rng = np.random.default_rng(10_000 + seed)
    return base.replace({k: scale * rng.normal(0.0, 0.5, size=v.shape) for k, v in base.weights.items()})


def random_record(rng: np.random.Generator, m: int, words=TINY_WORDS, facet_len=(1, 2)):
    """Query of one word plus ``m`` distinct facets built from the remaining words."""
    query = str(rng.choice(words))
    rest = [w for w in words if w != query]
    facets: list[str] = []
    while len(facets) < m:
        k = int(rng.integers(facet_len[0], facet_len[1] + 1))
        f = " ".join(str(w) for w in rng.choice(rest, size=k, replace=True))
        if f not in facets:
            facets.append(f)
    doc = " ".join(str(w) for w in rng.choice(words, size=3))
    return make_record(query, facets, [doc])


def all_orderings(seq):
    return [list(p) for p in itertools.permutations(seq)]


@pytest.fixture
def vocab():
    return tiny_vocab()


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
