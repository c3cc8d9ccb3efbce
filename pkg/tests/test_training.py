import numpy as np
import pytest

from facetgen import training
from facetgen.corpus import synthesize_corpus
from facetgen.model import ModelConfig, NumericError, init_parameters
from facetgen.text import build_vocabulary
from facetgen.training import TrainConfig, train


@pytest.fixture(scope="module")
def small():
    recs = synthesize_corpus(12, {2: 0.5, 3: 0.5}, vocab_size=20, seed=1)
    vocab = build_vocabulary(recs)
    return recs, vocab, ModelConfig(len(vocab), 8, 12, init_seed=2)


def test_zero_epochs_returns_init(small):
    recs, vocab, cfg = small
    params, log = train("seq-default", recs, vocab, cfg, TrainConfig(epochs=0))
    assert np.array_equal(params.flat(), init_parameters(cfg).flat())
    assert log.epochs == []


@pytest.mark.parametrize("objective", ["seq-default", "seq-min-perm", "seq-avg-perm", "set-pred", "seq-set-pred"])
def test_loss_decreases(small, objective):
    recs, vocab, cfg = small
    _, log = train(objective, recs, vocab, cfg, TrainConfig(epochs=15, batch_size=4, learning_rate=2e-2))
    assert log.losses[-1] < log.losses[0]


def test_bit_identical_reruns(small):
    recs, vocab, cfg = small
    tc = TrainConfig(epochs=3, batch_size=5)
    p1, l1 = train("seq-set-pred", recs, vocab, cfg, tc)
    p2, l2 = train("seq-set-pred", recs, vocab, cfg, tc)
    assert l1.epochs == l2.epochs
    assert np.array_equal(p1.flat(), p2.flat())


def test_divergence_raises(small, monkeypatch):
    recs, vocab, cfg = small

    def broken(params, objective, examples, grad=False):
        return float("nan"), {k: np.zeros_like(v) for k, v in params.weights.items()}

    monkeypatch.setattr(training, "objective_loss", broken)
    with pytest.raises(NumericError, match="diverged"):
        train("set-pred", recs, vocab, cfg, TrainConfig(epochs=1))


def test_vocab_mismatch(small):
    recs, vocab, _ = small
    with pytest.raises(ValueError):
        train("set-pred", recs, vocab, ModelConfig(len(vocab) + 1, 4, 4))


def test_epoch_rng_is_per_epoch():
    a = training.epoch_rng(0, 1).integers(1 << 30)
    assert a == training.epoch_rng(0, 1).integers(1 << 30)
    assert a != training.epoch_rng(0, 2).integers(1 << 30)
