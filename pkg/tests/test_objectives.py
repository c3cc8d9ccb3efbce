import itertools
import math

import numpy as np
import pytest

from conftest import random_record, tiny_params, tiny_vocab
from facetgen.corpus import make_record
from facetgen.model import ModelConfig, Parameters, forward, init_parameters
from facetgen.objectives import (
    loss_seq_avg_perm,
    loss_seq_default,
    loss_seq_min_perm,
    loss_seq_set_pred,
    loss_set_pred,
    objective_loss,
    per_permutation_losses,
    reduce_group,
)
from facetgen.permute import SamplingPlan, build_examples

ALL = [loss_seq_default, loss_seq_min_perm, loss_seq_avg_perm, loss_set_pred, loss_seq_set_pred]


def uniform_params(vocab_size=11):
    cfg = ModelConfig(vocab_size, 4, 5)
    return Parameters(cfg, {k: np.zeros(v.shape) for k, v in init_parameters(cfg).weights.items()})


@pytest.mark.parametrize("fn", ALL)
def test_uniform_model_gives_log_vocab(fn):
    rec = make_record("a", ["b c", "d", "e"])
    assert fn(uniform_params(), rec, tiny_vocab()) == pytest.approx(math.log(11), abs=1e-12)


def test_uniform_min_picks_first():
    _, coefs = reduce_group("seq-min-perm", np.full(6, math.log(11)), np.ones(6))
    assert coefs.tolist() == [1, 0, 0, 0, 0, 0]


def test_hand_reductions():
    assert reduce_group("seq-avg-perm", np.array([1.0, 3.0]), np.array([0.5, 0.5]))[0] == 2.0
    assert reduce_group("set-pred", np.array([0.5, 1.5]), np.array([0.5, 0.5]))[0] == 1.0
    loss, coefs = reduce_group("seq-min-perm", np.array([2.0, 0.5, 0.7]), np.ones(3))
    assert loss == 0.5 and coefs.tolist() == [0, 1, 0]


def test_single_facet_degeneracies():
    vocab, params = tiny_vocab(), tiny_params(0)
    rec = make_record("a", ["b c"], ["d e"])
    ref = loss_set_pred(params, rec, vocab)
    assert loss_seq_default(params, rec, vocab) == ref
    assert loss_seq_set_pred(params, rec, vocab) == ref
    assert loss_seq_min_perm(params, rec, vocab) == ref


def test_seq_default_order_sensitive():
    vocab, params = tiny_vocab(), tiny_params(1)
    rec = make_record("a", ["b", "c d"])
    assert loss_seq_default(params, rec, vocab) != loss_seq_default(params, rec.with_facets(["c d", "b"]), vocab)


def test_seq_set_m2_is_mean_of_four():
    vocab, params = tiny_vocab(), tiny_params(2)
    rec = make_record("a", ["b", "c d"])
    exs = build_examples("seq-set-pred", rec, SamplingPlan.full_enumeration("seq-set-pred"), vocab)
    assert len(exs) == 4
    nll = forward(params, [e.input for e in exs], [e.target for e in exs]).nll
    assert loss_seq_set_pred(params, rec, vocab) == pytest.approx(nll.mean(), abs=1e-15)


def test_set_pred_bitwise_invariant():
    vocab, params = tiny_vocab(), tiny_params(3)
    rec = make_record("a", ["b", "c d", "e"])
    vals = {loss_set_pred(params, rec.with_facets(p), vocab) for p in itertools.permutations(rec.facets)}
    assert len(vals) == 1


def test_avg_perm_gradient_invariant():
    vocab, params = tiny_vocab(), tiny_params(4)
    rec = make_record("a", ["b", "c d", "e"])
    _, g0 = loss_seq_avg_perm(params, rec, vocab, grad=True)
    _, g1 = loss_seq_avg_perm(params, rec.with_facets(["e", "b", "c d"]), vocab, grad=True)
    for k in g0:
        assert np.allclose(g0[k], g1[k], rtol=0, atol=1e-9)


def test_min_below_avg_on_subset():
    rng = np.random.default_rng(0)
    vocab = tiny_vocab()
    for i in range(10):
        rec = random_record(rng, 3)
        params = tiny_params(100 + i)
        perms = [(0, 1, 2), (2, 1, 0), (1, 0, 2)]
        lo = loss_seq_min_perm(params, rec, vocab, perms=perms)
        mid = loss_seq_avg_perm(params, rec, vocab, perms=perms)
        assert lo <= mid
        assert lo == min(per_permutation_losses(params, rec, vocab, perms))


def test_bad_perms_rejected():
    vocab, params = tiny_vocab(), tiny_params(5)
    rec = make_record("a", ["b", "c"])
    with pytest.raises(ValueError):
        loss_seq_min_perm(params, rec, vocab, perms=[(0, 0)])
    with pytest.raises(ValueError):
        loss_seq_min_perm(params, rec, vocab, perms=[])


def test_batch_loss_is_mean_over_queries():
    vocab, params = tiny_vocab(), tiny_params(6)
    recs = [make_record("a", ["b", "c"]), make_record("d", ["e", "b c", "a"])]
    plan = SamplingPlan.full_enumeration("seq-set-pred")
    exs = [e for i, r in enumerate(recs) for e in build_examples("seq-set-pred", r, plan, vocab, group_key=i)]
    expect = np.mean([loss_seq_set_pred(params, r, vocab) for r in recs])
    assert objective_loss(params, "seq-set-pred", exs) == pytest.approx(expect, abs=1e-15)


def test_empty_examples():
    with pytest.raises(ValueError):
        objective_loss(tiny_params(0), "set-pred", [])
