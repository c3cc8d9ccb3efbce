import itertools
import logging
import math

import numpy as np
import pytest

from conftest import tiny_params
from facetgen import inference
from facetgen.corpus import make_record
from facetgen.inference import (
    beam_search,
    dedup,
    generate_joint,
    generate_seq_set,
    generate_set,
    read_predictions,
    split_joint,
    write_predictions,
)
from facetgen.model import ModelConfig, encode, init_parameters, step_logits
from facetgen.text import BOS_ID, EOS_ID, FACET_SEP_ID, PAD_ID, SEP_ID, Vocabulary


def _logp(params, context, seq):
    total = 0.0
    for k, tok in enumerate(seq):
        logits = step_logits(params, context, seq[:k])
        total += logits[tok] - np.logaddexp.reduce(logits)
    return total


def _exhaustive(params, context, alphabet, max_len):
    out = []
    for length in range(1, max_len + 1):
        for seq in itertools.product(alphabet, repeat=length):
            if EOS_ID in seq[:-1] or (seq[-1] != EOS_ID and length < max_len):
                continue
            tokens = seq if seq[-1] == EOS_ID else seq + (EOS_ID,)
            out.append((tokens, _logp(params, context, seq)))
    return sorted(out, key=lambda x: (-x[1], x[0]))


def test_two_token_vocab_exhaustive():
    # ids 0..2 exist, but only {1, EOS} are allowed: a 2-token alphabet
    params = tiny_params(0, vocab_size=3)
    c = encode(params, [0, 1])
    truth = _exhaustive(params, c, (1, EOS_ID), 2)
    got = beam_search(params, c, 4, 2, banned=[PAD_ID])
    assert [t for t, _ in got] == [t for t, _ in truth]
    assert np.allclose([s for _, s in got], [s for _, s in truth], rtol=0, atol=1e-12)


def test_width_one_is_greedy():
    params = tiny_params(1)
    c = encode(params, [6, 7])
    seq = []
    while len(seq) < 6:
        tok = int(np.argmax(step_logits(params, c, seq)))
        seq.append(tok)
        if tok == EOS_ID:
            break
    if seq[-1] != EOS_ID:
        seq.append(EOS_ID)
    (tokens, _), = beam_search(params, c, 1, 6)
    assert list(tokens) == seq


def test_hand_top_two():
    cfg = ModelConfig(3, 2, 2)
    weights = {k: np.zeros(v.shape) for k, v in init_parameters(cfg).weights.items()}
    weights["out_bias"] = np.log([0.5, 0.2, 0.3])
    params = init_parameters(cfg).replace(weights)
    got = beam_search(params, encode(params, [0]), 2, 3)
    assert [t for t, _ in got] == [(2,), (0, 2)]
    assert got[1][1] == pytest.approx(math.log(0.15), abs=1e-12)


def test_beam_output_invariants():
    params = tiny_params(2)
    got = beam_search(params, encode(params, [6, 8]), 5, 4)
    scores = [s for _, s in got]
    assert scores == sorted(scores, reverse=True)
    assert all(t[-1] == EOS_ID and t.count(EOS_ID) == 1 for t, _ in got)


def test_split_and_dedup():
    vocab = Vocabulary.from_tokens(["a", "b", "c"])
    a, b, c = 6, 7, 8
    assert split_joint([a, b, FACET_SEP_ID, c, EOS_ID], vocab) == ["a b", "c"]
    assert dedup(split_joint([a, FACET_SEP_ID, a, EOS_ID], vocab)) == ["a"]
    assert split_joint([FACET_SEP_ID, EOS_ID], vocab) == []
    assert dedup(["a", "a"]) == ["a"]
    assert dedup(["A", "a "]) == ["a"]
    assert dedup([]) == []


def _facet_record():
    return make_record("a", ["b", "c"], ["b c"])


def test_generate_set_bound_and_distinct():
    vocab = Vocabulary.from_tokens(["a", "b", "c", "d", "e"])
    params = tiny_params(3)
    out = generate_set(params, _facet_record(), vocab, z=3, beam_width=5, max_out=4)
    assert len(out) <= 3 and len(set(out)) == len(out) and all(out)


def test_generate_set_exhaustive_top2():
    vocab = Vocabulary.from_tokens(["a", "b"])
    params = tiny_params(4, vocab_size=8)
    rec = make_record("a", ["b"])
    c = encode(params, vocab.encode(["a"]))
    allowed = [t for t in range(8) if t not in (PAD_ID, BOS_ID, SEP_ID, FACET_SEP_ID)]
    texts = [inference.facet_text(t, vocab) for t, _ in _exhaustive(params, c, allowed, 2)]
    assert generate_set(params, rec, vocab, z=2, beam_width=64, max_out=2) == dedup(texts)[:2]


def test_generate_set_skips_duplicates(monkeypatch):
    monkeypatch.setattr(inference, "_single_facet_beams", lambda *a: ["x", "X ", "y", "z"])
    vocab = Vocabulary.from_tokens(["a", "b", "c"])
    params = tiny_params(5)
    assert generate_set(params, _facet_record(), vocab, z=2) == ["x", "y"]
    assert generate_set(params, _facet_record(), vocab, z=2, distinct=False) == ["x"]


def test_seq_set_count_one_equals_set_z1():
    vocab = Vocabulary.from_tokens(["a", "b", "c", "d", "e"])
    params = tiny_params(6)
    rec = _facet_record()
    assert generate_seq_set(params, rec, vocab, count=1, max_out=4) == generate_set(params, rec, vocab, z=1, max_out=4)


def test_seq_set_early_stop(monkeypatch, caplog):
    monkeypatch.setattr(inference, "_single_facet_beams", lambda *a: ["same"])
    vocab = Vocabulary.from_tokens(["a", "b", "c"])
    with caplog.at_level(logging.INFO, logger="facetgen.inference"):
        out = generate_seq_set(tiny_params(7), _facet_record(), vocab, count=3)
    assert out == ["same"]
    assert "early stop" in caplog.text


def test_generate_joint_deterministic():
    vocab = Vocabulary.from_tokens(["a", "b", "c", "d", "e"])
    params = tiny_params(8)
    a = generate_joint(params, _facet_record(), vocab, max_out=8)
    assert a == generate_joint(params, _facet_record(), vocab, max_out=8)
    assert len(set(a)) == len(a)


def test_predictions_roundtrip(tmp_path):
    rows = [("q1", ["a", "b"]), ("q2", [])]
    write_predictions(rows, tmp_path / "p.jsonl")
    assert read_predictions(tmp_path / "p.jsonl") == [("q1", ["a", "b"]), ("q2", [])]
    (tmp_path / "bad.jsonl").write_text('{"query": 1}\n')
    with pytest.raises(ValueError):
        read_predictions(tmp_path / "bad.jsonl")
