import math

import numpy as np
import pytest

from conftest import tiny_params
from facetgen.model import (
    ModelConfig,
    NumericError,
    Parameters,
    backward,
    encode,
    forward,
    init_parameters,
    load_checkpoint,
    nll_gradient,
    save_checkpoint,
    sequence_nll,
    step_logits,
)
from facetgen.text import EOS_ID


def zero_params(vocab_size=7, e=3, h=4):
    cfg = ModelConfig(vocab_size, e, h)
    return Parameters(cfg, {k: np.zeros(v.shape) for k, v in init_parameters(cfg).weights.items()})


def fixed_logit_params(logits):
    p = zero_params(len(logits))
    return p.replace({**p.weights, "out_bias": np.asarray(logits, dtype=np.float64)})


def test_init_deterministic_and_seeded():
    cfg = ModelConfig(11, 4, 5, init_seed=3)
    a, b = init_parameters(cfg), init_parameters(cfg)
    assert np.array_equal(a.flat(), b.flat())
    c = init_parameters(ModelConfig(11, 4, 5, init_seed=4))
    assert not np.array_equal(a.flat(), c.flat())


def test_init_mean_within_three_standard_errors():
    params = init_parameters(ModelConfig(100, 100, 8))
    block = params["embedding"].ravel()
    assert block.size == 10_000
    bound = 1 / math.sqrt(100)
    se = (bound / math.sqrt(3)) / math.sqrt(block.size)
    assert abs(block.mean()) < 3 * se


def test_parameters_are_read_only():
    params = init_parameters(ModelConfig(5, 2, 2))
    with pytest.raises(ValueError):
        params["embedding"][0, 0] = 1.0


def test_encoder_mean_pooling():
    params = tiny_params(0)
    assert np.allclose(encode(params, [6, 7, 8]), encode(params, [8, 6, 7]), rtol=0, atol=1e-15)
    assert not np.allclose(encode(params, [6, 7]), encode(params, [9, 10]))
    with pytest.raises(ValueError, match="empty input"):
        encode(params, [])
    small = init_parameters(ModelConfig(11, 4, 5, max_input_tokens=3))
    with pytest.raises(ValueError, match="input too long"):
        encode(small, [6, 7, 8, 9])


def test_uniform_model_nll():
    p = zero_params(7)
    c = encode(p, [3])
    assert sequence_nll(p, c, [4, 5, EOS_ID]) == pytest.approx(math.log(7), abs=1e-15)
    assert sequence_nll(p, c, [EOS_ID]) == pytest.approx(math.log(7), abs=1e-15)


def test_fixed_logit_nll_by_hand():
    p = fixed_logit_params([math.log(0.5), math.log(0.2), math.log(0.3)])
    c = encode(p, [0])
    # -(log .5 + log .3) / 2
    assert sequence_nll(p, c, [0, 2]) == pytest.approx(-(math.log(0.5) + math.log(0.3)) / 2, abs=1e-12)
    assert int(np.argmax(step_logits(p, c, []))) == 0


def test_nll_matches_step_logits_chain():
    p = tiny_params(1)
    c = encode(p, [6, 7, 8])
    target = [6, 9, 4, 10, EOS_ID]
    total = 0.0
    for k, tok in enumerate(target):
        logits = step_logits(p, c, target[:k])
        total -= logits[tok] - np.logaddexp.reduce(logits)
    assert sequence_nll(p, c, target) == pytest.approx(total / len(target), abs=1e-12)


def test_softmax_rows_sum_to_one():
    p = tiny_params(2)
    c = encode(p, [6, 7])
    for prefix in ([], [6], [6, 7, 8]):
        logits = step_logits(p, c, prefix)
        probs = np.exp(logits - np.logaddexp.reduce(logits))
        assert abs(probs.sum() - 1.0) < 1e-12


def test_nll_nonnegative():
    rng = np.random.default_rng(0)
    p = tiny_params(3)
    for _ in range(20):
        x = list(rng.integers(3, 11, size=3))
        y = list(rng.integers(3, 11, size=int(rng.integers(0, 4)))) + [EOS_ID]
        assert forward(p, [x], [y]).nll[0] >= 0


def test_single_example_gradient_fd():
    p = tiny_params(4)
    batch = [((6, 7, 8), (9, 4, 10, EOS_ID), 1.0)]
    _, grads = nll_gradient(p, batch)
    step, worst = 1e-5, 0.0
    for name, arr in p.weights.items():
        for idx in np.ndindex(arr.shape):
            up, down = arr.copy(), arr.copy()
            up[idx] += step
            down[idx] -= step
            lp = nll_gradient(p.replace({**p.weights, name: up}), batch)[0]
            lm = nll_gradient(p.replace({**p.weights, name: down}), batch)[0]
            num = (lp - lm) / (2 * step)
            worst = max(worst, abs(grads[name][idx] - num) / max(abs(grads[name][idx]), abs(num), 1e-6))
    assert worst <= 1e-4


def test_gradient_linear_in_weights():
    p = tiny_params(5)
    batch = [((6, 7), (8, EOS_ID), 0.3), ((9,), (10, 4, 6, EOS_ID), 0.7)]
    _, g1 = nll_gradient(p, batch, normalize=False)
    _, g2 = nll_gradient(p, [(x, y, 2 * w) for x, y, w in batch], normalize=False)
    for k in g1:
        assert np.array_equal(2 * g1[k], g2[k])


def test_rejects_nonpositive_weights():
    p = tiny_params(6)
    with pytest.raises(ValueError):
        nll_gradient(p, [((6,), (EOS_ID,), 0.0)])


def test_batched_backward_matches_single():
    p = tiny_params(7)
    xs, ys = [(6, 7), (8, 9, 10)], [(6, EOS_ID), (7, 4, 8, EOS_ID)]
    cache = forward(p, xs, ys)
    both = backward(p, cache, np.array([0.25, 0.75]))
    one = backward(p, forward(p, xs[:1], ys[:1]), np.array([0.25]))
    two = backward(p, forward(p, xs[1:], ys[1:]), np.array([0.75]))
    for k in both:
        assert np.allclose(both[k], one[k] + two[k], rtol=0, atol=1e-13)


def test_overflow_raises():
    p = tiny_params(8)
    huge = p.replace({**p.weights, "out_bias": np.full(11, np.inf)})
    with pytest.raises(NumericError, match="numeric overflow"):
        forward(huge, [(6,)], [(EOS_ID,)])


def test_target_too_long():
    p = init_parameters(ModelConfig(11, 4, 5, max_output_tokens=3))
    with pytest.raises(ValueError):
        forward(p, [(6,)], [(6, 7, 8, EOS_ID)])


def test_checkpoint_roundtrip(tmp_path):
    p = tiny_params(9)
    save_checkpoint(tmp_path / "m.ckpt", p, {"note": "x"})
    q, meta = load_checkpoint(tmp_path / "m.ckpt")
    assert meta == {"note": "x"} and q.config == p.config
    for k in p.weights:
        assert np.array_equal(p[k], q[k])


def test_checkpoint_bad_magic(tmp_path):
    (tmp_path / "x").write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "x")
