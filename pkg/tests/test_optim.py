import math

import numpy as np
import pytest

from facetgen.model import ModelConfig, init_parameters
from facetgen.optim import AdamW, OptimizerState, apply_update


def _params():
    return init_parameters(ModelConfig(5, 2, 3, init_seed=1))


def test_zero_gradient_no_decay_keeps_weights():
    p = _params()
    zeros = {k: np.zeros_like(v) for k, v in p.weights.items()}
    q, state = apply_update(p, zeros, OptimizerState.zeros_like(p), AdamW())
    assert all(np.array_equal(p[k], q[k]) for k in p.weights)
    assert state.step == 1


def test_decoupled_decay_factor():
    p = _params()
    zeros = {k: np.zeros_like(v) for k, v in p.weights.items()}
    hyper = AdamW(learning_rate=0.1, weight_decay=0.5)
    q, _ = apply_update(p, zeros, OptimizerState.zeros_like(p), hyper)
    assert np.allclose(q["embedding"], p["embedding"] * (1 - 0.1 * 0.5), rtol=0, atol=1e-15)


def test_hand_adam_steps():
    # minimize f(w) = w^2 from w = 1 on a single coordinate
    p = _params()
    hyper = AdamW(learning_rate=0.1)
    state = OptimizerState.zeros_like(p)
    m = v = 0.0
    w = p["embedding"][0, 0]
    for t in (1, 2):
        g = 2 * w
        grads = {k: np.zeros_like(a) for k, a in p.weights.items()}
        grads["embedding"][0, 0] = g
        p, state = apply_update(p, grads, state, hyper)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w = w - 0.1 * (m / (1 - 0.9 ** t)) / (math.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        assert p["embedding"][0, 0] == pytest.approx(w, abs=1e-15)


def test_first_step_moves_by_learning_rate():
    p = _params()
    grads = {k: np.full_like(a, 3.0) for k, a in p.weights.items()}
    q, _ = apply_update(p, grads, OptimizerState.zeros_like(p), AdamW(learning_rate=0.05))
    assert np.allclose(p["out_weight"] - q["out_weight"], 0.05, rtol=0, atol=1e-9)
