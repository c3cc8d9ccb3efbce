"""Adam with decoupled weight decay over :class:`~facetgen.model.Parameters`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Parameters, _frozen


@dataclass(frozen=True)
class AdamW:
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


@dataclass(frozen=True, eq=False)
class OptimizerState:
    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Parameters) -> "OptimizerState":
        zeros = {k: np.zeros_like(v) for k, v in params.weights.items()}
        return cls(zeros, {k: v.copy() for k, v in zeros.items()}, 0)


def apply_update(params: Parameters, grads, state: OptimizerState, hyper: AdamW):
    """One bias-corrected AdamW step; returns new parameters and state."""
    step = state.step + 1
    b1, b2 = hyper.beta1, hyper.beta2
    c1 = 1.0 - b1 ** step
    c2 = 1.0 - b2 ** step
    decay = 1.0 - hyper.learning_rate * hyper.weight_decay
    new_w, new_m, new_v = {}, {}, {}
    for name, w in params.weights.items():
        g = grads[name]
        m = b1 * state.first_moment[name] + (1.0 - b1) * g
        v = b2 * state.second_moment[name] + (1.0 - b2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + hyper.eps)
        new_w[name] = _frozen(w * decay - hyper.learning_rate * update)
        new_m[name], new_v[name] = m, v
    return params.replace(new_w), OptimizerState(new_m, new_v, step)
