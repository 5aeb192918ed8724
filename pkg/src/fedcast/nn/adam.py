"""Adam optimizer on flat parameter vectors.

Moment estimates live alongside the step counter in an immutable record;
stepping returns a fresh record.  A client that adopts externally supplied
parameters (a freshly aggregated global model, a cluster model, or a
fine-tuning base) must start from `AdamState.fresh` so stale moments from a
different trajectory never leak in.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ValidationError
from .lstm import ForecastModel, flatten, unflatten


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.first_moment.shape != self.second_moment.shape:
            raise ValidationError("moment vectors must have equal shape")
        if self.step_count < 0:
            raise ValidationError("step_count must be non-negative")
        if not (0.0 < self.learning_rate and 0.0 <= self.beta1 < 1.0
                and 0.0 <= self.beta2 < 1.0 and self.epsilon > 0.0):
            raise ValidationError("optimizer hyperparameters out of range")

    @classmethod
    def fresh(cls, n_params: int, learning_rate: float = 0.001) -> "AdamState":
        zeros = np.zeros(n_params, dtype=np.float64)
        return cls(zeros, zeros.copy(), 0, learning_rate)


def adam_update(values: np.ndarray, grad: np.ndarray, state: AdamState):
    """One bias-corrected Adam step on a flat vector.

    Returns (new_values, new_state).  With zero gradient and zero moments the
    update is exactly the identity; with zero gradient but stale moments the
    parameters still move, which is intended.
    """
    values = np.asarray(values, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if values.shape != grad.shape or values.shape != state.first_moment.shape:
        raise ValidationError("parameter, gradient, and moment lengths must agree")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * (grad * grad)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_values = values - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_values, replace(state, first_moment=m, second_moment=v, step_count=t)


def adam_step(model: ForecastModel, grad: np.ndarray, state: AdamState):
    """Adam step expressed on a structured model; returns (model, state)."""
    flat = flatten(model)
    new_flat, new_state = adam_update(flat, grad, state)
    return unflatten(new_flat, model.feature_dim, model.hidden), new_state
