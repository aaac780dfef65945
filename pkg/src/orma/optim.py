"""Adam optimizer with bias correction, operating on named parameter groups."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError
from .tensor import Tensor


@dataclass
class AdamState:
    """Moment estimates and step counter for one parameter group.

    ``m`` and ``v`` mirror the parameter shapes; defaults follow the common
    beta1=0.9, beta2=0.999, eps=1e-8 convention.
    """

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ContractError(f"learning rate must be positive, got {self.lr}")


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState) -> AdamState:
    """Apply one bias-corrected Adam update in place.

    Parameters without an entry in ``grads`` are left untouched and their
    moments are not advanced. Returns the mutated state for convenience.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, param in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != param.data.shape:
            raise DimensionError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name!r} shape {param.data.shape}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(param.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        param.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state
