"""
Adam optimizer with bias correction.

adam_step is functional: it returns new parameter arrays and a new state and
never mutates its inputs.
"""

from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import ArgumentError

DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True, eq=False)
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = DEFAULT_EPSILON
    t: int = 0
    m: Tuple[np.ndarray, ...] = field(default=(), repr=False)
    v: Tuple[np.ndarray, ...] = field(default=(), repr=False)


def adam_init(params: Sequence[np.ndarray], lr: float = 1e-4, beta1: float = 0.5,
              beta2: float = 0.999, epsilon: float = DEFAULT_EPSILON) -> AdamState:
    zeros = tuple(np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params)
    return AdamState(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon, t=0, m=zeros,
                     v=tuple(z.copy() for z in zeros))


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: AdamState) -> Tuple[List[np.ndarray], AdamState]:
    """
    One Adam update.

    Args:
        params: Current parameters
        grads: Gradients, same shapes as params
        state: Moments and step counter (moment shapes must mirror params)

    Returns:
        (updated parameters, updated state)
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ArgumentError(
            f"Adam expects matching counts: {len(params)} params, {len(grads)} grads, {len(state.m)} moments"
        )

    t = state.t + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape or p.shape != m.shape:
            raise ArgumentError(f"Adam shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        new_params.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon))
        new_m.append(m)
        new_v.append(v)

    return new_params, replace(state, t=t, m=tuple(new_m), v=tuple(new_v))
