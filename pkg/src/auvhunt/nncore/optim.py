"""Adam with the standard bias-corrected update.

Moments live in a state object keyed by parameter name; updates are
applied in sorted-name order so a training step is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Tensor

__all__ = ["AdamState", "adam_step"]


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, Tensor],
    grads: dict[Tensor, np.ndarray],
    state: AdamState,
) -> None:
    """One in-place Adam update over all parameters.

    Parameters missing from ``grads`` are treated as zero-gradient: their
    values stay put while the moment bookkeeping still advances.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name in sorted(params):
        p = params[name]
        g = grads.get(p)
        if g is None:
            g = np.zeros_like(p.data)
        if p.data.shape != np.shape(g):
            raise ValueError(f"gradient shape {np.shape(g)} != param {name} shape {p.data.shape}")
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
