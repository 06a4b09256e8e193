"""Guided reverse diffusion over trajectory windows.

Classifier-free guidance mixes the conditional and null-conditioned noise
predictions; the window's first joint state is clamped to the observed
current state at every reverse step (inpainting), and the final reverse
step adds no noise.
"""

from __future__ import annotations

import numpy as np

from .. import nncore as nn
from .model import CondBatch, NoisePredictor
from .schedule import DiffusionSchedule

__all__ = ["guided_noise", "p_sample_loop"]


def guided_noise(
    predictor: NoisePredictor,
    x: np.ndarray,
    cond: CondBatch,
    k: np.ndarray,
    guidance_weight: float,
) -> np.ndarray:
    """Classifier-free-guided noise prediction.

    ``eps_hat = eps_null + w * (eps_cond - eps_null)``; at w = 1 the
    conditional prediction is returned as-is, bit for bit.
    """
    xt = nn.Tensor(x)
    eps_cond = predictor.forward(None, xt, cond, k, drop=None).data
    if guidance_weight == 1.0:
        return eps_cond
    drop_all = np.ones(x.shape[0], dtype=bool)
    eps_null = predictor.forward(None, xt, cond, k, drop=drop_all).data
    w = np.float32(guidance_weight)
    return eps_null + w * (eps_cond - eps_null)


def p_sample_loop(
    predictor: NoisePredictor,
    cond: CondBatch,
    schedule: DiffusionSchedule,
    guidance_weight: float,
    rng: np.random.Generator,
    clamp_state: np.ndarray | None = None,
) -> np.ndarray:
    """Sample trajectory windows (B, H, joint_dim) by reverse diffusion.

    ``clamp_state`` (default: the conditioning state) overwrites the first
    window row before and after every reverse step.
    """
    b = cond.state.shape[0]
    h, d = predictor.cfg.horizon, predictor.cfg.joint_dim
    clamp = (cond.state if clamp_state is None else clamp_state).astype(np.float32)
    x = rng.standard_normal((b, h, d)).astype(np.float32)
    x[:, 0, :] = clamp
    for k in range(schedule.k_steps, 0, -1):
        kv = np.full(b, k, dtype=np.int64)
        eps_hat = guided_noise(predictor, x, cond, kv, guidance_weight)
        c_eps = np.float32(schedule.beta[k - 1] / np.sqrt(1.0 - schedule.alpha_bar[k - 1]))
        c_mu = np.float32(1.0 / np.sqrt(schedule.alpha[k - 1]))
        x = c_mu * (x - c_eps * eps_hat)
        if k > 1:
            sd = np.float32(np.sqrt(schedule.sigma2[k - 1]))
            x = x + sd * rng.standard_normal((b, h, d)).astype(np.float32)
        x[:, 0, :] = clamp
    return x
