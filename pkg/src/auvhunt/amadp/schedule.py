"""DDPM variance schedule and the closed-form forward process.

Diffusion steps are 1-indexed (k = 1..K); array index k-1 holds step k.
The posterior variance at k = 1 is exactly zero (the alpha_bar[0] = 1
convention), so the final reverse step adds no noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DiffusionSchedule", "make_schedule", "q_sample"]


@dataclass(frozen=True)
class DiffusionSchedule:
    beta: np.ndarray  # (K,) per-step variances
    alpha: np.ndarray  # 1 - beta
    alpha_bar: np.ndarray  # cumulative products, strictly decreasing
    sigma2: np.ndarray  # posterior variances; sigma2[0] == 0

    @property
    def k_steps(self) -> int:
        return len(self.beta)


def make_schedule(
    k_steps: int,
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
    betas: np.ndarray | None = None,
) -> DiffusionSchedule:
    """Linear beta schedule (or an explicit override) with derived arrays."""
    if k_steps < 1:
        raise ValueError("need at least one diffusion step")
    if betas is None:
        beta = np.linspace(beta_start, beta_end, k_steps, dtype=np.float64)
    else:
        beta = np.asarray(betas, dtype=np.float64)
        if beta.shape != (k_steps,):
            raise ValueError(f"betas must have shape ({k_steps},), got {beta.shape}")
    if np.any(beta <= 0) or np.any(beta >= 1):
        raise ValueError("betas must lie strictly inside (0, 1)")
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    prev = np.concatenate([[1.0], alpha_bar[:-1]])
    sigma2 = beta * (1.0 - prev) / (1.0 - alpha_bar)
    return DiffusionSchedule(beta=beta, alpha=alpha, alpha_bar=alpha_bar, sigma2=sigma2)


def q_sample(
    x0: np.ndarray,
    k: int | np.ndarray,
    noise: np.ndarray,
    schedule: DiffusionSchedule,
) -> np.ndarray:
    """Forward-noise x0 to diffusion step k in closed form.

    ``sqrt(alpha_bar_k) * x0 + sqrt(1 - alpha_bar_k) * noise``; ``k`` may
    be a scalar or one step index per leading-batch element.
    """
    k_arr = np.asarray(k)
    if np.any(k_arr < 1) or np.any(k_arr > schedule.k_steps):
        raise ValueError(f"k must lie in [1, {schedule.k_steps}]")
    ab = schedule.alpha_bar[k_arr - 1]
    if k_arr.ndim > 0:
        extra = x0.ndim - 1
        ab = ab.reshape(ab.shape + (1,) * extra)
    ab = ab.astype(x0.dtype, copy=False)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise
