"""Policy networks: the noise predictor and the per-agent inverse dynamics.

The noise predictor is a desk-scale temporal encoder-decoder over
trajectory windows: three pooled dense down-blocks, an adaptive-attention
bridge coordinating the agents, and three up-blocks with skip
concatenation.  Conditioning (current joint state, scaled return,
timestep) and the diffusion step are embedded and injected into every
block; a learned null embedding replaces the conditioning for
classifier-free guidance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import nncore as nn
from ..kinematics import wrap_angle

__all__ = ["ModelConfig", "CondBatch", "sinusoidal_embedding", "NoisePredictor", "InverseDynamics"]

_TIME_EMBED_DIM = 16


@dataclass(frozen=True)
class ModelConfig:
    m_agents: int
    state_dim: int
    horizon: int
    hidden: int = 64
    cond_dim: int = 64
    attn_dk: int = 16
    attn_dv: int = 16
    # Standardization of the scaled return-to-go conditioning feature
    # (dataset statistics; reward magnitudes are large and skewed).
    rtg_loc: float = 0.0
    rtg_scale: float = 1.0

    def __post_init__(self):
        h = self.horizon
        for _ in range(3):
            if h % 2 != 0:
                raise ValueError(f"horizon {self.horizon} must be divisible by 8 for 3 pooling stages")
            h //= 2

    @property
    def joint_dim(self) -> int:
        return self.m_agents * self.state_dim


@dataclass
class CondBatch:
    """Conditioning inputs, one row per batch element (plain arrays)."""

    state: np.ndarray  # (B, joint_dim) normalized joint state
    rtg: np.ndarray  # (B,) return-to-go already divided by the return scale
    timestep: np.ndarray  # (B,) environment step index


def sinusoidal_embedding(values: np.ndarray, dim: int = _TIME_EMBED_DIM) -> np.ndarray:
    """Standard sin/cos positional features of a scalar series, (B, dim)."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))
    ang = values[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1).astype(np.float32)


def _init_linear(params: dict, rng: np.random.Generator, name: str, n_in: int, n_out: int) -> None:
    w = rng.standard_normal((n_in, n_out)) * math.sqrt(2.0 / n_in)
    params[f"{name}/w"] = nn.Tensor(w.astype(np.float32), requires=True)
    params[f"{name}/b"] = nn.Tensor(np.zeros(n_out, dtype=np.float32), requires=True)


def _linear(tape, params: dict, name: str, x: nn.Tensor) -> nn.Tensor:
    return nn.bias_add(tape, _matmul_any(tape, x, params[f"{name}/w"]), params[f"{name}/b"])


def _matmul_any(tape, x: nn.Tensor, w: nn.Tensor) -> nn.Tensor:
    if x.data.ndim == 2:
        return nn.matmul(tape, x, w)
    b, h, win = x.shape
    flat = nn.reshape(tape, x, (b * h, win))
    return nn.reshape(tape, nn.matmul(tape, flat, w), (b, h, w.shape[1]))


class NoisePredictor:
    """Trajectory-window noise prediction network."""

    def __init__(self, cfg: ModelConfig, params: dict[str, nn.Tensor]):
        self.cfg = cfg
        self.params = params

    @classmethod
    def init(cls, cfg: ModelConfig, rng: np.random.Generator) -> "NoisePredictor":
        p: dict[str, nn.Tensor] = {}
        d, w, c = cfg.joint_dim, cfg.hidden, cfg.cond_dim
        cond_in = d + 1 + _TIME_EMBED_DIM
        _init_linear(p, rng, "cond/l1", cond_in, c)
        p["cond/ln_gain"] = nn.Tensor(np.ones(c, dtype=np.float32), requires=True)
        p["cond/ln_bias"] = nn.Tensor(np.zeros(c, dtype=np.float32), requires=True)
        _init_linear(p, rng, "cond/l2", c, c)
        _init_linear(p, rng, "kemb/l1", _TIME_EMBED_DIM, c)
        _init_linear(p, rng, "kemb/l2", c, c)
        p["cond/null"] = nn.Tensor(
            (rng.standard_normal(c) * 0.02).astype(np.float32), requires=True
        )
        _init_linear(p, rng, "down1", d, w)
        _init_linear(p, rng, "down2", w, w)
        _init_linear(p, rng, "down3", w, w)
        for i in (1, 2, 3):
            _init_linear(p, rng, f"down{i}/emb", c, w)
            _init_linear(p, rng, f"up{i}/emb", c, w)
        for agent in range(cfg.m_agents):
            _init_linear(p, rng, f"attn/q{agent}", w, cfg.attn_dk)
        _init_linear(p, rng, "attn/k", w, cfg.attn_dk)
        _init_linear(p, rng, "attn/v", w, cfg.attn_dv)
        _init_linear(p, rng, "attn/out", cfg.m_agents * cfg.attn_dv, w)
        p["bridge/gain"] = nn.Tensor(np.ones(w, dtype=np.float32), requires=True)
        p["bridge/bias"] = nn.Tensor(np.zeros(w, dtype=np.float32), requires=True)
        _init_linear(p, rng, "up1", 2 * w, w)
        _init_linear(p, rng, "up2", 2 * w, w)
        _init_linear(p, rng, "up3", 2 * w, w)
        _init_linear(p, rng, "out", w, d)
        return cls(cfg, p)

    def _embed(
        self,
        tape,
        cond: CondBatch,
        k: np.ndarray,
        drop: np.ndarray | None,
    ) -> nn.Tensor:
        c = self.cfg.cond_dim
        b = cond.state.shape[0]
        rtg_feat = (cond.rtg.astype(np.float64) - self.cfg.rtg_loc) / self.cfg.rtg_scale
        cond_in = np.concatenate(
            [
                cond.state.astype(np.float32),
                rtg_feat.astype(np.float32).reshape(-1, 1),
                sinusoidal_embedding(cond.timestep),
            ],
            axis=1,
        )
        h = nn.relu(tape, _linear(tape, self.params, "cond/l1", nn.Tensor(cond_in)))
        h = nn.layer_norm(tape, h, self.params["cond/ln_gain"], self.params["cond/ln_bias"])
        cond_emb = _linear(tape, self.params, "cond/l2", h)
        # Tile the learned null row to (B, C) through a constant ones matmul
        # so its gradient accumulates across dropped rows.
        ones = nn.Tensor(np.ones((b, 1), dtype=np.float32))
        null_row = nn.reshape(tape, self.params["cond/null"], (1, c))
        null_emb = nn.matmul(tape, ones, null_row)
        if drop is not None and drop.any():
            keep = np.broadcast_to(~drop.reshape(-1, 1), (b, c))
            cond_emb = nn.where_mask(tape, keep, cond_emb, null_emb)
        kh = nn.relu(
            tape, _linear(tape, self.params, "kemb/l1", nn.Tensor(sinusoidal_embedding(k)))
        )
        k_emb = _linear(tape, self.params, "kemb/l2", kh)
        return nn.add(tape, cond_emb, k_emb)

    def _block(self, tape, name: str, x: nn.Tensor, emb: nn.Tensor) -> nn.Tensor:
        h = _linear(tape, self.params, name, x)
        mod = _linear(tape, self.params, f"{name}/emb", emb)
        return nn.relu(tape, nn.bias_add(tape, h, mod))

    def forward(
        self,
        tape,
        x: nn.Tensor,
        cond: CondBatch,
        k: np.ndarray,
        drop: np.ndarray | None = None,
    ) -> nn.Tensor:
        """Predict the injected noise for windows ``x`` at diffusion steps ``k``.

        ``drop`` marks batch rows whose conditioning is replaced by the
        learned null embedding (``None`` keeps every row conditioned; an
        all-True array runs the unconditioned branch).
        """
        cfg = self.cfg
        if x.shape != (cond.state.shape[0], cfg.horizon, cfg.joint_dim):
            raise nn.ShapeError(
                f"expected x of shape (B, {cfg.horizon}, {cfg.joint_dim}), got {x.shape}"
            )
        emb = self._embed(tape, cond, k, drop)
        h1 = self._block(tape, "down1", x, emb)
        h2 = self._block(tape, "down2", nn.mean_pool_half(tape, h1), emb)
        h3 = self._block(tape, "down3", nn.mean_pool_half(tape, h2), emb)
        bottom = nn.mean_pool_half(tape, h3)

        qs = [
            _matmul_any(tape, bottom, self.params[f"attn/q{i}/w"])
            for i in range(cfg.m_agents)
        ]
        keys = _matmul_any(tape, bottom, self.params["attn/k/w"])
        vals = _matmul_any(tape, bottom, self.params["attn/v/w"])
        att = nn.adaptive_attention(tape, qs, keys, vals)
        att = _linear(tape, self.params, "attn/out", att)
        bridged = nn.layer_norm(
            tape,
            nn.add(tape, bottom, att),
            self.params["bridge/gain"],
            self.params["bridge/bias"],
        )

        u = nn.concat(tape, [nn.repeat_double(tape, bridged), h3])
        u = self._block(tape, "up1", u, emb)
        u = nn.concat(tape, [nn.repeat_double(tape, u), h2])
        u = self._block(tape, "up2", u, emb)
        u = nn.concat(tape, [nn.repeat_double(tape, u), h1])
        u = self._block(tape, "up3", u, emb)
        return _linear(tape, self.params, "out", u)


class InverseDynamics:
    """Per-agent MLPs mapping (s_t, s_{t+1}) to the (heading, speed) action."""

    def __init__(self, m_agents: int, state_dim: int, params: dict[str, nn.Tensor], hidden: int = 64):
        self.m_agents = m_agents
        self.state_dim = state_dim
        self.hidden = hidden
        self.params = params

    @classmethod
    def init(
        cls, m_agents: int, state_dim: int, rng: np.random.Generator, hidden: int = 64
    ) -> "InverseDynamics":
        p: dict[str, nn.Tensor] = {}
        for i in range(m_agents):
            _init_linear(p, rng, f"inv{i}/l1", 2 * state_dim, hidden)
            _init_linear(p, rng, f"inv{i}/l2", hidden, hidden)
            _init_linear(p, rng, f"inv{i}/l3", hidden, 2)
        return cls(m_agents, state_dim, p, hidden)

    def forward(self, tape, agent: int, pairs: nn.Tensor) -> nn.Tensor:
        """Raw (theta, v) prediction for stacked state pairs (N, 2*state_dim)."""
        h = nn.relu(tape, _linear(tape, self.params, f"inv{agent}/l1", pairs))
        h = nn.relu(tape, _linear(tape, self.params, f"inv{agent}/l2", h))
        return _linear(tape, self.params, f"inv{agent}/l3", h)

    def predict(self, agent: int, s_t: np.ndarray, s_next: np.ndarray, v_max: float) -> tuple[float, float]:
        """Action for one transition, clipped to the physical action set."""
        pair = np.concatenate([s_t, s_next]).astype(np.float32).reshape(1, -1)
        raw = self.forward(None, agent, nn.Tensor(pair)).data[0]
        theta = wrap_angle(float(raw[0]))
        v = min(max(float(raw[1]), 0.0), v_max)
        return theta, v
