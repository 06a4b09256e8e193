"""Joint training of the noise predictor and the inverse dynamics models.

The loss is the sum of the per-agent inverse-dynamics regression term and
the conditioned denoising term with classifier-free conditioning dropout,
minimized by one Adam optimizer.  Every stochastic choice in step ``s`` is
drawn from a generator derived from ``(seed, "train", s)``, so training is
bit-reproducible and resumable from any checkpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import nncore as nn
from ..dataset import Batch, OfflineDataset, window_batch
from ..seeds import derive_rng
from .bundle import PolicyBundle
from .model import CondBatch, InverseDynamics, ModelConfig, NoisePredictor
from .schedule import DiffusionSchedule, make_schedule, q_sample

__all__ = ["TrainConfig", "TrainResult", "ddpm_loss", "inverse_dynamics_loss", "train"]

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 20000
    batch_size: int = 32
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    k_steps: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.02
    dropout_prob: float = 0.25
    guidance_weight: float = 1.2
    hidden: int = 64
    cond_dim: int = 64
    attn_dk: int = 16
    attn_dv: int = 16
    inv_hidden: int = 64
    checkpoint_every: int = 1000

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be positive")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must be in [0, 1]")
        if self.guidance_weight < 0:
            raise ValueError("guidance weight must be non-negative")


@dataclass
class TrainResult:
    bundle: PolicyBundle
    loss_rows: list[tuple[int, float, float, float]] = field(default_factory=list)
    checkpoint_paths: list[Path] = field(default_factory=list)


def ddpm_loss(
    tape: nn.Tape,
    predictor: NoisePredictor,
    batch: Batch,
    schedule: DiffusionSchedule,
    dropout_prob: float,
    rng: np.random.Generator,
) -> nn.Tensor:
    """Masked noise-prediction MSE with per-sample conditioning dropout.

    Padded window rows are replaced by zeros before noising and excluded
    from the loss by selection (never by multiplication), so poisoned
    padding cannot reach the objective.
    """
    b, h, d = batch.tau.shape
    mask3 = np.broadcast_to(batch.mask.astype(bool)[:, :, None], (b, h, d))
    x0 = np.where(mask3, batch.tau, np.float32(0.0))
    k = rng.integers(1, schedule.k_steps + 1, size=b)
    eps = rng.standard_normal((b, h, d)).astype(np.float32)
    x_k = q_sample(x0, k, eps, schedule)
    drop = rng.random(b) < dropout_prob
    cond = CondBatch(batch.cond_state, batch.cond_rtg, batch.cond_timestep)
    pred = predictor.forward(tape, nn.Tensor(x_k), cond, k, drop)
    diff = nn.sub(tape, pred, nn.Tensor(eps))
    sq = nn.mul(tape, diff, diff)
    sel = nn.where_mask(tape, mask3, sq, nn.Tensor(np.zeros_like(sq.data)))
    n = float(mask3.sum())
    return nn.scale(tape, nn.sum_all(tape, sel), 1.0 / n)


def inverse_dynamics_loss(tape: nn.Tape, inv: InverseDynamics, batch: Batch) -> nn.Tensor:
    """Mean squared action error over all real consecutive pairs.

    The heading component is compared on the circle: targets are shifted
    by the 2*pi multiple nearest the current prediction (a constant per
    step), which equals the wrapped angular difference without
    introducing a seam at +/-pi.
    """
    b, h, _ = batch.tau.shape
    m, d = inv.m_agents, inv.state_dim
    tau4 = batch.tau.reshape(b, h, m, d)
    valid = (batch.mask[:, :-1] > 0) & (batch.mask[:, 1:] > 0)
    ib, it = np.nonzero(valid)
    if ib.size == 0:
        return nn.Tensor(np.zeros((), dtype=np.float32))
    total: nn.Tensor | None = None
    for agent in range(m):
        pairs = np.concatenate([tau4[ib, it, agent], tau4[ib, it + 1, agent]], axis=1)
        pred = inv.forward(tape, agent, nn.Tensor(pairs))
        tgt = batch.actions[ib, it, agent].copy()
        offset = _TWO_PI * np.round((pred.data[:, 0] - tgt[:, 0]) / _TWO_PI)
        tgt[:, 0] += offset.astype(np.float32)
        diff = nn.sub(tape, pred, nn.Tensor(tgt))
        sq = nn.mul(tape, diff, diff)
        term = nn.scale(tape, nn.sum_all(tape, sq), 1.0 / ib.size)
        total = term if total is None else nn.add(tape, total, term)
    return total


def train(
    dataset: OfflineDataset,
    cfg: TrainConfig,
    seed: int,
    out_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> TrainResult:
    """Minimize the joint loss by Adam; emits periodic checkpoints and a
    loss curve when ``out_dir`` is given."""
    man = dataset.manifest
    model_cfg = ModelConfig(
        m_agents=man.m,
        state_dim=man.state_dim,
        horizon=man.h,
        hidden=cfg.hidden,
        cond_dim=cfg.cond_dim,
        attn_dk=cfg.attn_dk,
        attn_dv=cfg.attn_dv,
        rtg_loc=man.rtg_loc,
        rtg_scale=man.rtg_scale,
    )
    schedule = make_schedule(cfg.k_steps, cfg.beta_start, cfg.beta_end)

    if resume_from is not None:
        bundle = PolicyBundle.load(resume_from)
        if bundle.model_cfg != model_cfg:
            raise ValueError("checkpoint model configuration does not match the dataset/config")
        opt = bundle.adam
        start_step = bundle.step
    else:
        init_rng = derive_rng(seed, "init")
        predictor = NoisePredictor.init(model_cfg, init_rng)
        inv = InverseDynamics.init(man.m, man.state_dim, init_rng, hidden=cfg.inv_hidden)
        opt = nn.AdamState(
            lr=cfg.lr, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps
        )
        bundle = PolicyBundle(
            predictor=predictor,
            inv=inv,
            model_cfg=model_cfg,
            schedule=schedule,
            guidance_weight=cfg.guidance_weight,
            state_mean=man.state_mean.copy(),
            state_std=man.state_std.copy(),
            return_scale=man.return_scale,
            return_p90=man.return_p90,
            adam=opt,
            step=0,
        )
        start_step = 0

    params: dict[str, nn.Tensor] = {}
    params.update({f"model/{k}": v for k, v in bundle.predictor.params.items()})
    params.update({f"inv/{k}": v for k, v in bundle.inv.params.items()})

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    result = TrainResult(bundle=bundle)
    for s in range(start_step, cfg.steps):
        rng = derive_rng(seed, "train", s)
        batch = window_batch(dataset, cfg.batch_size, man.h, rng)
        tape = nn.Tape()
        inv_term = inverse_dynamics_loss(tape, bundle.inv, batch)
        dd_term = ddpm_loss(tape, bundle.predictor, batch, schedule, cfg.dropout_prob, rng)
        total = nn.add(tape, inv_term, dd_term)
        grads = nn.backward(tape, total)
        nn.adam_step(params, grads, opt)
        bundle.step = s + 1
        result.loss_rows.append(
            (s + 1, float(total.data), float(inv_term.data), float(dd_term.data))
        )
        if out_path is not None and (s + 1) % cfg.checkpoint_every == 0:
            p = out_path / f"ckpt_{s + 1:06d}.bin"
            bundle.save(p)
            result.checkpoint_paths.append(p)

    if out_path is not None:
        final = out_path / "ckpt_final.bin"
        bundle.save(final)
        result.checkpoint_paths.append(final)
        with open(out_path / "loss.csv", "w", encoding="utf-8") as fh:
            fh.write("step,total,inverse,ddpm\n")
            for row in result.loss_rows:
                fh.write(f"{row[0]},{row[1]!r},{row[2]!r},{row[3]!r}\n")
    return result
