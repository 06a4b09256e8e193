"""Checkpoint bundle: everything needed to resume training or act.

Network parameters, Adam moments, the step counter, normalization
statistics and the scalar hyperparameters all live in one named-array
checkpoint file, so save -> load -> one more step reproduces an
uninterrupted run bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import nncore as nn
from .model import InverseDynamics, ModelConfig, NoisePredictor
from .schedule import DiffusionSchedule, make_schedule

__all__ = ["PolicyBundle"]


@dataclass
class PolicyBundle:
    predictor: NoisePredictor
    inv: InverseDynamics
    model_cfg: ModelConfig
    schedule: DiffusionSchedule
    guidance_weight: float
    state_mean: np.ndarray
    state_std: np.ndarray
    return_scale: float
    return_p90: float
    adam: nn.AdamState
    step: int = 0

    def normalize(self, states: np.ndarray) -> np.ndarray:
        return ((states - self.state_mean) / self.state_std).astype(np.float32)

    def save(self, path: str | Path) -> None:
        arrays: dict[str, np.ndarray] = {}
        for k, t in self.predictor.params.items():
            arrays[f"model/{k}"] = t.data
        for k, t in self.inv.params.items():
            arrays[f"inv/{k}"] = t.data
        for k, v in self.adam.m.items():
            arrays[f"adam/m/{k}"] = v
        for k, v in self.adam.v.items():
            arrays[f"adam/v/{k}"] = v
        arrays["meta/step"] = np.array([self.step], dtype=np.uint64)
        arrays["meta/adam_step"] = np.array([self.adam.step], dtype=np.uint64)
        arrays["meta/dims"] = np.array(
            [
                self.model_cfg.m_agents,
                self.model_cfg.state_dim,
                self.model_cfg.horizon,
                self.model_cfg.hidden,
                self.model_cfg.cond_dim,
                self.model_cfg.attn_dk,
                self.model_cfg.attn_dv,
                self.inv.hidden,
                self.schedule.k_steps,
            ],
            dtype=np.uint32,
        )
        # Scalar hyperparameters and the beta schedule are float64 in the
        # training arithmetic; store their exact bits (as u64) so a resumed
        # run is bit-identical to an uninterrupted one.
        scalars = np.array(
            [
                self.guidance_weight,
                self.return_scale,
                self.return_p90,
                self.adam.lr,
                self.adam.beta1,
                self.adam.beta2,
                self.adam.eps,
                self.model_cfg.rtg_loc,
                self.model_cfg.rtg_scale,
            ],
            dtype=np.float64,
        )
        arrays["meta/scalars64"] = scalars.view(np.uint64)
        arrays["meta/beta64"] = np.ascontiguousarray(self.schedule.beta).view(np.uint64)
        arrays["norm/mean"] = self.state_mean
        arrays["norm/std"] = self.state_std
        nn.save_arrays(path, arrays)

    @classmethod
    def load(cls, path: str | Path) -> "PolicyBundle":
        arrays = nn.load_arrays(path)
        dims = arrays["meta/dims"]
        scalars = arrays["meta/scalars64"].view(np.float64)
        m, d, horizon, hidden, cond_dim, dk, dv, inv_hidden, k_steps = (int(x) for x in dims)
        model_cfg = ModelConfig(
            m_agents=m, state_dim=d, horizon=horizon, hidden=hidden,
            cond_dim=cond_dim, attn_dk=dk, attn_dv=dv,
            rtg_loc=float(scalars[7]), rtg_scale=float(scalars[8]),
        )
        model_params = {
            k[len("model/"):]: nn.Tensor(v.astype(np.float32), requires=True)
            for k, v in arrays.items()
            if k.startswith("model/")
        }
        inv_params = {
            k[len("inv/"):]: nn.Tensor(v.astype(np.float32), requires=True)
            for k, v in arrays.items()
            if k.startswith("inv/")
        }
        adam = nn.AdamState(
            lr=float(scalars[3]),
            beta1=float(scalars[4]),
            beta2=float(scalars[5]),
            eps=float(scalars[6]),
            step=int(arrays["meta/adam_step"][0]),
            m={k[len("adam/m/"):]: v.copy() for k, v in arrays.items() if k.startswith("adam/m/")},
            v={k[len("adam/v/"):]: v.copy() for k, v in arrays.items() if k.startswith("adam/v/")},
        )
        schedule = make_schedule(k_steps, betas=arrays["meta/beta64"].view(np.float64))
        return cls(
            predictor=NoisePredictor(model_cfg, model_params),
            inv=InverseDynamics(m, d, inv_params, hidden=inv_hidden),
            model_cfg=model_cfg,
            schedule=schedule,
            guidance_weight=float(scalars[0]),
            state_mean=arrays["norm/mean"].astype(np.float32),
            state_std=arrays["norm/std"].astype(np.float32),
            return_scale=float(scalars[1]),
            return_p90=float(scalars[2]),
            adam=adam,
            step=int(arrays["meta/step"][0]),
        )
