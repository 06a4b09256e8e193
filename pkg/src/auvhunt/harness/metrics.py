"""Evaluation metrics and the independent trace re-scorer."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..covert import covert_bound
from ..dataset import EpisodeRecord, TRACE_STATE_DIM
from ..environment import EpisodeConfig, EpisodeStatus

__all__ = ["MetricsReport", "build_metrics", "rescore_trace_success"]


@dataclass
class MetricsReport:
    n_episodes: int
    success_rate: float
    mean_episode_length: float
    kl_mean_series: list[float]
    covert_violation_fraction: float
    collision_count: int
    loss_curve: str | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_episodes": self.n_episodes,
            "success_rate": self.success_rate,
            "mean_episode_length": self.mean_episode_length,
            "kl_mean_series": self.kl_mean_series,
            "covert_violation_fraction": self.covert_violation_fraction,
            "collision_count": self.collision_count,
            "loss_curve": self.loss_curve,
            "extras": self.extras,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )


def build_metrics(
    records: list[EpisodeRecord],
    epsilon: float,
    loss_curve: str | None = None,
) -> MetricsReport:
    """Aggregate a batch of episodes into one report.

    The KL series is the per-timestep mean over the episodes still alive
    at that timestep; the violation fraction counts recorded steps whose
    KL exceeds the 2*eps^2 bound.
    """
    if not records:
        raise ValueError("no episodes to report on")
    bound = covert_bound(epsilon)
    max_len = max(r.length for r in records)
    sums = np.zeros(max_len)
    counts = np.zeros(max_len, dtype=int)
    violations = 0
    total_steps = 0
    for r in records:
        sums[: r.length] += r.kls
        counts[: r.length] += 1
        violations += int(np.sum(r.kls > bound))
        total_steps += r.length
    series = [float(s / c) for s, c in zip(sums, counts)]
    return MetricsReport(
        n_episodes=len(records),
        success_rate=float(np.mean([r.status is EpisodeStatus.SUCCESS for r in records])),
        mean_episode_length=float(np.mean([r.length for r in records])),
        kl_mean_series=series,
        covert_violation_fraction=violations / total_steps if total_steps else 0.0,
        collision_count=int(sum(r.collisions for r in records)),
        loss_curve=loss_curve,
    )


def rescore_trace_success(trace: EpisodeRecord, cfg: EpisodeConfig) -> bool:
    """Re-evaluate the success criterion from a raw-position trace.

    Independent of the environment's own bookkeeping: reads the final
    recorded hunter and target positions and checks that every hunter
    ended inside the attacking radius within the step budget.
    """
    if trace.states.shape[-1] != TRACE_STATE_DIM:
        raise ValueError("not a raw-position trace (wrong state layout)")
    last = trace.states[-1]
    dists = [
        math.hypot(float(row[0]) - float(row[4]), float(row[1]) - float(row[5]))
        for row in last
    ]
    return all(d < cfg.r2 for d in dists) and trace.length <= cfg.h_max_steps
