"""Receding-horizon execution of a trained policy.

At each replan point the current joint state (built from the agents'
shared local observations), a target return and the timestep condition a
reverse-diffusion sample of an H-step window; each agent then applies its
own inverse dynamics to its slice of consecutive planned states.  Many
episodes are evaluated in lockstep so the reverse chains batch into one
network pass.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import environment as env
from ..dataset import EpisodeRecord, joint_state, _trace_state
from ..environment import EpisodeConfig, HunterAction
from ..seeds import derive_rng, derive_seed
from .bundle import PolicyBundle
from .model import CondBatch
from .sampling import p_sample_loop

__all__ = ["ExecuteSettings", "execute_episode", "evaluate"]


@dataclass(frozen=True)
class ExecuteSettings:
    """Execution-time knobs.

    ``target_return`` of None means the bundle's stored 90th-percentile
    dataset return.  ``replan_interval`` is the open-loop depth: 1 replans
    every step.
    """

    replan_interval: int = 1
    target_return: float | None = None
    guidance_weight: float | None = None

    def __post_init__(self):
        if self.replan_interval < 1:
            raise ValueError("replan_interval must be >= 1")


@dataclass
class _Live:
    index: int
    cfg: EpisodeConfig
    world: env.WorldState
    plan: np.ndarray | None = None  # (H, M, D) normalized
    states: list = None
    trace: list = None
    actions: list = None
    rewards: list = None
    kls: list = None
    collisions: int = 0
    status: env.EpisodeStatus = env.EpisodeStatus.RUNNING

    def __post_init__(self):
        self.states, self.trace = [], []
        self.actions, self.rewards, self.kls = [], [], []


def _plan_actions(
    bundle: PolicyBundle, plan: np.ndarray, offset: int, cfg: EpisodeConfig
) -> list[HunterAction]:
    acts = []
    for agent in range(cfg.m_hunters):
        theta, v = bundle.inv.predict(
            agent, plan[offset, agent], plan[offset + 1, agent], cfg.v1
        )
        acts.append(HunterAction(theta, v))
    return acts


def evaluate(
    env_cfg: EpisodeConfig,
    bundle: PolicyBundle,
    n_episodes: int,
    root_seed: int,
    settings: ExecuteSettings = ExecuteSettings(),
) -> list[tuple[EpisodeRecord, EpisodeRecord]]:
    """Run ``n_episodes`` seeded CTDE episodes in lockstep.

    Returns (feature record, raw-position trace) pairs in episode-index
    order; the whole evaluation is a pure function of its arguments.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    g_w = bundle.guidance_weight if settings.guidance_weight is None else settings.guidance_weight
    tgt_return = bundle.return_p90 if settings.target_return is None else settings.target_return
    rtg = np.float32(tgt_return / bundle.return_scale)
    m, d = bundle.model_cfg.m_agents, bundle.model_cfg.state_dim
    if bundle.model_cfg.horizon < settings.replan_interval + 1:
        raise ValueError("replan_interval must leave room for a next state in the horizon")

    live: list[_Live] = []
    for i in range(n_episodes):
        cfg = replace(env_cfg, seed=derive_seed(root_seed, "eval-episode", i))
        if cfg.m_hunters != m:
            raise ValueError("environment hunter count does not match the checkpoint")
        live.append(_Live(index=i, cfg=cfg, world=env.reset(cfg)))

    t = 0
    while True:
        active = [ep for ep in live if not ep.status.terminal]
        if not active:
            break
        if t % settings.replan_interval == 0:
            states = np.stack([joint_state(ep.world, ep.cfg) for ep in active])
            norm = bundle.normalize(states).reshape(len(active), m * d)
            cond = CondBatch(
                state=norm,
                rtg=np.full(len(active), rtg, dtype=np.float32),
                timestep=np.full(len(active), t, dtype=np.int64),
            )
            plans = p_sample_loop(
                bundle.predictor,
                cond,
                bundle.schedule,
                g_w,
                derive_rng(root_seed, "plan", t),
            )
            for j, ep in enumerate(active):
                ep.plan = plans[j].reshape(bundle.model_cfg.horizon, m, d)
        offset = t % settings.replan_interval
        for ep in active:
            ep.states.append(joint_state(ep.world, ep.cfg))
            acts = _plan_actions(bundle, ep.plan, offset, ep.cfg)
            ep.world, rew, ep.status, snap = env.step(ep.world, acts, ep.cfg)
            ep.trace.append(_trace_state(ep.world))
            realized = np.array(
                [[h.pose.psi, h.speed] for h in ep.world.hunters], dtype=np.float32
            )
            ep.actions.append(realized)
            ep.rewards.append(rew[0].total)
            ep.kls.append(snap.kl)
            if rew[0].collision != 0.0:
                ep.collisions += 1
        t += 1

    out = []
    for ep in live:
        record = EpisodeRecord(
            states=np.asarray(ep.states, dtype=np.float32),
            actions=np.asarray(ep.actions, dtype=np.float32),
            rewards=np.asarray(ep.rewards, dtype=np.float32),
            kls=np.asarray(ep.kls, dtype=np.float32),
            status=ep.status,
            collisions=ep.collisions,
        )
        trace = EpisodeRecord(
            states=np.asarray(ep.trace, dtype=np.float32),
            actions=record.actions.copy(),
            rewards=record.rewards.copy(),
            kls=record.kls.copy(),
            status=ep.status,
            collisions=ep.collisions,
        )
        out.append((record, trace))
    return out


def execute_episode(
    env_cfg: EpisodeConfig,
    bundle: PolicyBundle,
    root_seed: int,
    settings: ExecuteSettings = ExecuteSettings(),
) -> tuple[EpisodeRecord, EpisodeRecord]:
    """Single-episode convenience wrapper around :func:`evaluate`."""
    return evaluate(env_cfg, bundle, 1, root_seed, settings)[0]
