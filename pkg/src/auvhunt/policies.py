"""Scripted hunter policies.

These generate the offline behavior data and serve as evaluation
baselines: pure pursuit, angle-offset encirclement, and a noisy pursuit
variant with epsilon-greedy heading perturbation.  All act on the agent's
own partial observation; when the target is unobserved they patrol a ring
around the arena center until the formation acquires it.
"""

from __future__ import annotations

import math

import numpy as np

from .environment import EpisodeConfig, HunterAction, Observation

__all__ = ["pure_pursuit", "encircle", "noisy_pursuit", "POLICIES", "make_policy"]


def _patrol_waypoint(agent: int, step_index: int, cfg: EpisodeConfig) -> tuple[float, float]:
    cx, cy = cfg.arena.width / 2.0, cfg.arena.height / 2.0
    r = 0.25 * min(cfg.arena.width, cfg.arena.height)
    ang = 0.05 * step_index + 2.0 * math.pi * agent / cfg.m_hunters
    return cx + r * math.cos(ang), cy + r * math.sin(ang)


def _head_to(obs: Observation, point: tuple[float, float], v: float) -> HunterAction:
    theta = math.atan2(point[1] - obs.own_position.y, point[0] - obs.own_position.x)
    return HunterAction(theta, v)


def pure_pursuit(
    obs: Observation, agent: int, cfg: EpisodeConfig, step_index: int, rng: np.random.Generator
) -> HunterAction:
    """Head straight at the observed target at full speed."""
    target = obs.other_agent_positions[-1]
    if target is None:
        return _head_to(obs, _patrol_waypoint(agent, step_index, cfg), cfg.v1)
    return _head_to(obs, target, cfg.v1)


def encircle(
    obs: Observation, agent: int, cfg: EpisodeConfig, step_index: int, rng: np.random.Generator
) -> HunterAction:
    """Approach an agent-specific anchor on a ring of radius d_g* around the target."""
    target = obs.other_agent_positions[-1]
    if target is None:
        return _head_to(obs, _patrol_waypoint(agent, step_index, cfg), cfg.v1)
    ang = 2.0 * math.pi * agent / cfg.m_hunters
    ax = target[0] + cfg.d_g_star * math.cos(ang)
    ay = target[1] + cfg.d_g_star * math.sin(ang)
    ax, ay = cfg.arena.clamp(ax, ay)
    dist = math.hypot(ax - obs.own_position.x, ay - obs.own_position.y)
    v = cfg.v1 if dist > 5.0 else min(cfg.v1, cfg.v2)
    return _head_to(obs, (ax, ay), v)


def noisy_pursuit(
    obs: Observation,
    agent: int,
    cfg: EpisodeConfig,
    step_index: int,
    rng: np.random.Generator,
    eps: float = 0.5,
) -> HunterAction:
    """Pure pursuit with epsilon-greedy heading noise and a jittered speed."""
    base = pure_pursuit(obs, agent, cfg, step_index, rng)
    theta = base.theta
    if rng.random() < eps:
        theta += rng.uniform(-0.5 * math.pi, 0.5 * math.pi)
    v = cfg.v1 * rng.uniform(0.3, 1.0)
    return HunterAction(theta, v)


POLICIES = {
    "pursuit": pure_pursuit,
    "encircle": encircle,
    "noisy": noisy_pursuit,
}


def make_policy(name: str, noisy_epsilon: float = 0.5):
    """Resolve a policy name to a callable, binding the noise level for 'noisy'."""
    if name not in POLICIES:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}")
    if name == "noisy":
        def bound(obs, agent, cfg, step_index, rng):
            return noisy_pursuit(obs, agent, cfg, step_index, rng, eps=noisy_epsilon)

        return bound
    return POLICIES[name]
