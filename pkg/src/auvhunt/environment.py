"""The hunting POMDP.

World stepping, partial observations with the detect-and-share rule, the
three-part reward, a scripted potential-field evader, and the
success/failure criteria with a per-step covertness audit.

One world/config pair is advanced by pure functions; independent episodes
can run in parallel with per-episode seeds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .acoustics import ChannelParams, ambient_noise_watts
from .covert import CovertParams, DetectionSnapshot, detection_snapshot
from .kinematics import (
    Arena,
    MotionLimits,
    Obstacle,
    Pose2,
    check_separation,
    step_agent,
    wrap_angle,
)
from .seeds import derive_rng

__all__ = [
    "AgentState",
    "WorldState",
    "Observation",
    "HunterAction",
    "RewardBreakdown",
    "EpisodeConfig",
    "EpisodeStatus",
    "EpisodeTerminated",
    "ResetError",
    "reset",
    "observe",
    "reward_encirclement",
    "reward_collision",
    "reward_covert",
    "evader_policy",
    "episode_status",
    "step",
    "hunter_target_distances",
    "kl_series_from_positions",
]

# Floor on the audited hunter-target distance; path loss needs d > 0.
_MIN_AUDIT_DISTANCE_M = 1.0


class EpisodeTerminated(RuntimeError):
    """step() was called on a world whose episode already ended."""


class ResetError(RuntimeError):
    """reset() could not satisfy the placement constraints."""


class EpisodeStatus(enum.Enum):
    RUNNING = "running"
    SUCCESS = "success"
    FAILURE_TIMEOUT = "failure_timeout"
    FAILURE_NEVER_DETECTED = "failure_never_detected"

    @property
    def terminal(self) -> bool:
        return self is not EpisodeStatus.RUNNING


@dataclass(frozen=True)
class AgentState:
    pose: Pose2
    speed: float


@dataclass(frozen=True)
class WorldState:
    """Ground-truth joint state; observations are slices of this."""

    hunters: tuple[AgentState, ...]
    target: AgentState
    obstacles: tuple[Obstacle, ...]
    step_index: int
    target_detected: bool


@dataclass(frozen=True)
class Observation:
    """Per-agent observation, fields in the canonical tuple order.

    ``other_agent_positions`` lists the other hunters' (x, y) in index
    order followed by the target entry, which is an (x, y) pair when the
    detect-and-share condition holds and ``None`` otherwise.  The absent
    target is always this explicit sentinel, never a zero fill.
    """

    own_velocity: float
    own_position: Pose2
    obstacle_positions: tuple[tuple[float, float], ...]
    other_agent_positions: tuple


@dataclass(frozen=True)
class HunterAction:
    """Movement command: absolute heading in radians and speed in m/s."""

    theta: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.v)):
            raise ValueError("action components must be finite")
        if self.v < 0:
            raise ValueError("commanded speed must be non-negative")
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class RewardBreakdown:
    encirclement: float
    collision: float
    covert: float
    total: float

    @classmethod
    def of(cls, encirclement: float, collision: float, covert: float) -> "RewardBreakdown":
        return cls(encirclement, collision, covert, encirclement + collision + covert)


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything one episode needs, flattened for serialization.

    Speed/acceleration caps and reward weights default to the reference
    system parameters; arena and spawn geometry, the step length ``dt``
    and the yaw clamp are reproducibility choices surfaced here.
    """

    m_hunters: int = 3
    r1: float = 800.0
    r2: float = 150.0
    d_g_star: float = 120.0
    h_max_steps: int = 500
    lambda_weight: float = 20.0
    zeta_weight: float = 6000.0
    nu_weight: float = 10.0
    seed: int = 0
    dt: float = 10.0
    v1: float = 0.3
    v2: float = 0.2
    a1: float = 0.01
    a2: float = 0.02
    yaw_step_max: float = math.pi / 4.0
    arena: Arena = field(default_factory=lambda: Arena(1200.0, 1200.0, -200.0, 10.0))
    start_xy: tuple[float, float] = (500.0, 500.0)
    n_obstacles: int = 5
    obstacle_radius_min: float = 40.0
    obstacle_radius_max: float = 80.0
    target_spawn_max_dist: float | None = None
    drift: tuple[float, float] = (0.0, 0.0)
    channel: ChannelParams = field(default_factory=ChannelParams)
    covert: CovertParams = field(default_factory=CovertParams)

    def __post_init__(self):
        if self.m_hunters < 2:
            raise ValueError("need at least 2 hunters")
        if not self.r2 < self.r1:
            raise ValueError("attacking radius r2 must be below sensing radius r1")
        if not 0 < self.d_g_star <= self.r2:
            raise ValueError("desired distance must be in (0, r2]")
        if self.h_max_steps < 1 or self.dt <= 0:
            raise ValueError("h_max_steps and dt must be positive")
        if not self.a1 < self.a2:
            raise ValueError("hunter acceleration must be below target acceleration")
        if not 0 < self.obstacle_radius_min <= self.obstacle_radius_max:
            raise ValueError("bad obstacle radius range")

    @property
    def hunter_limits(self) -> MotionLimits:
        return MotionLimits(self.v1, self.a1, self.yaw_step_max / self.dt)

    @property
    def target_limits(self) -> MotionLimits:
        return MotionLimits(self.v2, self.a2, self.yaw_step_max / self.dt)

    def ambient_noise_watts(self) -> float:
        return ambient_noise_watts(self.channel)


def hunter_target_distances(world: WorldState) -> list[float]:
    return [h.pose.distance_to(world.target.pose) for h in world.hunters]


def _spawn_ring(cfg: EpisodeConfig) -> list[Pose2]:
    m = cfg.m_hunters
    r_min = cfg.arena.r_min
    rho = max(r_min, 1.001 * r_min / (2.0 * math.sin(math.pi / m)))
    sx, sy = cfg.start_xy
    poses = []
    for i in range(m):
        ang = 2.0 * math.pi * i / m
        poses.append(Pose2(sx + rho * math.cos(ang), sy + rho * math.sin(ang), ang))
    return poses


def reset(cfg: EpisodeConfig) -> WorldState:
    """Deterministically initialize a world from the episode seed.

    Hunters start on an r_min-respecting ring around the start point,
    the target is sampled uniformly in the arena no closer than ``r2`` to
    any hunter (optionally capped by ``target_spawn_max_dist``), and the
    obstacles are sampled with clearance from the agents and each other.
    """
    rng = derive_rng(cfg.seed, "reset")
    hunter_poses = _spawn_ring(cfg)
    for p in hunter_poses:
        if not (0 <= p.x <= cfg.arena.width and 0 <= p.y <= cfg.arena.height):
            raise ResetError("start ring falls outside the arena")

    target_pose = None
    for _ in range(1000):
        tx = rng.uniform(0.0, cfg.arena.width)
        ty = rng.uniform(0.0, cfg.arena.height)
        cand = Pose2(tx, ty, rng.uniform(-math.pi, math.pi))
        if any(cand.distance_to(p) < cfg.r2 for p in hunter_poses):
            continue
        if cfg.target_spawn_max_dist is not None:
            if math.hypot(tx - cfg.start_xy[0], ty - cfg.start_xy[1]) > cfg.target_spawn_max_dist:
                continue
        target_pose = cand
        break
    if target_pose is None:
        raise ResetError("could not place the target after 1000 draws")

    obstacles: list[Obstacle] = []
    keep_out = hunter_poses + [target_pose]
    attempts = 0
    while len(obstacles) < cfg.n_obstacles:
        attempts += 1
        if attempts > 200 * max(cfg.n_obstacles, 1):
            raise ResetError("could not place obstacles with the required separation")
        radius = rng.uniform(cfg.obstacle_radius_min, cfg.obstacle_radius_max)
        ox = rng.uniform(radius, cfg.arena.width - radius)
        oy = rng.uniform(radius, cfg.arena.height - radius)
        cand = Obstacle(ox, oy, radius)
        clear = cfg.arena.r_min
        if any(math.hypot(p.x - ox, p.y - oy) < radius + clear for p in keep_out):
            continue
        if any(
            math.hypot(o.x - ox, o.y - oy) < o.radius + radius + clear for o in obstacles
        ):
            continue
        obstacles.append(cand)

    world = WorldState(
        hunters=tuple(AgentState(p, 0.0) for p in hunter_poses),
        target=AgentState(target_pose, 0.0),
        obstacles=tuple(obstacles),
        step_index=0,
        target_detected=False,
    )
    detected = any(d < cfg.r1 for d in hunter_target_distances(world))
    return replace(world, target_detected=detected)


def observe(world: WorldState, agent: int, cfg: EpisodeConfig) -> Observation:
    """Agent's partial view of the world.

    The target's position appears only when some hunter is currently
    within the sensing radius or the formation latched a detection
    earlier in the episode; sharing persists once acquired.
    """
    if not 0 <= agent < len(world.hunters):
        raise ValueError(f"agent index {agent} out of range")
    dists = hunter_target_distances(world)
    target_visible = world.target_detected or any(d < cfg.r1 for d in dists)
    others: list = [
        (h.pose.x, h.pose.y) for j, h in enumerate(world.hunters) if j != agent
    ]
    others.append((world.target.pose.x, world.target.pose.y) if target_visible else None)
    own = world.hunters[agent]
    return Observation(
        own_velocity=own.speed,
        own_position=own.pose,
        obstacle_positions=tuple((o.x, o.y) for o in world.obstacles),
        other_agent_positions=tuple(others),
    )


def reward_encirclement(world: WorldState, cfg: EpisodeConfig) -> float:
    """Formation-quality reward.

    ``-lambda * var(hunter-target distances)`` always, plus
    ``zeta * (d_g_star - d_g)`` once the formation centroid is within the
    desired distance of the target.
    """
    dists = np.array(hunter_target_distances(world))
    sigma_s = float(np.var(dists))
    cx = sum(h.pose.x for h in world.hunters) / len(world.hunters)
    cy = sum(h.pose.y for h in world.hunters) / len(world.hunters)
    d_g = math.hypot(cx - world.target.pose.x, cy - world.target.pose.y)
    r = -cfg.lambda_weight * sigma_s
    if d_g <= cfg.d_g_star:
        r += cfg.zeta_weight * (cfg.d_g_star - d_g)
    return r


def reward_collision(collision_flag: bool, cfg: EpisodeConfig) -> float:
    """-nu on collision, else 0; one penalty per step regardless of contact count."""
    return -cfg.nu_weight if collision_flag else 0.0


def reward_covert(kl: float, cfg: EpisodeConfig) -> float:
    """+nu while the KL budget holds (boundary inclusive), -nu otherwise."""
    if kl < 0:
        raise ValueError("kl must be non-negative")
    bound = 2.0 * cfg.covert.epsilon**2
    return cfg.nu_weight if kl <= bound else -cfg.nu_weight


def evader_policy(
    world: WorldState, cfg: EpisodeConfig, rng: np.random.Generator
) -> tuple[float, float]:
    """Potential-field flee action for the target.

    Repulsion from each hunter falls off as 1/d^2; obstacles and arena
    walls repel within a short activation range.  The returned speed is
    the target's cap; acceleration limits are enforced by the stepper.
    The rng only breaks the (measure-zero) tie when the net field
    vanishes.
    """
    tx, ty = world.target.pose.x, world.target.pose.y
    fx = fy = 0.0
    for h in world.hunters:
        dx, dy = tx - h.pose.x, ty - h.pose.y
        d = max(math.hypot(dx, dy), 1e-6)
        w = 1.0 / (d * d)
        fx += w * dx / d
        fy += w * dy / d

    k_obs, obs_range = 0.09, 150.0
    for o in world.obstacles:
        dx, dy = tx - o.x, ty - o.y
        d_surf = max(math.hypot(dx, dy) - o.radius, 1.0)
        if d_surf < obs_range:
            d = max(math.hypot(dx, dy), 1e-6)
            w = k_obs / (d_surf * d_surf)
            fx += w * dx / d
            fy += w * dy / d

    k_wall, wall_margin = 0.09, 100.0
    if tx < wall_margin:
        fx += k_wall / max(tx, 1.0) ** 2
    if cfg.arena.width - tx < wall_margin:
        fx -= k_wall / max(cfg.arena.width - tx, 1.0) ** 2
    if ty < wall_margin:
        fy += k_wall / max(ty, 1.0) ** 2
    if cfg.arena.height - ty < wall_margin:
        fy -= k_wall / max(cfg.arena.height - ty, 1.0) ** 2

    if math.hypot(fx, fy) < 1e-15:
        theta = float(rng.uniform(-math.pi, math.pi))
    else:
        theta = math.atan2(fy, fx)
    return theta, cfg.v2


def episode_status(world: WorldState, cfg: EpisodeConfig) -> EpisodeStatus:
    """Success/failure classification of the current world."""
    dists = hunter_target_distances(world)
    if all(d < cfg.r2 for d in dists):
        return EpisodeStatus.SUCCESS
    if world.step_index >= cfg.h_max_steps:
        if all(d > cfg.r1 for d in dists):
            return EpisodeStatus.FAILURE_NEVER_DETECTED
        return EpisodeStatus.FAILURE_TIMEOUT
    return EpisodeStatus.RUNNING


def _feasible(
    p: tuple[float, float],
    fixed: list[tuple[float, float]],
    obstacles: tuple[Obstacle, ...],
    r_min: float,
) -> bool:
    for q in fixed:
        if math.hypot(p[0] - q[0], p[1] - q[1]) < r_min:
            return False
    for o in obstacles:
        if math.hypot(p[0] - o.x, p[1] - o.y) < o.radius:
            return False
    return True


def _contact_stop(
    old: tuple[float, float],
    trial: tuple[float, float],
    fixed: list[tuple[float, float]],
    obstacles: tuple[Obstacle, ...],
    r_min: float,
) -> tuple[float, float]:
    """Largest advance along old->trial that stays penetration-free."""
    if _feasible(trial, fixed, obstacles, r_min):
        return trial
    if not _feasible(old, fixed, obstacles, r_min):
        return old
    lo, hi = 0.0, 1.0
    for _ in range(25):
        mid = 0.5 * (lo + hi)
        p = (old[0] + mid * (trial[0] - old[0]), old[1] + mid * (trial[1] - old[1]))
        if _feasible(p, fixed, obstacles, r_min):
            lo = mid
        else:
            hi = mid
    return (old[0] + lo * (trial[0] - old[0]), old[1] + lo * (trial[1] - old[1]))


def step(
    world: WorldState,
    actions: list[HunterAction],
    cfg: EpisodeConfig,
) -> tuple[WorldState, list[RewardBreakdown], EpisodeStatus, DetectionSnapshot]:
    """Advance the world by one control interval.

    Hunters move under their commands, the target under the scripted
    evader; colliding hunters are stopped at the contact boundary (their
    collision flags reflect the attempted penetration).  The covert audit
    uses the worst-case link, i.e. the closest hunter's distance after
    motion.  All hunters receive the same reward breakdown.
    """
    status_in = episode_status(world, cfg)
    if status_in.terminal:
        raise EpisodeTerminated(f"episode already ended with {status_in.value}")
    if len(actions) != cfg.m_hunters:
        raise ValueError(f"expected {cfg.m_hunters} actions, got {len(actions)}")

    limits = cfg.hunter_limits
    olds = [(h.pose.x, h.pose.y) for h in world.hunters]
    trial_poses: list[Pose2] = []
    trial_speeds: list[float] = []
    for h, a in zip(world.hunters, actions):
        pose, speed = step_agent(h.pose, h.speed, (a.theta, a.v), cfg.dt, limits, cfg.drift)
        cx, cy = cfg.arena.clamp(pose.x, pose.y)
        trial_poses.append(Pose2(cx, cy, pose.psi))
        trial_speeds.append(speed)

    collision_flags = check_separation(trial_poses, list(world.obstacles), cfg.arena.r_min)

    finals: list[tuple[float, float]] = []
    for i, pose in enumerate(trial_poses):
        if collision_flags[i]:
            fixed = finals + [(p.x, p.y) for p in trial_poses[i + 1 :]]
            finals.append(
                _contact_stop(olds[i], (pose.x, pose.y), fixed, world.obstacles, cfg.arena.r_min)
            )
        else:
            finals.append((pose.x, pose.y))
    new_hunters = tuple(
        AgentState(Pose2(fx, fy, p.psi), s)
        for (fx, fy), p, s in zip(finals, trial_poses, trial_speeds)
    )

    ev_rng = derive_rng(cfg.seed, "evader", world.step_index)
    ev_theta, ev_v = evader_policy(world, cfg, ev_rng)
    t_pose, t_speed = step_agent(
        world.target.pose, world.target.speed, (ev_theta, ev_v), cfg.dt, cfg.target_limits, cfg.drift
    )
    tx, ty = cfg.arena.clamp(t_pose.x, t_pose.y)
    t_old = (world.target.pose.x, world.target.pose.y)
    tx, ty = _contact_stop(t_old, (tx, ty), [], world.obstacles, cfg.arena.r_min)
    new_target = AgentState(Pose2(tx, ty, t_pose.psi), t_speed)

    new_world = WorldState(
        hunters=new_hunters,
        target=new_target,
        obstacles=world.obstacles,
        step_index=world.step_index + 1,
        target_detected=world.target_detected,
    )
    dists = hunter_target_distances(new_world)
    if any(d < cfg.r1 for d in dists):
        new_world = replace(new_world, target_detected=True)

    d_audit = max(min(dists), _MIN_AUDIT_DISTANCE_M)
    snapshot = detection_snapshot(d_audit, cfg.covert, cfg.channel, cfg.ambient_noise_watts())

    breakdown = RewardBreakdown.of(
        reward_encirclement(new_world, cfg),
        reward_collision(any(collision_flags), cfg),
        reward_covert(snapshot.kl, cfg),
    )
    rewards = [breakdown] * cfg.m_hunters
    return new_world, rewards, episode_status(new_world, cfg), snapshot


def kl_series_from_positions(
    hunter_xy: np.ndarray, target_xy: np.ndarray, cfg: EpisodeConfig
) -> np.ndarray:
    """Recompute the audited KL series from recorded positions.

    A pure function of the trajectory: replaying a recorded episode
    reproduces the on-line audit bit-for-bit.
    """
    hunter_xy = np.asarray(hunter_xy, dtype=float)
    target_xy = np.asarray(target_xy, dtype=float)
    if hunter_xy.ndim != 3 or target_xy.ndim != 2:
        raise ValueError("expected hunter_xy (T, M, 2) and target_xy (T, 2)")
    n_u = cfg.ambient_noise_watts()
    out = np.empty(hunter_xy.shape[0])
    for t in range(hunter_xy.shape[0]):
        d = np.hypot(
            hunter_xy[t, :, 0] - target_xy[t, 0], hunter_xy[t, :, 1] - target_xy[t, 1]
        )
        d_audit = max(float(d.min()), _MIN_AUDIT_DISTANCE_M)
        out[t] = detection_snapshot(d_audit, cfg.covert, cfg.channel, n_u).kl
    return out
