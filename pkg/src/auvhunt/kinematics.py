"""Planar motion of hunters and target at a fixed depth.

Body/earth frame transforms, speed- and acceleration-limited stepping, and
the geometry predicates used for collision and separation checks.  The
default integrator is a kinematic unicycle with acceleration and yaw-rate
clamps; a full 3-DOF rigid-body mode is available for user-supplied
constant matrices (see :func:`step_full_dynamics`).

All functions here are pure and operate on value types, so they are safe
to call from any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Pose2",
    "BodyVelocity",
    "MotionLimits",
    "Obstacle",
    "Arena",
    "FullDynamics",
    "wrap_angle",
    "body_to_earth",
    "step_agent",
    "step_full_dynamics",
    "check_separation",
]

_TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi]."""
    a = math.fmod(a + math.pi, _TWO_PI)
    if a < 0.0:
        a += _TWO_PI
    return a - math.pi


@dataclass(frozen=True)
class Pose2:
    """Planar pose: position in meters, heading in radians.

    The heading is normalized to [-pi, pi] on construction; depth is a
    shared arena constant and not part of the pose.
    """

    x: float
    y: float
    psi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.psi)):
            raise ValueError(f"non-finite pose ({self.x}, {self.y}, {self.psi})")
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    def distance_to(self, other: "Pose2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class BodyVelocity:
    """Body-frame velocity: surge and sway in m/s, yaw rate in rad/s."""

    surge: float
    sway: float
    yaw_rate: float = 0.0

    def planar_speed(self) -> float:
        return math.hypot(self.surge, self.sway)


@dataclass(frozen=True)
class MotionLimits:
    """Per-agent speed, acceleration and yaw-rate bounds.

    ``v_max`` is the planar speed cap, ``a_max`` bounds ``|dv/dt|`` and
    ``yaw_rate_max`` bounds ``|dpsi/dt|``.
    """

    v_max: float
    a_max: float
    yaw_rate_max: float

    def __post_init__(self):
        if self.v_max <= 0 or self.a_max <= 0 or self.yaw_rate_max <= 0:
            raise ValueError("motion limits must be strictly positive")


@dataclass(frozen=True)
class Obstacle:
    """Circular obstacle at fixed depth."""

    x: float
    y: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")

    def contains(self, pose: Pose2) -> bool:
        return math.hypot(pose.x - self.x, pose.y - self.y) < self.radius


@dataclass(frozen=True)
class Arena:
    """Rectangular operating area with a minimum inter-agent separation."""

    width: float
    height: float
    depth_z: float = -200.0
    r_min: float = 10.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("arena dimensions must be positive")
        if self.r_min <= 0:
            raise ValueError("r_min must be positive")

    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        return (min(max(x, 0.0), self.width), min(max(y, 0.0), self.height))

    def obstacle_inside(self, obs: Obstacle) -> bool:
        return (
            obs.radius <= obs.x <= self.width - obs.radius
            and obs.radius <= obs.y <= self.height - obs.radius
        )


def body_to_earth(v: BodyVelocity, psi: float) -> tuple[float, float, float]:
    """Rotate a body-frame velocity into the earth frame.

    Returns ``(vx, vy, yaw_rate)``; the planar speed norm is preserved and
    the yaw rate passes through unchanged.
    """
    c, s = math.cos(psi), math.sin(psi)
    return (c * v.surge - s * v.sway, s * v.surge + c * v.sway, v.yaw_rate)


def step_agent(
    pose: Pose2,
    current_speed: float,
    action: tuple[float, float],
    dt: float,
    limits: MotionLimits,
    drift: tuple[float, float] = (0.0, 0.0),
) -> tuple[Pose2, float]:
    """Advance one agent by ``dt`` under a (heading, speed) command.

    The commanded speed is clamped to ``[0, v_max]``, the speed change to
    ``a_max * dt`` and the heading change to ``yaw_rate_max * dt``.  The
    position advances along the realized heading using the trapezoidal
    speed profile, plus the optional ambient ``drift`` velocity.

    Returns the new pose (heading re-normalized to [-pi, pi]) and the
    realized speed.
    """
    theta_cmd, v_cmd = action
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not (math.isfinite(theta_cmd) and math.isfinite(v_cmd)):
        raise ValueError(f"non-finite action ({theta_cmd}, {v_cmd})")

    v_cmd = min(max(v_cmd, 0.0), limits.v_max)
    dv_max = limits.a_max * dt
    dv = min(max(v_cmd - current_speed, -dv_max), dv_max)
    new_speed = min(max(current_speed + dv, 0.0), limits.v_max)

    dpsi_max = limits.yaw_rate_max * dt
    dpsi = wrap_angle(theta_cmd - pose.psi)
    dpsi = min(max(dpsi, -dpsi_max), dpsi_max)
    new_psi = wrap_angle(pose.psi + dpsi)

    dist = 0.5 * (current_speed + new_speed) * dt
    new_x = pose.x + dist * math.cos(new_psi) + drift[0] * dt
    new_y = pose.y + dist * math.sin(new_psi) + drift[1] * dt
    return Pose2(new_x, new_y, new_psi), new_speed


@dataclass(frozen=True)
class FullDynamics:
    """Constant matrices for the 3-DOF rigid-body mode.

    ``m_a`` is the inertia matrix (including added mass), ``c_a`` the
    Coriolis-centripetal matrix, ``b_a`` the damping matrix and ``g_a``
    the combined gravity/buoyancy vector, all expressed in the body frame
    and held constant over a step.
    """

    m_a: np.ndarray
    c_a: np.ndarray
    b_a: np.ndarray
    g_a: np.ndarray

    def __post_init__(self):
        for name in ("m_a", "c_a", "b_a"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (3, 3):
                raise ValueError(f"{name} must be 3x3, got {m.shape}")
            object.__setattr__(self, name, m)
        g = np.asarray(self.g_a, dtype=float).reshape(3)
        object.__setattr__(self, "g_a", g)
        if abs(np.linalg.det(self.m_a)) < 1e-12:
            raise ValueError("inertia matrix must be invertible")


def step_full_dynamics(
    eta: np.ndarray,
    v: np.ndarray,
    control: np.ndarray,
    dyn: FullDynamics,
    dt: float,
    disturbance: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Explicit-Euler step of the full rigid-body model.

    ``eta = (x, y, psi)`` is the earth-fixed state and ``v`` the
    body-frame velocity ``(surge, sway, yaw_rate)``; ``control`` and the
    optional ``disturbance`` are body-frame force vectors.
    """
    eta = np.asarray(eta, dtype=float).reshape(3)
    v = np.asarray(v, dtype=float).reshape(3)
    p = np.asarray(control, dtype=float).reshape(3)
    e = np.zeros(3) if disturbance is None else np.asarray(disturbance, dtype=float).reshape(3)

    vx, vy, r = body_to_earth(BodyVelocity(v[0], v[1], v[2]), eta[2])
    rhs = p + e - (dyn.c_a + dyn.b_a) @ v - dyn.g_a
    v_dot = np.linalg.solve(dyn.m_a, rhs)

    eta_new = eta + np.array([vx, vy, r]) * dt
    eta_new[2] = wrap_angle(eta_new[2])
    return eta_new, v + v_dot * dt


def check_separation(
    poses: list[Pose2],
    obstacles: list[Obstacle],
    r_min: float,
) -> list[bool]:
    """Per-agent collision flags.

    Flag ``i`` is true iff agent ``i`` is closer than ``r_min`` to another
    agent in ``poses`` or strictly inside any obstacle circle.
    """
    if not poses:
        raise ValueError("poses must be non-empty")
    n = len(poses)
    flags = [False] * n
    for i in range(n):
        for j in range(i + 1, n):
            if poses[i].distance_to(poses[j]) < r_min:
                flags[i] = True
                flags[j] = True
        if not flags[i]:
            for obs in obstacles:
                if obs.contains(poses[i]):
                    flags[i] = True
                    break
    return flags
