"""Offline dataset generation, windowing and the on-disk format.

Episodes are rolled out with a seeded mixture of scripted policies and
recorded as per-step feature states, realized actions, shared rewards and
the audited KL series.  Batches are sampled as fixed-horizon windows of
the interleaved joint state sequence, right-padded at episode ends with a
mask, and normalized by dataset-level statistics carried in the manifest.

On disk a dataset is a directory: ``manifest.json`` plus ``episodes.bin``
(little-endian float32 blocks, one CRC-32 per episode).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import environment as env
from .binio import (
    DATASET_MAGIC,
    FormatError,
    IntegrityError,
    Reader,
    TruncatedFileError,
    VersionError,
    crc32,
)
from .environment import EpisodeConfig, EpisodeStatus, Observation
from .policies import make_policy
from .seeds import derive_rng, derive_seed

__all__ = [
    "STATE_DIM",
    "ACTION_DIM",
    "TRACE_STATE_DIM",
    "featurize",
    "joint_state",
    "EpisodeRecord",
    "DatasetManifest",
    "OfflineDataset",
    "Batch",
    "rollout",
    "generate",
    "returns_to_go",
    "window_batch",
    "save",
    "load",
]

# Per-agent feature layout: own position (2, arena-normalized), own speed,
# heading (sin, cos), target relative position + visibility flag (3),
# the 2 nearest obstacle relative positions (4).
STATE_DIM = 12
ACTION_DIM = 2
_N_NEAREST_OBSTACLES = 2
_FAR_OBSTACLE = 2.0  # relative-coordinate fill when fewer obstacles exist

# Trace layout: raw per-agent pose/speed with the target pose appended,
# so recorded episodes can be re-scored and the KL series replayed.
TRACE_STATE_DIM = 8

MANIFEST_SCHEMA = "auvhunt-dataset"
MANIFEST_VERSION = 1


def featurize(obs: Observation, cfg: EpisodeConfig) -> np.ndarray:
    """Map one agent's observation to its feature vector (float32)."""
    w, h = cfg.arena.width, cfg.arena.height
    s = max(w, h)
    p = obs.own_position
    out = np.empty(STATE_DIM, dtype=np.float32)
    out[0] = p.x / w
    out[1] = p.y / h
    out[2] = obs.own_velocity
    out[3] = math.sin(p.psi)
    out[4] = math.cos(p.psi)
    target = obs.other_agent_positions[-1]
    if target is None:
        out[5:8] = 0.0
    else:
        out[5] = (target[0] - p.x) / s
        out[6] = (target[1] - p.y) / s
        out[7] = 1.0
    obstacles = sorted(
        obs.obstacle_positions, key=lambda o: (o[0] - p.x) ** 2 + (o[1] - p.y) ** 2
    )[:_N_NEAREST_OBSTACLES]
    for j in range(_N_NEAREST_OBSTACLES):
        if j < len(obstacles):
            out[8 + 2 * j] = (obstacles[j][0] - p.x) / s
            out[9 + 2 * j] = (obstacles[j][1] - p.y) / s
        else:
            out[8 + 2 * j] = _FAR_OBSTACLE
            out[9 + 2 * j] = _FAR_OBSTACLE
    return out


def joint_state(world: env.WorldState, cfg: EpisodeConfig) -> np.ndarray:
    """Stack all hunters' feature vectors into an (M, STATE_DIM) array."""
    return np.stack(
        [featurize(env.observe(world, i, cfg), cfg) for i in range(cfg.m_hunters)]
    )


@dataclass
class EpisodeRecord:
    """One recorded episode.

    ``states[t]`` is the joint feature state before action ``t``;
    ``actions[t]`` is the realized (heading, speed) per agent that
    produced state ``t+1``; rewards and KL values are per step.  All four
    arrays share the same length.
    """

    states: np.ndarray  # (T, M, state_dim) float32
    actions: np.ndarray  # (T, M, 2) float32
    rewards: np.ndarray  # (T,) float32
    kls: np.ndarray  # (T,) float32
    status: EpisodeStatus
    collisions: int = 0

    def __post_init__(self):
        t = self.states.shape[0]
        if not (self.actions.shape[0] == self.rewards.shape[0] == self.kls.shape[0] == t):
            raise ValueError("episode arrays must share the same length")

    @property
    def length(self) -> int:
        return self.states.shape[0]


@dataclass
class DatasetManifest:
    version: int
    n_episodes: int
    m: int
    state_dim: int
    action_dim: int
    h: int
    discount: float
    return_scale: float
    state_mean: np.ndarray
    state_std: np.ndarray
    root_seed: int
    behavior: dict
    layout: str
    success_fraction: float
    return_p90: float
    # Location/scale of the scaled return-to-go distribution; conditioning
    # features are standardized with these so the literal reward
    # magnitudes never reach the network raw.
    rtg_loc: float = 0.0
    rtg_scale: float = 1.0
    episodes_meta: list = field(default_factory=list)
    episodes_crc32: int = 0

    def to_dict(self) -> dict:
        return {
            "schema": MANIFEST_SCHEMA,
            "version": self.version,
            "n_episodes": self.n_episodes,
            "m": self.m,
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "h": self.h,
            "discount": self.discount,
            "return_scale": self.return_scale,
            "state_mean": [float(x) for x in self.state_mean],
            "state_std": [float(x) for x in self.state_std],
            "root_seed": self.root_seed,
            "behavior": self.behavior,
            "layout": self.layout,
            "success_fraction": self.success_fraction,
            "return_p90": self.return_p90,
            "rtg_loc": self.rtg_loc,
            "rtg_scale": self.rtg_scale,
            "episodes_meta": self.episodes_meta,
            "episodes_crc32": self.episodes_crc32,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        if d.get("schema") != MANIFEST_SCHEMA:
            raise FormatError(f"manifest schema is {d.get('schema')!r}, expected {MANIFEST_SCHEMA!r}")
        if d.get("version") != MANIFEST_VERSION:
            raise VersionError(f"manifest version {d.get('version')} unsupported (expected {MANIFEST_VERSION})")
        return cls(
            version=d["version"],
            n_episodes=d["n_episodes"],
            m=d["m"],
            state_dim=d["state_dim"],
            action_dim=d["action_dim"],
            h=d["h"],
            discount=d["discount"],
            return_scale=d["return_scale"],
            state_mean=np.asarray(d["state_mean"], dtype=np.float32),
            state_std=np.asarray(d["state_std"], dtype=np.float32),
            root_seed=d["root_seed"],
            behavior=d["behavior"],
            layout=d["layout"],
            success_fraction=d["success_fraction"],
            return_p90=d["return_p90"],
            rtg_loc=d["rtg_loc"],
            rtg_scale=d["rtg_scale"],
            episodes_meta=d["episodes_meta"],
            episodes_crc32=d["episodes_crc32"],
        )


@dataclass
class OfflineDataset:
    manifest: DatasetManifest
    episodes: list[EpisodeRecord]

    def __post_init__(self):
        self._rtg_cache: list[np.ndarray] | None = None

    def returns(self) -> list[np.ndarray]:
        """Per-episode return-to-go arrays (computed once, cached)."""
        if self._rtg_cache is None:
            self._rtg_cache = [
                returns_to_go(ep.rewards.astype(np.float64), self.manifest.discount)
                for ep in self.episodes
            ]
        return self._rtg_cache

    def normalize(self, states: np.ndarray) -> np.ndarray:
        return (states - self.manifest.state_mean) / self.manifest.state_std


@dataclass
class Batch:
    """A training batch of trajectory windows.

    ``tau`` is normalized and interleaved as (B, H, M * state_dim);
    ``mask`` is 1 where the window holds real steps and 0 on the
    right-padding.  Actions are raw (heading, speed) targets.
    """

    tau: np.ndarray  # (B, H, M*state_dim) float32, normalized
    mask: np.ndarray  # (B, H) float32
    actions: np.ndarray  # (B, H, M, 2) float32
    cond_state: np.ndarray  # (B, M*state_dim) float32, normalized
    cond_rtg: np.ndarray  # (B,) float32, scaled by return_scale
    cond_timestep: np.ndarray  # (B,) int64


def rollout(
    cfg: EpisodeConfig,
    policy,
    policy_rng: np.random.Generator,
    record_trace: bool = False,
) -> EpisodeRecord | tuple[EpisodeRecord, EpisodeRecord]:
    """Run one episode to termination under a scripted policy.

    Returns the feature-layout record (states are pre-action, paired with
    the realized actions that follow them), plus a raw-position trace
    record (states are post-step, ending at the terminal state) when
    ``record_trace`` is set.
    """
    world = env.reset(cfg)
    states, actions, rewards, kls = [], [], [], []
    trace_states = []
    collisions = 0
    status = env.episode_status(world, cfg)
    while not status.terminal:
        states.append(joint_state(world, cfg))
        acts = [
            policy(env.observe(world, i, cfg), i, cfg, world.step_index, policy_rng)
            for i in range(cfg.m_hunters)
        ]
        world, rew, status, snap = env.step(world, acts, cfg)
        if record_trace:
            # Trace rows are post-step, so row t matches that step's
            # reward/KL and the final row is the terminal state.
            trace_states.append(_trace_state(world))
        realized = np.array(
            [[h.pose.psi, h.speed] for h in world.hunters], dtype=np.float32
        )
        actions.append(realized)
        rewards.append(rew[0].total)
        kls.append(snap.kl)
        if rew[0].collision != 0.0:
            collisions += 1

    record = EpisodeRecord(
        states=np.asarray(states, dtype=np.float32),
        actions=np.asarray(actions, dtype=np.float32),
        rewards=np.asarray(rewards, dtype=np.float32),
        kls=np.asarray(kls, dtype=np.float32),
        status=status,
        collisions=collisions,
    )
    if not record_trace:
        return record
    trace = EpisodeRecord(
        states=np.asarray(trace_states, dtype=np.float32),
        actions=record.actions.copy(),
        rewards=record.rewards.copy(),
        kls=record.kls.copy(),
        status=status,
        collisions=collisions,
    )
    return record, trace


def _trace_state(world: env.WorldState) -> np.ndarray:
    t = world.target
    row_t = [t.pose.x, t.pose.y, t.pose.psi, t.speed]
    return np.array(
        [[h.pose.x, h.pose.y, h.pose.psi, h.speed] + row_t for h in world.hunters],
        dtype=np.float32,
    )


def generate(
    env_cfg: EpisodeConfig,
    behavior_mix: dict[str, float],
    n_episodes: int,
    root_seed: int,
    h: int = 40,
    discount: float = 0.9,
    return_scale: float = 3000.0,
    noisy_epsilon: float = 0.5,
) -> OfflineDataset:
    """Roll out a seeded mixture of scripted policies into a dataset.

    Fully deterministic given ``root_seed``: the per-episode environment
    seed, the policy choice and the policy noise stream are all derived
    from it.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    names = sorted(behavior_mix)
    weights = np.array([behavior_mix[n] for n in names], dtype=float)
    if weights.sum() <= 0 or (weights < 0).any():
        raise ValueError("behavior mix weights must be non-negative and sum > 0")
    weights = weights / weights.sum()

    episodes: list[EpisodeRecord] = []
    meta: list[dict] = []
    for i in range(n_episodes):
        name = str(derive_rng(root_seed, "mix", i).choice(names, p=weights))
        policy = make_policy(name, noisy_epsilon)
        ep_cfg = replace(env_cfg, seed=derive_seed(root_seed, "episode", i))
        record = rollout(ep_cfg, policy, derive_rng(root_seed, "policy", i))
        episodes.append(record)
        meta.append(
            {
                "status": record.status.value,
                "length": record.length,
                "collisions": record.collisions,
                "policy": name,
            }
        )

    all_states = np.concatenate([ep.states.reshape(-1, STATE_DIM) for ep in episodes])
    mean = all_states.mean(axis=0, dtype=np.float64).astype(np.float32)
    std = all_states.std(axis=0, dtype=np.float64).astype(np.float32)
    std = np.where(std > 0, std, np.float32(1.0))

    all_rtgs = np.concatenate(
        [returns_to_go(ep.rewards.astype(np.float64), discount) for ep in episodes]
    )
    initial_returns = [
        float(returns_to_go(ep.rewards.astype(np.float64), discount)[0]) for ep in episodes
    ]
    scaled = all_rtgs / return_scale
    manifest = DatasetManifest(
        version=MANIFEST_VERSION,
        n_episodes=n_episodes,
        m=env_cfg.m_hunters,
        state_dim=STATE_DIM,
        action_dim=ACTION_DIM,
        h=h,
        discount=discount,
        return_scale=return_scale,
        state_mean=mean,
        state_std=std,
        root_seed=root_seed,
        behavior={"mix": {n: float(w) for n, w in zip(names, weights)}, "noisy_epsilon": noisy_epsilon},
        layout="features-v1",
        success_fraction=float(
            np.mean([ep.status is EpisodeStatus.SUCCESS for ep in episodes])
        ),
        return_p90=float(np.percentile(initial_returns, 90.0)),
        rtg_loc=float(scaled.mean()),
        rtg_scale=float(max(scaled.std(), 1e-6)),
        episodes_meta=meta,
    )
    return OfflineDataset(manifest, episodes)


def returns_to_go(rewards: np.ndarray, discount: float) -> np.ndarray:
    """Discounted return-to-go: ``G_t = r_t + discount * G_{t+1}``, G after the end = 0."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if not np.all(np.isfinite(rewards)):
        raise ValueError("rewards must be finite")
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + discount * acc
        out[t] = acc
    return out


def window_batch(
    dataset: OfflineDataset, batch_size: int, h: int, rng: np.random.Generator
) -> Batch:
    """Sample a batch of H-step windows with right-padding masks.

    Start indices are uniform over the real steps of a uniformly chosen
    episode (episodes shorter than 2 steps are excluded); windows running
    past the episode end repeat the terminal state under a zero mask.
    Conditioning is built from the window start.
    """
    if not dataset.episodes:
        raise ValueError("dataset has no episodes")
    eligible = [i for i, ep in enumerate(dataset.episodes) if ep.length >= 2]
    if not eligible:
        raise ValueError("no episode has length >= 2")
    m, d = dataset.manifest.m, dataset.manifest.state_dim
    rtgs = dataset.returns()

    tau = np.empty((batch_size, h, m * d), dtype=np.float32)
    mask = np.zeros((batch_size, h), dtype=np.float32)
    actions = np.empty((batch_size, h, m, ACTION_DIM), dtype=np.float32)
    cond_rtg = np.empty(batch_size, dtype=np.float32)
    cond_timestep = np.empty(batch_size, dtype=np.int64)

    for b in range(batch_size):
        ei = eligible[int(rng.integers(len(eligible)))]
        ep = dataset.episodes[ei]
        start = int(rng.integers(ep.length))
        n_real = min(h, ep.length - start)
        window = np.empty((h, m, d), dtype=np.float32)
        window[:n_real] = ep.states[start : start + n_real]
        window[n_real:] = ep.states[ep.length - 1]
        acts = np.empty((h, m, ACTION_DIM), dtype=np.float32)
        acts[:n_real] = ep.actions[start : start + n_real]
        acts[n_real:] = ep.actions[ep.length - 1]
        mask[b, :n_real] = 1.0
        tau[b] = dataset.normalize(window).reshape(h, m * d)
        actions[b] = acts
        cond_rtg[b] = rtgs[ei][start] / dataset.manifest.return_scale
        cond_timestep[b] = start

    return Batch(
        tau=tau,
        mask=mask,
        actions=actions,
        cond_state=tau[:, 0, :].copy(),
        cond_rtg=cond_rtg,
        cond_timestep=cond_timestep,
    )


def save(dataset: OfflineDataset, path: str | Path) -> None:
    """Write ``manifest.json`` and ``episodes.bin``; the round trip is bit-exact."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    blocks = []
    for ep in dataset.episodes:
        t, m, d = ep.states.shape
        header = struct.pack("<IIII", DATASET_MAGIC, t, m, d)
        payload = b"".join(
            [
                np.ascontiguousarray(ep.states, dtype="<f4").tobytes(),
                np.ascontiguousarray(ep.actions, dtype="<f4").tobytes(),
                np.ascontiguousarray(ep.rewards, dtype="<f4").tobytes(),
                np.ascontiguousarray(ep.kls, dtype="<f4").tobytes(),
            ]
        )
        block = header + payload
        blocks.append(block + struct.pack("<I", crc32(block)))
    episodes_bytes = b"".join(blocks)

    manifest = dataset.manifest
    manifest.episodes_crc32 = crc32(episodes_bytes)
    (path / "episodes.bin").write_bytes(episodes_bytes)
    (path / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def load(path: str | Path) -> OfflineDataset:
    """Read a dataset directory, verifying versions and every checksum."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    episodes_path = path / "episodes.bin"
    if not manifest_path.exists() or not episodes_path.exists():
        raise FormatError(f"{path} is not a dataset directory (missing manifest or episodes)")
    try:
        manifest_dict = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"manifest.json is not valid JSON: {e}") from e
    manifest = DatasetManifest.from_dict(manifest_dict)

    raw = episodes_path.read_bytes()
    if manifest.episodes_crc32 != crc32(raw):
        raise IntegrityError("episodes.bin checksum does not match the manifest block")

    reader = Reader(raw, name="episodes.bin")
    episodes: list[EpisodeRecord] = []
    idx = 0
    while reader.remaining() > 0:
        block_start = reader.pos
        magic = reader.u32()
        if magic != DATASET_MAGIC:
            raise FormatError(
                f"episode {idx}: bad magic 0x{magic:08X} (expected 0x{DATASET_MAGIC:08X})"
            )
        t = reader.u32()
        m = reader.u32()
        d = reader.u32()
        states = reader.f32_array(t * m * d).reshape(t, m, d)
        actions = reader.f32_array(t * m * ACTION_DIM).reshape(t, m, ACTION_DIM)
        rewards = reader.f32_array(t)
        kls = reader.f32_array(t)
        stored_crc = reader.u32()
        actual_crc = crc32(raw[block_start : reader.pos - 4])
        if stored_crc != actual_crc:
            raise IntegrityError(f"episode {idx}: CRC-32 mismatch")
        meta = manifest.episodes_meta[idx] if idx < len(manifest.episodes_meta) else {}
        episodes.append(
            EpisodeRecord(
                states=states,
                actions=actions,
                rewards=rewards,
                kls=kls,
                status=EpisodeStatus(meta.get("status", "failure_timeout")),
                collisions=int(meta.get("collisions", 0)),
            )
        )
        idx += 1
    if idx != manifest.n_episodes:
        raise TruncatedFileError(
            f"episodes.bin holds {idx} episodes, manifest promises {manifest.n_episodes}"
        )
    return OfflineDataset(manifest, episodes)
