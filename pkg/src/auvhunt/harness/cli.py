"""Command-line front end.

Subcommands: ``covert-check``, ``simulate``, ``gen-dataset``, ``train``,
``eval``, ``plot-data`` and ``print-defaults``.  Every command is a pure
function of (config, seed, input files); reruns are byte-identical.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 data
integrity error.  The ``AUVHUNT_OUT_DIR`` environment variable prefixes
relative output paths.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import amadp, dataset as ds
from ..binio import DataFormatError, IntegrityError
from ..covert import (
    NeverCovertError,
    covert_bound,
    detection_snapshot,
    min_covert_distance,
)
from ..environment import EpisodeConfig
from ..policies import POLICIES, make_policy
from ..seeds import derive_rng, derive_seed
from .config import (
    ConfigError,
    RunConfig,
    config_hash,
    desk_run_config,
    dumps_config,
    load_config,
)
from .metrics import build_metrics

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_INTEGRITY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage errors are validation errors
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _out_path(p: str) -> Path:
    base = os.environ.get("AUVHUNT_OUT_DIR")
    path = Path(p)
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def _csv_header(fh, schema: str, cfg: RunConfig) -> None:
    fh.write(f"# auvhunt csv schema={schema}/1 config={config_hash(cfg)}\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def _cmd_print_defaults(args) -> int:
    cfg = desk_run_config() if args.desk else RunConfig()
    sys.stdout.write(dumps_config(cfg))
    return EXIT_OK


def _covert_row(d: float, cfg: RunConfig) -> tuple:
    ep = cfg.episode
    snap = detection_snapshot(d, ep.covert, ep.channel, ep.ambient_noise_watts())
    return d, snap.beta_t, snap.threshold, snap.kl, snap.covert_ok


def _cmd_covert_check(args) -> int:
    cfg = load_config(args.config)
    ep = cfg.episode
    rows = []
    if args.sweep is not None:
        d_min, d_max, n = args.sweep
        if d_min <= 0 or d_max <= d_min or int(n) < 2:
            raise ConfigError("sweep needs 0 < dmin < dmax and n >= 2")
        for d in np.linspace(d_min, d_max, int(n)):
            rows.append(_covert_row(float(d), cfg))
    else:
        if args.distance is None or args.distance <= 0:
            raise ConfigError("--distance must be positive (or use --sweep)")
        rows.append(_covert_row(args.distance, cfg))

    bound = covert_bound(ep.covert.epsilon)
    print(f"kl bound 2*eps^2 = {bound:.6g}")
    try:
        d_star = min_covert_distance(ep.covert, ep.channel, ep.ambient_noise_watts())
        print(f"min covert distance = {d_star:.3f} m (10 km search cap)")
    except NeverCovertError:
        print("min covert distance = unreachable within the 10 km search cap")
    print(f"{'distance_m':>12} {'beta':>12} {'threshold_w':>12} {'kl':>12} covert")
    for d, beta, thr, kl, ok in rows:
        print(f"{d:12.3f} {beta:12.6g} {thr:12.6g} {kl:12.6g} {str(ok).lower()}")

    if args.out:
        out = _out_path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            _csv_header(fh, "covert-sweep", cfg)
            fh.write("distance_m,beta,threshold_w,kl,covert\n")
            for d, beta, thr, kl, ok in rows:
                fh.write(f"{_fmt(d)},{_fmt(beta)},{_fmt(thr)},{_fmt(kl)},{int(ok)}\n")
        print(f"wrote {out}")
    return EXIT_OK


def _run_scripted(cfg: RunConfig, policy_name: str, episodes: int, seed: int):
    policy = make_policy(policy_name, cfg.data.noisy_epsilon)
    records, traces = [], []
    for i in range(episodes):
        ep_cfg = replace(cfg.episode, seed=derive_seed(seed, "episode", i))
        record, trace = ds.rollout(
            ep_cfg, policy, derive_rng(seed, "policy", i), record_trace=True
        )
        records.append(record)
        traces.append(trace)
    return records, traces


def _trace_dataset(traces, cfg: RunConfig, seed: int, label: str) -> ds.OfflineDataset:
    manifest = ds.DatasetManifest(
        version=ds.MANIFEST_VERSION,
        n_episodes=len(traces),
        m=cfg.episode.m_hunters,
        state_dim=ds.TRACE_STATE_DIM,
        action_dim=ds.ACTION_DIM,
        h=cfg.data.horizon,
        discount=cfg.data.discount,
        return_scale=cfg.data.return_scale,
        state_mean=np.zeros(ds.TRACE_STATE_DIM, dtype=np.float32),
        state_std=np.ones(ds.TRACE_STATE_DIM, dtype=np.float32),
        root_seed=seed,
        behavior={"source": label},
        layout="trace-v1",
        success_fraction=float(
            np.mean([t.status.value == "success" for t in traces])
        ),
        return_p90=0.0,
        episodes_meta=[
            {
                "status": t.status.value,
                "length": t.length,
                "collisions": t.collisions,
                "policy": label,
            }
            for t in traces
        ],
    )
    return ds.OfflineDataset(manifest, traces)


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.episodes < 1:
        raise ConfigError("--episodes must be >= 1")
    records, traces = _run_scripted(cfg, args.policy, args.episodes, args.seed)
    out = _out_path(args.out)
    ds.save(_trace_dataset(traces, cfg, args.seed, args.policy), out / "traces")
    report = build_metrics(records, cfg.episode.covert.epsilon)
    report.extras["policy"] = args.policy
    report.extras["seed"] = args.seed
    report.save(out / "metrics.json")
    print(
        f"{args.policy}: {args.episodes} episodes, success_rate={report.success_rate:.3f}, "
        f"violation_fraction={report.covert_violation_fraction:.3f}"
    )
    print(f"wrote {out / 'traces'} and {out / 'metrics.json'}")
    return EXIT_OK


def _cmd_gen_dataset(args) -> int:
    cfg = load_config(args.config)
    n = args.episodes if args.episodes is not None else cfg.data.n_episodes
    if n < 1:
        raise ConfigError("--episodes must be >= 1")
    data = ds.generate(
        cfg.episode,
        cfg.data.mix(),
        n,
        cfg.root_seed if args.seed is None else args.seed,
        h=cfg.data.horizon,
        discount=cfg.data.discount,
        return_scale=cfg.data.return_scale,
        noisy_epsilon=cfg.data.noisy_epsilon,
    )
    out = _out_path(args.out)
    ds.save(data, out)
    print(
        f"wrote {out}: {n} episodes, success_fraction={data.manifest.success_fraction:.3f}"
    )
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    data = ds.load(_out_path(args.dataset))
    if data.manifest.layout != "features-v1":
        raise ConfigError(f"{args.dataset} holds layout {data.manifest.layout!r}, need 'features-v1'")
    out = _out_path(args.out)
    seed = cfg.root_seed if args.seed is None else args.seed
    result = amadp.train(data, cfg.training, derive_seed(seed, "train-stage"), out_dir=out)
    last = result.loss_rows[-1]
    print(
        f"trained {cfg.training.steps} steps; final losses total={last[1]:.5f} "
        f"inverse={last[2]:.5f} ddpm={last[3]:.5f}"
    )
    print(f"wrote {out / 'ckpt_final.bin'} and {out / 'loss.csv'}")
    return EXIT_OK


def _load_bundle(path: Path) -> amadp.PolicyBundle:
    if not path.exists():
        raise ConfigError(f"missing checkpoint artifact: {path} (run `auvhunt train` first)")
    return amadp.PolicyBundle.load(path)


def _cmd_eval(args) -> int:
    cfg = load_config(args.config)
    bundle = _load_bundle(_out_path(args.checkpoint))
    n = args.episodes if args.episodes is not None else cfg.execute.eval_episodes
    if n < 1:
        raise ConfigError("--episodes must be >= 1")
    seed = cfg.root_seed if args.seed is None else args.seed
    settings = amadp.ExecuteSettings(
        replan_interval=cfg.execute.replan_interval,
        target_return=cfg.execute.target_return,
    )
    pairs = amadp.evaluate(cfg.episode, bundle, n, derive_seed(seed, "eval-stage"), settings)
    records = [r for r, _ in pairs]
    traces = [t for _, t in pairs]
    out = _out_path(args.out)
    ds.save(_trace_dataset(traces, cfg, seed, "amadp"), out / "traces")
    report = build_metrics(records, cfg.episode.covert.epsilon)
    report.extras["checkpoint"] = str(args.checkpoint)
    report.extras["seed"] = seed
    report.save(out / "metrics.json")
    print(
        f"amadp: {n} episodes, success_rate={report.success_rate:.3f}, "
        f"violation_fraction={report.covert_violation_fraction:.3f}"
    )
    print(f"wrote {out / 'traces'} and {out / 'metrics.json'}")
    return EXIT_OK


def _cmd_plot_data(args) -> int:
    cfg = load_config(args.config)
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "trajectory":
        data = ds.load(_out_path(args.traces))
        if data.manifest.layout != "trace-v1":
            raise ConfigError("trajectory plots need a raw-position trace directory")
        if not 0 <= args.episode < len(data.episodes):
            raise ConfigError(f"--episode must be in [0, {len(data.episodes) - 1}]")
        trace = data.episodes[args.episode]
        m = trace.states.shape[1]
        with open(out, "w", encoding="utf-8") as fh:
            _csv_header(fh, "trajectory", cfg)
            cols = ",".join(f"hunter{i}_x,hunter{i}_y" for i in range(m))
            fh.write(f"step,{cols},target_x,target_y\n")
            for t in range(trace.length):
                vals = []
                for i in range(m):
                    vals += [_fmt(trace.states[t, i, 0]), _fmt(trace.states[t, i, 1])]
                vals += [_fmt(trace.states[t, 0, 4]), _fmt(trace.states[t, 0, 5])]
                fh.write(f"{t}," + ",".join(vals) + "\n")
    elif args.kind == "kl-series":
        data = ds.load(_out_path(args.traces))
        report = build_metrics(data.episodes, cfg.episode.covert.epsilon)
        with open(out, "w", encoding="utf-8") as fh:
            _csv_header(fh, "kl-series", cfg)
            fh.write("step,kl_mean,kl_bound\n")
            bound = covert_bound(cfg.episode.covert.epsilon)
            for t, v in enumerate(report.kl_mean_series):
                fh.write(f"{t},{_fmt(v)},{_fmt(bound)}\n")
    else:  # success-curve
        ckpt_dir = _out_path(args.checkpoints)
        paths = sorted(ckpt_dir.glob("ckpt_*.bin"))
        paths = [p for p in paths if p.name != "ckpt_final.bin"]
        if not paths:
            raise ConfigError(f"no numbered checkpoints under {ckpt_dir} (run `auvhunt train` first)")
        seed = cfg.root_seed if args.seed is None else args.seed
        settings = amadp.ExecuteSettings(
            replan_interval=cfg.execute.replan_interval,
            target_return=cfg.execute.target_return,
        )
        rows = []
        for p in paths:
            bundle = amadp.PolicyBundle.load(p)
            pairs = amadp.evaluate(
                cfg.episode, bundle, args.episodes, derive_seed(seed, "curve-stage"), settings
            )
            rate = float(
                np.mean([r.status.value == "success" for r, _ in pairs])
            )
            rows.append((bundle.step, rate))
            print(f"checkpoint step {bundle.step}: success_rate={rate:.3f}")
        with open(out, "w", encoding="utf-8") as fh:
            _csv_header(fh, "success-curve", cfg)
            fh.write("training_step,success_rate\n")
            for step, rate in rows:
                fh.write(f"{step},{_fmt(rate)}\n")
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="auvhunt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("print-defaults", help="emit the default config JSON")
    p.add_argument("--desk", action="store_true", help="emit the desk-scale preset instead")
    p.set_defaults(fn=_cmd_print_defaults)

    p = sub.add_parser("covert-check", help="audit the covertness budget at given distances")
    p.add_argument("--config", default=None)
    p.add_argument("--distance", type=float, default=None, help="single distance in meters")
    p.add_argument("--sweep", nargs=3, type=float, metavar=("DMIN", "DMAX", "N"), default=None)
    p.add_argument("--out", default=None, help="optional CSV path")
    p.set_defaults(fn=_cmd_covert_check)

    p = sub.add_parser("simulate", help="run scripted-policy episodes and export traces")
    p.add_argument("--config", default=None)
    p.add_argument("--policy", choices=sorted(POLICIES), required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("gen-dataset", help="generate the offline training dataset")
    p.add_argument("--config", default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen_dataset)

    p = sub.add_parser("train", help="train the diffusion policy on a dataset")
    p.add_argument("--config", default=None)
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p.add_argument("--config", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("plot-data", help="emit figure-ready CSV data")
    p.add_argument("--config", default=None)
    p.add_argument("--kind", choices=("trajectory", "kl-series", "success-curve"), required=True)
    p.add_argument("--traces", default=None, help="trace directory (trajectory, kl-series)")
    p.add_argument("--episode", type=int, default=0, help="trace index for trajectory plots")
    p.add_argument("--checkpoints", default=None, help="checkpoint directory (success-curve)")
    p.add_argument("--episodes", type=int, default=20, help="episodes per curve point")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_plot_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "plot-data":
            if args.kind in ("trajectory", "kl-series") and args.traces is None:
                raise ConfigError(f"--traces is required for --kind {args.kind}")
            if args.kind == "success-curve" and args.checkpoints is None:
                raise ConfigError("--checkpoints is required for --kind success-curve")
        return args.fn(args)
    except ConfigError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except IntegrityError as e:
        print(f"integrity error: {e}", file=sys.stderr)
        return EXIT_INTEGRITY
    except DataFormatError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_INTEGRITY
    except NeverCovertError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (RuntimeError, ValueError, OSError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
