"""Experiment runner behind the ``ncap-swim`` console command.

Subcommands: train, eval, ablate, transfer, rollout. Every run is driven
by a JSON config file plus a few overriding flags, writes CSV/JSONL
artifacts into an output directory, and is deterministic given the config
and seeds (streamed log CSVs carry wall-clock seconds and are exempt).

Exit codes: 0 success, 1 configuration error (bad flags, malformed
config or checkpoint, violated preconditions), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import traceback
from dataclasses import dataclass, replace

import numpy as np

from .checkpoints import build_policy, load_checkpoint, save_checkpoint
from .env import CommandSchedule, SwimmerConfig, rollout
from .errors import (
    CheckpointError,
    ConfigurationError,
    UnsupportedOperationError,
)
from .es import EsConfig, RunRecord, train
from .policy import resize_policy

logger = logging.getLogger(__name__)

# Training budget used when neither the config nor --budget says otherwise.
# Deliberately smaller than EsConfig's default so desk runs finish in hours.
DESK_BUDGET = 2e6

DEFAULT_TRANSFER_SIZES = tuple(range(3, 13))
DEFAULT_EPISODES = 10
BOOTSTRAP_RESAMPLES = 1000

CURVE_HEADER = (
    "timesteps",
    "generation",
    "return_mean",
    "return_max",
    "return_min",
    "return_center",
)
AGGREGATE_HEADER = (
    "generation",
    "timesteps",
    "return_center_mean",
    "ci_lo",
    "ci_hi",
)

_CONFIG_KEYS = {
    "policy",
    "env",
    "es",
    "seeds",
    "out_dir",
    "episodes",
    "nprime",
    "checkpoint",
    "schedule",
    "save_every",
}


@dataclass
class ExperimentConfig:
    """Fully resolved run description (file contents merged with flags)."""

    env: SwimmerConfig
    es: EsConfig
    seeds: list[int]
    out_dir: str
    policy: dict | None = None
    episodes: int = DEFAULT_EPISODES
    nprime: tuple[int, ...] = DEFAULT_TRANSFER_SIZES
    checkpoint: str | None = None
    schedule: CommandSchedule | None = None
    save_every: int = 0


class _Parser(argparse.ArgumentParser):
    """Argument errors are config errors (exit 1), not argparse's exit 2."""

    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ncap-swim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("train", "run ES per seed; write curve CSVs, checkpoints, aggregate"),
        ("eval", "score a checkpoint; write return and per-parameter stats"),
        ("ablate", "train the 8 flag cells plus the densified cell"),
        ("transfer", "resize a shared checkpoint across body sizes"),
        ("rollout", "trace one episode to JSONL with unit activations"),
    ):
        s = sub.add_parser(name, help=doc)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--seed", type=int, help="replace the config's seed list")
        s.add_argument("--out", help="output directory override")
        s.add_argument("--budget", type=float, help="ES timestep budget override")
        s.add_argument("--checkpoint", help="policy checkpoint file")
        s.add_argument("--nprime", help="comma-separated body sizes for transfer")
        s.add_argument("--episodes", type=int, help="evaluation episode count")
        s.add_argument("--schedule", help="JSON command-schedule file")
        s.add_argument(
            "--save-every",
            type=int,
            dest="save_every",
            help="checkpoint every K generations while training",
        )
    return parser


def _parse_nprime(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigurationError(f"--nprime expects comma-separated ints, got {text!r}")
    if not sizes or any(n < 2 for n in sizes):
        raise ConfigurationError("--nprime sizes must all be >= 2")
    return sizes


def load_experiment_config(args) -> ExperimentConfig:
    try:
        with open(args.config) as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {args.config}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {args.config} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")

    env = SwimmerConfig.from_dict(raw.get("env", {}))
    es_dict = dict(raw.get("es", {}))
    es_dict.setdefault("total_timesteps", DESK_BUDGET)
    if args.budget is not None:
        es_dict["total_timesteps"] = float(args.budget)
    es = EsConfig.from_dict(es_dict)

    seeds = [args.seed] if args.seed is not None else raw.get("seeds", [0])
    if (
        not isinstance(seeds, list)
        or not seeds
        or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds)
    ):
        raise ConfigurationError("seeds must be a non-empty list of integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("seeds must be distinct")

    out_dir = args.out or raw.get("out_dir")
    if not out_dir:
        raise ConfigurationError("an output directory is required (--out or out_dir)")

    episodes = args.episodes if args.episodes is not None else raw.get(
        "episodes", DEFAULT_EPISODES
    )
    if not isinstance(episodes, int) or episodes < 1:
        raise ConfigurationError("episodes must be a positive integer")

    if args.nprime is not None:
        nprime = _parse_nprime(args.nprime)
    else:
        sizes = raw.get("nprime", list(DEFAULT_TRANSFER_SIZES))
        if not isinstance(sizes, list) or not sizes or any(
            not isinstance(n, int) or n < 2 for n in sizes
        ):
            raise ConfigurationError("nprime must be a list of ints >= 2")
        nprime = tuple(sizes)

    schedule = None
    if args.schedule is not None:
        try:
            schedule = CommandSchedule.from_json(args.schedule)
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad schedule file {args.schedule}: {exc}")
    elif raw.get("schedule") is not None:
        breakpoints = raw["schedule"]
        if not isinstance(breakpoints, list):
            raise ConfigurationError("schedule must be a list of breakpoints")
        try:
            schedule = CommandSchedule(breakpoints)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad schedule: {exc}")

    save_every = (
        args.save_every if args.save_every is not None else raw.get("save_every", 0)
    )
    if not isinstance(save_every, int) or save_every < 0:
        raise ConfigurationError("save_every must be a non-negative integer")

    policy = raw.get("policy")
    if policy is not None and not isinstance(policy, dict):
        raise ConfigurationError("policy must be a JSON object")

    return ExperimentConfig(
        env=env,
        es=es,
        seeds=list(seeds),
        out_dir=out_dir,
        policy=policy,
        episodes=episodes,
        nprime=nprime,
        checkpoint=args.checkpoint or raw.get("checkpoint"),
        schedule=schedule,
        save_every=save_every,
    )


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------


def write_curve(path, records) -> None:
    """Seconds-free learning curve: byte-identical across reruns."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CURVE_HEADER)
        for r in records:
            writer.writerow(
                [
                    int(r.timesteps),
                    int(r.generation),
                    repr(float(r.return_mean)),
                    repr(float(r.return_max)),
                    repr(float(r.return_min)),
                    repr(float(r.return_center)),
                ]
            )


def read_curve(path) -> list:
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CURVE_HEADER:
            raise ConfigurationError(f"unexpected curve header in {path}")
        for row in reader:
            records.append(
                RunRecord(
                    int(row["timesteps"]),
                    int(row["generation"]),
                    float(row["return_mean"]),
                    float(row["return_max"]),
                    float(row["return_min"]),
                    float(row["return_center"]),
                    0.0,
                )
            )
    return records


def write_aggregate(path, per_seed_records, boot_seed: int) -> None:
    """Mean center return per generation with a bootstrap 95% interval."""
    rng = np.random.default_rng(boot_seed)
    n_rows = min(len(recs) for recs in per_seed_records)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(AGGREGATE_HEADER)
        for i in range(n_rows):
            vals = np.array([recs[i].return_center for recs in per_seed_records])
            timesteps = int(round(np.mean([recs[i].timesteps for recs in per_seed_records])))
            mean = float(vals.mean())
            if vals.size == 1:
                lo = hi = mean
            else:
                boots = rng.choice(vals, size=(BOOTSTRAP_RESAMPLES, vals.size))
                lo, hi = (
                    float(x) for x in np.percentile(boots.mean(axis=1), [2.5, 97.5])
                )
            writer.writerow(
                [
                    per_seed_records[0][i].generation,
                    timesteps,
                    repr(mean),
                    repr(lo),
                    repr(hi),
                ]
            )


def read_aggregate(path) -> list[dict]:
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != AGGREGATE_HEADER:
            raise ConfigurationError(f"unexpected aggregate header in {path}")
        for row in reader:
            rows.append(
                {
                    "generation": int(row["generation"]),
                    "timesteps": int(row["timesteps"]),
                    "return_center_mean": float(row["return_center_mean"]),
                    "ci_lo": float(row["ci_lo"]),
                    "ci_hi": float(row["ci_hi"]),
                }
            )
    return rows


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _require_policy(cfg: ExperimentConfig) -> dict:
    if cfg.policy is None:
        raise ConfigurationError("this command needs a 'policy' spec in the config")
    return cfg.policy


def _ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"output directory {path!r} is not writable: {exc}")


def _check_body_match(policy, cfg: ExperimentConfig) -> None:
    if getattr(policy, "n_joints", None) != cfg.env.n_joints:
        raise ConfigurationError(
            f"policy has {policy.n_joints} joints but env has {cfg.env.n_joints}"
        )


def _train_into(cfg: ExperimentConfig, policy_spec: dict, run_dir: str) -> list:
    """Train every seed of one policy family into run_dir.

    Returns per-seed record lists. File names inside run_dir are fixed so
    that identical (spec, env, es, seeds) always produce identical bytes.
    """
    _ensure_dir(run_dir)
    # Fail before any training starts if the policy config is unbuildable.
    probe = build_policy(policy_spec, seed=cfg.seeds[0])
    _check_body_match(probe, cfg)
    per_seed = []
    for seed in cfg.seeds:
        policy = build_policy(policy_spec, seed=seed)
        es_cfg = replace(cfg.es, seed=seed)
        ckpt_dir = None
        if cfg.save_every > 0:
            ckpt_dir = os.path.join(run_dir, f"ckpt_seed{seed}")
            os.makedirs(ckpt_dir, exist_ok=True)
        _, records = train(
            policy,
            cfg.env,
            es_cfg,
            schedule=cfg.schedule,
            record_path=os.path.join(run_dir, f"log_seed{seed}.csv"),
            checkpoint_dir=ckpt_dir,
            checkpoint_every=cfg.save_every,
        )
        save_checkpoint(policy, os.path.join(run_dir, f"final_seed{seed}.json"))
        write_curve(os.path.join(run_dir, f"curve_seed{seed}.csv"), records)
        per_seed.append(records)
        logger.info(
            "seed %d: %d generations, final center return %.3f",
            seed,
            records[-1].generation,
            records[-1].return_center,
        )
    write_aggregate(os.path.join(run_dir, "aggregate.csv"), per_seed, cfg.seeds[0])
    return per_seed


def cmd_train(cfg: ExperimentConfig) -> int:
    spec = _require_policy(cfg)
    _train_into(cfg, spec, cfg.out_dir)
    print(f"wrote {len(cfg.seeds)} curve files + aggregate.csv to {cfg.out_dir}")
    return 0


ABLATION_FLAGS = ("share_weights", "sign_constraints", "unit_init")


def ablation_cells(n_joints: int) -> list[tuple[str, dict]]:
    """The 8 NCAP flag cells plus the densified equal-size network."""
    cells = []
    for share in (1, 0):
        for sign in (1, 0):
            for init in (1, 0):
                name = f"share{share}_sign{sign}_init{init}"
                cells.append(
                    (
                        name,
                        {
                            "kind": "ncap",
                            "n_joints": n_joints,
                            "share_weights": bool(share),
                            "sign_constraints": bool(sign),
                            "unit_init": bool(init),
                        },
                    )
                )
    cells.append(("dense", {"kind": "embedded", "n_joints": n_joints, "dense": True}))
    return cells


def cmd_ablate(cfg: ExperimentConfig) -> int:
    _ensure_dir(cfg.out_dir)
    manifest = {}
    for name, spec in ablation_cells(cfg.env.n_joints):
        cell_dir = os.path.join(cfg.out_dir, name)
        _train_into(cfg, spec, cell_dir)
        manifest[name] = {
            "dir": name,
            "spec": spec,
            "curves": [f"curve_seed{s}.csv" for s in cfg.seeds],
            "checkpoints": [f"final_seed{s}.json" for s in cfg.seeds],
            "aggregate": "aggregate.csv",
        }
        print(f"cell {name} done")
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    print(f"wrote {len(manifest)} cells + manifest.json to {cfg.out_dir}")
    return 0


def _require_checkpoint(cfg: ExperimentConfig):
    if not cfg.checkpoint:
        raise ConfigurationError("this command needs --checkpoint (or config key)")
    return load_checkpoint(cfg.checkpoint)


def _eval_episodes(policy, env_cfg, episodes, base_seed, schedule=None, tag=0):
    returns = []
    for e in range(episodes):
        seed = np.random.SeedSequence([base_seed, tag, e])
        returns.append(
            rollout(policy, env_cfg, schedule=schedule, seed=seed).episode_return
        )
    return np.array(returns)


def cmd_transfer(cfg: ExperimentConfig) -> int:
    policy = _require_checkpoint(cfg)
    if policy.kind != "ncap":
        raise ConfigurationError("transfer needs an ncap checkpoint")
    _ensure_dir(cfg.out_dir)
    path = os.path.join(cfg.out_dir, "transfer.csv")
    base_seed = cfg.seeds[0]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(("n_joints", "return_mean", "return_std", "episodes"))
        for n_new in cfg.nprime:
            resized = resize_policy(policy, n_new)
            env_cfg = replace(cfg.env, n_joints=n_new).validate()
            rets = _eval_episodes(
                resized, env_cfg, cfg.episodes, base_seed, cfg.schedule, tag=n_new
            )
            writer.writerow(
                [n_new, repr(float(rets.mean())), repr(float(rets.std())), cfg.episodes]
            )
            logger.info("N'=%d mean return %.3f", n_new, rets.mean())
    print(f"wrote {path}")
    return 0


def cmd_eval(cfg: ExperimentConfig) -> int:
    policy = _require_checkpoint(cfg)
    _check_body_match(policy, cfg)
    _ensure_dir(cfg.out_dir)
    rets = _eval_episodes(policy, cfg.env, cfg.episodes, cfg.seeds[0], cfg.schedule)
    mean = float(rets.mean())
    n_params = policy.num_trainable
    path = os.path.join(cfg.out_dir, "eval.csv")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            (
                "kind",
                "num_trainable",
                "episodes",
                "return_mean",
                "return_std",
                "return_per_parameter",
            )
        )
        writer.writerow(
            [
                policy.kind,
                n_params,
                cfg.episodes,
                repr(mean),
                repr(float(rets.std())),
                repr(mean / n_params),
            ]
        )
    print(f"wrote {path}")
    return 0


def cmd_rollout(cfg: ExperimentConfig) -> int:
    policy = _require_checkpoint(cfg)
    _check_body_match(policy, cfg)
    _ensure_dir(cfg.out_dir)
    result = rollout(
        policy,
        cfg.env,
        schedule=cfg.schedule,
        seed=np.random.SeedSequence([cfg.seeds[0], 0, 0]),
        trace=True,
    )
    path = os.path.join(cfg.out_dir, "rollout.jsonl")
    result.log.save_jsonl(path)
    print(
        f"wrote {path} ({result.steps} steps, return {result.episode_return:.3f}"
        + (", diverged)" if result.diverged else ")")
    )
    return 0


# ---------------------------------------------------------------------------
# entry
# ---------------------------------------------------------------------------

COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "transfer": cmd_transfer,
    "rollout": cmd_rollout,
}

_CONFIG_FAILURES = (ConfigurationError, CheckpointError, UnsupportedOperationError)


def main(argv=None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_experiment_config(args)
        return COMMANDS[args.command](cfg)
    except _CONFIG_FAILURES as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


def entry() -> None:
    sys.exit(main(sys.argv[1:]))
