"""Evolution-strategies trainer.

Each generation samples Gaussian perturbations of the center parameter
vector (antithetic pairs by default), scores every candidate with one or
more full episodes, maps returns through a centered-rank transform, and
ascends the resulting gradient estimate

    g = (1 / (population * sigma)) * sum_k w_k * eps_k

with L2 decay pulling the center toward zero and Adam as the step rule.
Seeds are hierarchical: (run seed, generation, candidate, episode), so
results are independent of evaluation order and of how many workers the
NCAP_SWIM_THREADS environment variable allows.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .checkpoints import build_policy, save_checkpoint
from .env import SwimmerConfig, rollout
from .errors import ConfigurationError, ContractError

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "NCAP_SWIM_THREADS"


@dataclass(frozen=True)
class EsConfig:
    population_size: int = 256
    sigma: float = 0.02
    learning_rate: float = 0.01
    l2_decay: float = 0.005
    total_timesteps: float = 5e7
    antithetic: bool = True
    rank_shaping: bool = True
    eval_episodes_per_candidate: int = 1
    seed: int = 0

    def validate(self) -> "EsConfig":
        checks = [
            (self.population_size >= 2, "population_size must be >= 2"),
            (
                not self.antithetic or self.population_size % 2 == 0,
                "antithetic sampling needs an even population",
            ),
            (self.sigma > 0, "sigma must be positive"),
            (self.learning_rate > 0, "learning_rate must be positive"),
            (self.l2_decay >= 0, "l2_decay must be >= 0"),
            (self.total_timesteps > 0, "total_timesteps must be positive"),
            (
                self.eval_episodes_per_candidate >= 1,
                "eval_episodes_per_candidate must be >= 1",
            ),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigurationError(msg)
        return self

    def to_dict(self) -> dict:
        return {
            "population_size": self.population_size,
            "sigma": self.sigma,
            "learning_rate": self.learning_rate,
            "l2_decay": self.l2_decay,
            "total_timesteps": self.total_timesteps,
            "antithetic": self.antithetic,
            "rank_shaping": self.rank_shaping,
            "eval_episodes_per_candidate": self.eval_episodes_per_candidate,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EsConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown ES config keys: {sorted(unknown)}")
        return cls(**d).validate()


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, dim: int) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim))


def sample_perturbations(center, cfg: EsConfig, generation_seed):
    """Candidate matrix and its noise matrix for one generation.

    Antithetic pairs are adjacent rows (+eps, -eps). Deterministic for a
    given generation seed.
    """
    center = np.asarray(center, dtype=np.float64)
    rng = np.random.default_rng(generation_seed)
    pop = cfg.population_size
    dim = center.size
    if cfg.antithetic:
        half = rng.standard_normal((pop // 2, dim))
        eps = np.empty((pop, dim))
        eps[0::2] = half
        eps[1::2] = -half
    else:
        eps = rng.standard_normal((pop, dim))
    candidates = center[None, :] + cfg.sigma * eps
    return candidates, eps


def shape_fitness(returns) -> np.ndarray:
    """Centered-rank weights in [-0.5, 0.5], mean zero, ties averaged.

    All-identical returns give all-zero weights (no preferred direction).
    """
    returns = np.asarray(returns, dtype=np.float64)
    if returns.ndim != 1 or returns.size < 2:
        raise ContractError("shape_fitness needs a 1-d array of at least 2 returns")
    if np.all(returns == returns[0]):
        return np.zeros(returns.size)
    ranks = rankdata(returns, method="average") - 1.0
    return ranks / (returns.size - 1.0) - 0.5


def centered_returns(returns) -> np.ndarray:
    """Fallback weights when rank shaping is off: mean-centered returns."""
    returns = np.asarray(returns, dtype=np.float64)
    return returns - returns.mean()


def es_update(center, candidates, weights, adam: AdamState, cfg: EsConfig):
    """One ascent step on the rank-weighted gradient estimate.

    Mutates adam, returns the new center. A non-finite gradient aborts the
    generation: the center is returned unchanged (Adam untouched).
    """
    center = np.asarray(center, dtype=np.float64)
    candidates = np.asarray(candidates, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if candidates.shape != (weights.size, center.size):
        raise ContractError("candidates/weights shapes do not agree with center")
    eps = (candidates - center[None, :]) / cfg.sigma
    grad = (weights @ eps) / (weights.size * cfg.sigma)
    grad = grad - cfg.l2_decay * center
    if not np.isfinite(grad).all():
        logger.warning("non-finite gradient estimate; keeping center unchanged")
        return center.copy()
    adam.t += 1
    adam.m = adam.beta1 * adam.m + (1.0 - adam.beta1) * grad
    adam.v = adam.beta2 * adam.v + (1.0 - adam.beta2) * grad * grad
    m_hat = adam.m / (1.0 - adam.beta1**adam.t)
    v_hat = adam.v / (1.0 - adam.beta2**adam.t)
    return center + cfg.learning_rate * m_hat / (np.sqrt(v_hat) + adam.eps)


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------

RUN_RECORD_HEADER = (
    "timesteps",
    "generation",
    "return_mean",
    "return_max",
    "return_min",
    "return_center",
    "seconds",
)


@dataclass(frozen=True)
class RunRecord:
    timesteps: int
    generation: int
    return_mean: float
    return_max: float
    return_min: float
    return_center: float
    seconds: float


def write_run_records(path, records) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(RUN_RECORD_HEADER)
        for r in records:
            writer.writerow(
                [
                    int(r.timesteps),
                    int(r.generation),
                    repr(float(r.return_mean)),
                    repr(float(r.return_max)),
                    repr(float(r.return_min)),
                    repr(float(r.return_center)),
                    repr(float(r.seconds)),
                ]
            )


def read_run_records(path) -> list:
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != RUN_RECORD_HEADER:
            raise ContractError(f"unexpected run record header in {path}")
        for row in reader:
            records.append(
                RunRecord(
                    int(row["timesteps"]),
                    int(row["generation"]),
                    float(row["return_mean"]),
                    float(row["return_max"]),
                    float(row["return_min"]),
                    float(row["return_center"]),
                    float(row["seconds"]),
                )
            )
    return records


# ---------------------------------------------------------------------------
# rollout-coupled training
# ---------------------------------------------------------------------------


def _episode_seed(run_seed: int, generation: int, candidate: int, episode: int):
    return np.random.SeedSequence([run_seed, generation, candidate, episode])


def _evaluate_flat(policy_spec, env_dict, flat, seeds, schedule=None):
    """Score one parameter vector: mean return over episodes, summed steps."""
    policy = build_policy(policy_spec)
    policy.set_flat(np.asarray(flat, dtype=np.float64))
    cfg = SwimmerConfig.from_dict(env_dict)
    total = 0.0
    steps = 0
    for seed in seeds:
        result = rollout(policy, cfg, schedule=schedule, seed=seed)
        total += result.episode_return
        steps += result.steps
    return total / len(seeds), steps


def _worker_task(args):
    spec, env_dict, flat, seed_keys, schedule = args
    seeds = [np.random.SeedSequence(list(k)) for k in seed_keys]
    return _evaluate_flat(spec, env_dict, flat, seeds, schedule)


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    return max(1, n)


def train(
    policy,
    env_cfg: SwimmerConfig,
    es_cfg: EsConfig,
    schedule=None,
    record_path=None,
    checkpoint_dir=None,
    checkpoint_every: int = 0,
):
    """Run ES until the cumulative candidate timestep budget is spent.

    Returns (final flat params, list of RunRecord). The policy instance is
    left holding the final center parameters. Candidate episodes count
    toward the budget; the per-generation center evaluation does not.
    Record 0 is the pre-training center evaluation at timestep 0.
    """
    es_cfg.validate()
    env_cfg.validate()
    spec = policy.spec()
    env_dict = env_cfg.to_dict()
    center = policy.get_flat().astype(np.float64)
    adam = AdamState.init(center.size)
    records: list[RunRecord] = []
    t_start = time.perf_counter()
    run_seed = int(es_cfg.seed)
    workers = _worker_count()
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None

    def eval_center(generation: int) -> float:
        # Candidate slots are 0..pop-1, so pop itself is a free stream id.
        seeds = [_episode_seed(run_seed, generation, es_cfg.population_size, 0)]
        ret, _ = _evaluate_flat(spec, env_dict, center, seeds, schedule)
        return float(ret)

    def emit(record: RunRecord) -> None:
        records.append(record)
        if record_path is not None:
            write_run_records(record_path, records)

    try:
        center_ret = eval_center(0)
        emit(
            RunRecord(
                0, 0, center_ret, center_ret, center_ret, center_ret,
                time.perf_counter() - t_start,
            )
        )
        timesteps = 0
        generation = 0
        while timesteps < es_cfg.total_timesteps:
            generation += 1
            gen_seed = np.random.SeedSequence([run_seed, generation])
            candidates, _ = sample_perturbations(
                center, es_cfg, gen_seed.generate_state(4)
            )
            n_eps = es_cfg.eval_episodes_per_candidate
            tasks = [
                (
                    spec,
                    env_dict,
                    candidates[k],
                    [(run_seed, generation, k, e) for e in range(n_eps)],
                    schedule,
                )
                for k in range(es_cfg.population_size)
            ]
            if pool is not None:
                results = list(pool.map(_worker_task, tasks, chunksize=8))
            else:
                results = [_worker_task(t) for t in tasks]
            returns = np.array([r[0] for r in results])
            timesteps += int(sum(r[1] for r in results))
            weights = (
                shape_fitness(returns)
                if es_cfg.rank_shaping
                else centered_returns(returns)
            )
            center = es_update(center, candidates, weights, adam, es_cfg)
            center_ret = eval_center(generation)
            emit(
                RunRecord(
                    timesteps,
                    generation,
                    float(returns.mean()),
                    float(returns.max()),
                    float(returns.min()),
                    center_ret,
                    time.perf_counter() - t_start,
                )
            )
            if (
                checkpoint_dir is not None
                and checkpoint_every > 0
                and generation % checkpoint_every == 0
            ):
                policy.set_flat(center)
                save_checkpoint(
                    policy, os.path.join(checkpoint_dir, f"gen{generation:05d}.json")
                )
    finally:
        if pool is not None:
            pool.shutdown()
    policy.set_flat(center)
    return center, records
