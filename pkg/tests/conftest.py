"""Shared fixtures.

The trained-population fixtures run real ES at smoke scale (population 64,
2e5 timesteps, 10 seeds per cell) because several acceptance criteria are
statements about learning curves. Set NCAP_SWIM_ACCEPTANCE_FULL=1 to rerun
them at desk scale (population 256, 2e6 timesteps); that takes roughly an
hour on one core.
"""

import dataclasses
import os
import time

import numpy as np
import pytest

from ncap_swim.baselines import SPEED_GAIN, build_embedding_mask, embedded_params_from_ncap
from ncap_swim.checkpoints import build_policy
from ncap_swim.env import SwimmerConfig
from ncap_swim.es import EsConfig, train
from ncap_swim.policy import NcapFlags, NcapPolicy

FULL = os.environ.get("NCAP_SWIM_ACCEPTANCE_FULL", "") == "1"

SMOKE_POPULATION = 256 if FULL else 64
SMOKE_BUDGET = 2e6 if FULL else 2e5
SMOKE_SEEDS = tuple(range(10))

# The ablation grid corners exercised by the acceptance criteria. "dense"
# is the densified embedding-family MLP; the three booleans are
# (share_weights, sign_constraints, unit_init).
CELL_SPECS = {
    "ncap": {
        "kind": "ncap",
        "n_joints": 5,
        "share_weights": True,
        "sign_constraints": True,
        "unit_init": True,
    },
    "sign_off": {
        "kind": "ncap",
        "n_joints": 5,
        "share_weights": True,
        "sign_constraints": False,
        "unit_init": True,
    },
    "all_off": {
        "kind": "ncap",
        "n_joints": 5,
        "share_weights": False,
        "sign_constraints": False,
        "unit_init": False,
    },
    "dense": {"kind": "embedded", "n_joints": 5, "dense": True},
    "mlp": {"kind": "mlp", "n_joints": 5, "hidden_dims": [256, 256]},
}


@dataclasses.dataclass
class TrainedCell:
    name: str
    spec: dict
    seeds: tuple
    centers: list  # one flat parameter vector per seed
    records: list  # one RunRecord list per seed
    seconds: float

    def center_medians(self) -> np.ndarray:
        """10-seed median of the center return at each logged generation."""
        per_seed = np.array([[r.return_center for r in recs] for recs in self.records])
        return np.median(per_seed, axis=0)


def train_cell(name: str, seeds=SMOKE_SEEDS) -> TrainedCell:
    spec = CELL_SPECS[name]
    env_cfg = SwimmerConfig(n_joints=spec["n_joints"])
    centers, records = [], []
    t0 = time.perf_counter()
    for seed in seeds:
        es_cfg = EsConfig(
            population_size=SMOKE_POPULATION,
            total_timesteps=SMOKE_BUDGET,
            seed=seed,
        ).validate()
        policy = build_policy(spec, seed=seed)
        center, recs = train(policy, env_cfg, es_cfg)
        centers.append(center)
        records.append(recs)
    return TrainedCell(name, spec, tuple(seeds), centers, records, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def trained_cells():
    """Train the five acceptance cells once per session."""
    return {name: train_cell(name) for name in CELL_SPECS}


def random_embedding_pair(n_joints: int, seed: int):
    """Random unshared, unconstrained modular policy plus its masked twin.

    The masked family hard-wires the speed and turn channels, so those two
    raw values are pinned before conversion; the 6N - 2 trainable weights
    are drawn uniformly over [-1, 1].
    """
    flags = NcapFlags(share_weights=False, sign_constraints=False, unit_init=True)
    policy = NcapPolicy(n_joints, flags=flags, seed=seed)
    policy.params.values["speed"] = np.asarray(SPEED_GAIN)
    policy.params.values["turn"] = np.asarray(1.0)
    rng = np.random.default_rng(seed)
    policy.set_flat(rng.uniform(-1.0, 1.0, policy.num_trainable))
    params = embedded_params_from_ncap(policy)
    mask = build_embedding_mask(n_joints)
    return policy, params, mask
