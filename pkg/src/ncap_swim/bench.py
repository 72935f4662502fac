"""Kernel benchmark: numba twins vs. pure-numpy twins.

Run as ``python -m ncap_swim.bench``. Times the two hot kernels (policy
step, physics substeps) against both implementations directly, then a full
episode on the active backend. Works with numba absent (numpy rows only).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from .backend import BACKEND, active_backend, jit
from .env import SwimmerConfig, SwimmerEnv, rollout
from .kernels import (
    _ncap_step_loops,
    _ncap_step_numpy,
    _swim_substeps_loops,
    _swim_substeps_numpy,
)
from .policy import NcapFlags, NcapPolicy, init_params


def _time(fn, repeats: int) -> float:
    repeats = max(1, repeats)
    """Median seconds per call over 5 batches."""
    batches = []
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        batches.append((time.perf_counter() - t0) / repeats)
    return sorted(batches)[len(batches) // 2]


def _policy_args(n_joints: int):
    rng = np.random.default_rng(0)
    params = init_params(n_joints, NcapFlags(), seed=0)
    policy = NcapPolicy(n_joints, params=params)
    w = policy._w
    obs = rng.uniform(-1, 1, n_joints)
    out = (
        np.empty(n_joints),
        np.empty(n_joints),
        np.empty(n_joints),
        np.empty(n_joints),
        np.empty(n_joints),
    )
    return (
        w["prop_d"], w["prop_v"], w["ipsi_d"], w["ipsi_v"],
        w["contra_d"], w["contra_v"], w["osc_d"], w["osc_v"],
        w["turn"], w["speed"],
        obs, 1.0, 0.0, 1.0, 0.0, 0.0,
    ) + out


def _substep_args(cfg: SwimmerConfig):
    env = SwimmerEnv(cfg)
    env.reset(seed=0)
    s = env.state
    accel = np.linspace(-1, 1, cfg.n_joints) * cfg.max_joint_accel

    def make():
        return (
            s.phi.copy(), s.phi_dot.copy(), s.com.copy(), s.v_com.copy(),
            accel.copy(), s.heading, s.omega,
            cfg.action_repeat, cfg.physics_dt, cfg.link_length, cfg.link_mass,
            cfg.joint_limit, cfg.joint_damping, cfg.drag_normal, cfg.drag_tangential,
        )

    return make


def run(repeats: int = 2000) -> list[tuple[str, str, float]]:
    cfg = SwimmerConfig()
    rows = []

    pol = _policy_args(cfg.n_joints)
    rows.append(("policy step", "numpy", _time(lambda: _ncap_step_numpy(*pol), repeats)))

    sub = _substep_args(cfg)
    rows.append(
        ("physics substeps", "numpy", _time(lambda: _swim_substeps_numpy(*sub()), repeats // 4))
    )

    if BACKEND == "numba":
        step_nb = jit(_ncap_step_loops)
        swim_nb = jit(_swim_substeps_loops)
        step_nb(*pol)  # compile outside the timed region
        swim_nb(*sub())
        rows.append(("policy step", "numba", _time(lambda: step_nb(*pol), repeats)))
        rows.append(
            ("physics substeps", "numba", _time(lambda: swim_nb(*sub()), repeats // 4))
        )

    policy = NcapPolicy(cfg.n_joints, params=init_params(cfg.n_joints, NcapFlags(), seed=0))
    rollout(policy, cfg, seed=0)  # warm the active kernels
    t0 = time.perf_counter()
    rollout(policy, cfg, seed=0)
    rows.append(("full episode", active_backend(), time.perf_counter() - t0))
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args(argv)
    print(f"active backend: {active_backend()}")
    for name, impl, seconds in run(args.repeats):
        print(f"{name:18s} {impl:6s} {seconds * 1e6:10.2f} us/call")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
