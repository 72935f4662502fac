"""Policy construction from specs and JSON checkpoint persistence.

A checkpoint is a flat JSON object: the policy's spec fields (kind,
architecture flags, oscillator settings) plus a "params" blob mapping
parameter names to scalars or nested lists. Loaders reject files whose
spec does not match what the caller asked for.
"""

from __future__ import annotations

import json

import numpy as np

from .baselines import (
    EmbeddedParams,
    EmbeddedPolicy,
    MlpPolicy,
)
from .errors import CheckpointError, ConfigurationError
from .policy import NcapFlags, NcapParams, NcapPolicy, OscillatorConfig


def _oscillator_from(spec: dict) -> OscillatorConfig:
    osc = spec.get("oscillator", {})
    return OscillatorConfig(
        period=int(osc.get("period", 60)),
        high_width=int(osc.get("high_width", 30)),
        phase_offset=int(osc.get("phase_offset", 0)),
    )


def build_policy(spec: dict, seed=0):
    """Fresh policy from a spec dict (no weights loaded)."""
    kind = spec.get("kind")
    n = int(spec.get("n_joints", 5))
    if kind == "ncap":
        flags = NcapFlags(
            share_weights=bool(spec.get("share_weights", True)),
            sign_constraints=bool(spec.get("sign_constraints", True)),
            unit_init=bool(spec.get("unit_init", True)),
        )
        return NcapPolicy(n, flags=flags, oscillator=_oscillator_from(spec), seed=seed)
    if kind == "mlp":
        return MlpPolicy(n, tuple(spec.get("hidden_dims", (256, 256))), seed=seed)
    if kind == "embedded":
        return EmbeddedPolicy(
            n,
            dense=bool(spec.get("dense", True)),
            oscillator=_oscillator_from(spec),
            seed=seed,
        )
    raise ConfigurationError(f"unknown policy kind {kind!r}")


def save_checkpoint(policy, path) -> None:
    blob = dict(policy.spec())
    if policy.kind == "ncap":
        blob["params"] = policy.params.to_jsonable()
    else:
        blob["params"] = {
            **{f"W{i}": w.tolist() for i, w in enumerate(policy.params.weights)},
            **{f"b{i}": b.tolist() for i, b in enumerate(policy.params.biases)},
        }
    with open(path, "w") as f:
        json.dump(blob, f)


def load_checkpoint(path, expect: dict | None = None):
    """Load a policy with weights. expect: spec fields that must match."""
    try:
        with open(path) as f:
            blob = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if "kind" not in blob or "params" not in blob:
        raise CheckpointError(f"checkpoint {path} missing kind/params fields")
    if expect:
        for key, want in expect.items():
            have = blob.get(key)
            if have != want:
                raise CheckpointError(
                    f"checkpoint {path}: field {key!r} is {have!r}, expected {want!r}"
                )
    spec = {k: v for k, v in blob.items() if k != "params"}
    policy = build_policy(spec)
    params = blob["params"]
    if policy.kind == "ncap":
        policy.params = NcapParams.from_jsonable(
            policy.n_joints, policy.flags.share_weights, params
        )
        policy._materialize()
    else:
        n_layers = len(policy.params.weights)
        try:
            weights = [
                np.asarray(params[f"W{i}"], dtype=np.float64) for i in range(n_layers)
            ]
            biases = [
                np.asarray(params[f"b{i}"], dtype=np.float64) for i in range(n_layers)
            ]
        except KeyError as e:
            raise CheckpointError(f"checkpoint {path} missing layer array {e}") from e
        for have, want in zip(weights, policy.params.weights):
            if have.shape != want.shape:
                raise CheckpointError(
                    f"checkpoint {path}: layer shape {have.shape} != {want.shape}"
                )
        if policy.kind == "embedded":
            policy.params = EmbeddedParams(weights, biases)
        else:
            policy.params.weights = weights
            policy.params.biases = biases
    return policy
