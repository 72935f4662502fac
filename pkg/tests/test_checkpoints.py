"""Checkpoint format tests: JSON round trips, flag-mismatch rejection, and
corrupted-file handling."""

import json

import numpy as np
import pytest

from ncap_swim.baselines import EmbeddedPolicy, MlpPolicy
from ncap_swim.checkpoints import build_policy, load_checkpoint, save_checkpoint
from ncap_swim.errors import (
    CheckpointError,
    ConfigurationError,
    CorruptedParametersError,
)
from ncap_swim.policy import NcapFlags, NcapPolicy


class TestBuildPolicy:
    def test_ncap_from_spec(self):
        policy = build_policy(
            {"kind": "ncap", "n_joints": 6, "share_weights": False}, seed=3
        )
        assert policy.kind == "ncap"
        assert policy.n_joints == 6
        assert not policy.flags.share_weights

    def test_mlp_from_spec(self):
        policy = build_policy({"kind": "mlp", "n_joints": 5, "hidden_dims": [8, 8]})
        assert policy.kind == "mlp"
        assert policy.cfg.hidden_dims == (8, 8)

    def test_embedded_from_spec(self):
        policy = build_policy({"kind": "embedded", "n_joints": 5, "dense": False})
        assert policy.kind == "embedded"
        assert not policy.dense

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            build_policy({"kind": "transformer", "n_joints": 5})


class TestRoundTrips:
    def test_ncap_round_trip(self, tmp_path):
        policy = NcapPolicy(5)
        policy.set_flat(np.array([1.1, 0.9, 1.3, 0.7]))
        path = tmp_path / "ncap.json"
        save_checkpoint(policy, path)
        loaded = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.get_flat(), policy.get_flat())
        assert loaded.flags == policy.flags
        obs = np.array([0.2, -0.4, 0.6, 0.0, -0.1])
        np.testing.assert_array_equal(loaded.act(obs), policy.act(obs))

    def test_unshared_round_trip(self, tmp_path):
        policy = NcapPolicy(
            4, flags=NcapFlags(share_weights=False, sign_constraints=False), seed=8
        )
        path = tmp_path / "unshared.json"
        save_checkpoint(policy, path)
        loaded = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.get_flat(), policy.get_flat())

    def test_mlp_round_trip(self, tmp_path):
        policy = MlpPolicy(5, hidden_dims=(8, 4), seed=2)
        path = tmp_path / "mlp.json"
        save_checkpoint(policy, path)
        loaded = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.get_flat(), policy.get_flat())

    def test_embedded_round_trip(self, tmp_path):
        policy = EmbeddedPolicy(5, dense=True, seed=4)
        path = tmp_path / "embedded.json"
        save_checkpoint(policy, path)
        loaded = load_checkpoint(path)
        np.testing.assert_allclose(loaded.get_flat(), policy.get_flat())


class TestRejection:
    def test_flag_mismatch_rejected(self, tmp_path):
        path = tmp_path / "shared.json"
        save_checkpoint(NcapPolicy(5), path)
        with pytest.raises(CheckpointError):
            load_checkpoint(path, expect={"share_weights": False})
        load_checkpoint(path, expect={"share_weights": True})  # matching is fine

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "garbage.json"
        path.write_text("{not json")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_missing_fields(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text(json.dumps({"kind": "ncap"}))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_non_finite_params_rejected(self, tmp_path):
        path = tmp_path / "nan.json"
        save_checkpoint(NcapPolicy(5), path)
        blob = json.loads(path.read_text())
        blob["params"]["osc"] = float("nan")
        path.write_text(json.dumps(blob))
        with pytest.raises(CorruptedParametersError):
            load_checkpoint(path)

    def test_wrong_layer_shape_rejected(self, tmp_path):
        path = tmp_path / "mlp.json"
        save_checkpoint(MlpPolicy(5, hidden_dims=(4,), seed=0), path)
        blob = json.loads(path.read_text())
        blob["params"]["W0"] = [[1.0, 2.0], [3.0, 4.0]]
        path.write_text(json.dumps(blob))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
