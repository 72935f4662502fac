"""Controller unit tests: constraint/activation primitives, the module
equations, parameter counting, initialization variants, and resizing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncap_swim.errors import (
    ConfigurationError,
    ContractError,
    CorruptedParametersError,
    UnsupportedOperationError,
)
from ncap_swim.policy import (
    SWIM_COMMAND,
    ControlCommand,
    NcapFlags,
    NcapPolicy,
    OscillatorConfig,
    SignConstraint,
    activation,
    constrain,
    count_parameters,
    init_params,
    oscillator_output,
    resize_policy,
    split_proprioception,
)


class TestConstrain:
    def test_excitatory_passes_positive(self):
        assert constrain(1.0, SignConstraint.EXCITATORY) == 1.0

    def test_excitatory_rectifies_negative(self):
        assert constrain(-0.5, SignConstraint.EXCITATORY) == 0.0

    def test_inhibitory_imposes_sign(self):
        assert constrain(1.0, SignConstraint.INHIBITORY) == -1.0

    def test_unconstrained_identity(self):
        assert constrain(0.7, SignConstraint.UNCONSTRAINED) == 0.7

    def test_non_finite_rejected(self):
        with pytest.raises(CorruptedParametersError):
            constrain(float("nan"), SignConstraint.EXCITATORY)
        with pytest.raises(CorruptedParametersError):
            constrain(float("inf"), SignConstraint.INHIBITORY)

    @given(st.floats(min_value=-10.0, max_value=10.0))
    def test_sign_stability_under_fuzzing(self, w):
        # no raw value can flip a contribution class
        assert constrain(w, SignConstraint.EXCITATORY) >= 0.0
        assert constrain(w, SignConstraint.INHIBITORY) <= 0.0


class TestActivation:
    def test_values(self):
        assert activation(0.5) == 0.5
        assert activation(-0.3) == 0.0
        assert activation(0.0) == 0.0

    @given(st.floats(allow_nan=False, allow_infinity=False, width=32))
    def test_rectifier(self, z):
        out = activation(z)
        assert out == max(z, 0.0)


class TestOscillator:
    def test_phase_start_high_dorsal(self):
        cfg = OscillatorConfig(period=60, high_width=30)
        assert oscillator_output(cfg, 0) == (1.0, 0.0)

    def test_antiphase_switch(self):
        cfg = OscillatorConfig(period=60, high_width=30)
        assert oscillator_output(cfg, 30) == (0.0, 1.0)

    def test_periodicity(self):
        cfg = OscillatorConfig(period=60, high_width=30)
        assert oscillator_output(cfg, 60) == (1.0, 0.0)

    def test_invalid_width_rejected(self):
        with pytest.raises(ConfigurationError):
            OscillatorConfig(period=60, high_width=60).validate()
        with pytest.raises(ConfigurationError):
            OscillatorConfig(period=60, high_width=0).validate()

    def test_outputs_binary_and_antiphase_over_full_period(self):
        cfg = OscillatorConfig(period=60, high_width=30)
        for t in range(180):
            o_d, o_v = oscillator_output(cfg, t)
            assert o_d in (0.0, 1.0) and o_v in (0.0, 1.0)
            # o_v(t) = o_d(t + period/2) when the duty cycle is half
            assert o_v == oscillator_output(cfg, t + 30)[0]

    def test_phase_offset_shifts(self):
        cfg = OscillatorConfig(period=60, high_width=30, phase_offset=30)
        assert oscillator_output(cfg, 0) == (0.0, 1.0)


class TestSplitProprioception:
    def test_values(self):
        assert split_proprioception(0.5) == (0.5, 0.0)
        assert split_proprioception(-0.25) == (0.0, 0.25)
        assert split_proprioception(0.0) == (0.0, 0.0)

    def test_out_of_range_clamped(self):
        assert split_proprioception(1.5) == (1.0, 0.0)
        assert split_proprioception(-2.0) == (0.0, 1.0)

    @given(st.floats(min_value=-1.0, max_value=1.0))
    def test_one_sided(self, q):
        q_d, q_v = split_proprioception(q)
        assert q_d >= 0.0 and q_v >= 0.0
        assert q_d * q_v == 0.0  # at most one side active
        assert q_d - q_v == pytest.approx(q)


class TestControlCommand:
    def test_clamped_on_construction(self):
        cmd = ControlCommand(speed=1.5, turn_right=-0.2, turn_left=2.0)
        assert cmd.speed == 1.0
        assert cmd.turn_right == 0.0
        assert cmd.turn_left == 1.0

    def test_swim_default(self):
        assert SWIM_COMMAND.speed == 1.0
        assert SWIM_COMMAND.turn_right == 0.0
        assert SWIM_COMMAND.turn_left == 0.0


class TestModuleEquations:
    """Hand-evaluated oracles for the per-module forward pass at unit init.

    Dorsal chain for q_prev = 0.5, s = 1: gate = -1*(1-1) = 0,
    b_d = relu(1*0.5 + 0) = 0.5, b_v = relu(1*0 + 0) = 0,
    m_d = relu(1*0.5 - 1*0) = 0.5, m_v = relu(1*0 - 1*0.5) = 0,
    output = min(0.5, 1) - min(0, 1) = 0.5.
    """

    @pytest.fixture
    def policy(self):
        return NcapPolicy(5)

    def test_dorsal_half(self, policy):
        assert policy.module_output(2, 0.5) == pytest.approx(0.5)

    def test_ventral_saturation(self, policy):
        # q_prev = -1: b_v = 1, m_v = 1, output = 0 - min(1, 1) = -1
        assert policy.module_output(2, -1.0) == pytest.approx(-1.0)

    def test_speed_gate_zeroes(self, policy):
        # s = 0: gate = -1, b_d = relu(0.5 - 1) = 0, output = 0
        stopped = ControlCommand(speed=0.0)
        assert policy.module_output(2, 0.5, stopped) == 0.0

    def test_first_module_dorsal(self, policy):
        assert policy.first_module_output(1.0, 0.0) == pytest.approx(1.0)

    def test_first_module_ventral(self, policy):
        assert policy.first_module_output(0.0, 1.0) == pytest.approx(-1.0)

    def test_turn_substitutes_for_oscillation(self, policy):
        turn = ControlCommand(speed=1.0, turn_right=1.0)
        assert policy.first_module_output(0.0, 0.0, turn) == pytest.approx(1.0)

    def test_module_index_bounds(self, policy):
        with pytest.raises(ContractError):
            policy.module_output(1, 0.0)
        with pytest.raises(ContractError):
            policy.module_output(6, 0.0)


class TestPolicyForward:
    def test_straight_body_oscillator_only(self):
        policy = NcapPolicy(5)
        action = policy.act(np.zeros(5))
        np.testing.assert_array_equal(action, [1.0, 0.0, 0.0, 0.0, 0.0])

    def test_uniform_bend(self):
        policy = NcapPolicy(5)
        action = policy.act(np.full(5, 0.5))
        np.testing.assert_allclose(action, [1.0, 0.5, 0.5, 0.5, 0.5])

    def test_full_speed_gating(self):
        policy = NcapPolicy(5)
        stopped = ControlCommand(speed=0.0)
        action = policy.act(np.full(5, 0.7), stopped)
        np.testing.assert_array_equal(action, np.zeros(5))

    def test_obs_length_mismatch(self):
        policy = NcapPolicy(5)
        with pytest.raises(ContractError):
            policy.act(np.zeros(4))

    def test_counter_advances_oscillator(self):
        policy = NcapPolicy(5)
        first = [policy.act(np.zeros(5))[0] for _ in range(60)]
        # half period high, half period low, starting high
        assert first[:30] == [1.0] * 30
        assert first[30:] == [-1.0] * 30
        policy.reset()
        assert policy.act(np.zeros(5))[0] == 1.0

    def test_last_joint_never_consumed(self):
        # module i reads joint i-1, so obs[N-1] cannot influence the action
        policy = NcapPolicy(5)
        obs = np.array([0.3, -0.2, 0.1, 0.4, 0.9])
        a1 = policy.act(obs)
        policy.reset()
        obs2 = obs.copy()
        obs2[-1] = -0.9
        a2 = policy.act(obs2)
        np.testing.assert_array_equal(a1, a2)

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(0, 2**31 - 1),
        share=st.booleans(),
        sign=st.booleans(),
        unit=st.booleans(),
        obs_seed=st.integers(0, 2**31 - 1),
        speed=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_boundedness(self, seed, share, sign, unit, obs_seed, speed):
        flags = NcapFlags(share_weights=share, sign_constraints=sign, unit_init=unit)
        policy = NcapPolicy(5, flags=flags, seed=seed)
        rng = np.random.default_rng(obs_seed)
        obs = rng.uniform(-1.0, 1.0, 5)
        cmd = ControlCommand(speed=speed)
        for _ in range(3):
            action = policy.act(obs, cmd)
            assert np.all(action >= -1.0) and np.all(action <= 1.0)

    def test_dorsoventral_antisymmetry_at_unit_init(self):
        policy = NcapPolicy(5)
        rng = np.random.default_rng(7)
        for _ in range(50):
            obs = rng.uniform(-1.0, 1.0, 5)
            o_d, o_v = float(rng.integers(0, 2)), float(rng.integers(0, 2))
            r, l = rng.uniform(0.0, 1.0, 2)
            a = policy.forward_with_oscillator(
                obs, o_d, o_v, ControlCommand(1.0, r, l)
            )
            b = policy.forward_with_oscillator(
                -obs, o_v, o_d, ControlCommand(1.0, l, r)
            )
            np.testing.assert_array_equal(a, -b)

    def test_speed_gating_monotone_at_unit_init(self):
        policy = NcapPolicy(5)
        rng = np.random.default_rng(3)
        speeds = np.linspace(1.0, 0.0, 11)
        for _ in range(20):
            obs = rng.uniform(-1.0, 1.0, 5)
            prev = None
            for s in speeds:
                mag = np.abs(
                    policy.forward_with_oscillator(obs, 1.0, 0.0, ControlCommand(s))
                )
                if prev is not None:
                    assert np.all(mag <= prev + 1e-12)
                prev = mag

    def test_sharing_consistency_under_permutation(self):
        # modules >= 2 apply one shared map to their anterior joint angle,
        # so permuting those inputs permutes the corresponding outputs
        policy = NcapPolicy(5)
        rng = np.random.default_rng(11)
        obs = rng.uniform(-1.0, 1.0, 5)
        base = policy.forward_with_oscillator(obs, 1.0, 0.0)
        for _ in range(10):
            perm = rng.permutation(4)
            shuffled = obs.copy()
            shuffled[:4] = obs[perm]
            out = policy.forward_with_oscillator(shuffled, 1.0, 0.0)
            assert sorted(out[1:]) == pytest.approx(sorted(base[1:]))

    def test_sign_constrained_weights_keep_class(self):
        # fuzz raw parameters; materialized arrays must keep their sign class
        rng = np.random.default_rng(23)
        policy = NcapPolicy(5)
        for _ in range(50):
            policy.set_flat(rng.uniform(-10.0, 10.0, 4))
            w = policy._w
            assert np.all(w["prop_d"] >= 0) and np.all(w["prop_v"] >= 0)
            assert np.all(w["ipsi_d"] >= 0) and np.all(w["ipsi_v"] >= 0)
            assert w["osc_d"] >= 0 and w["osc_v"] >= 0
            assert np.all(w["contra_d"] <= 0) and np.all(w["contra_v"] <= 0)
            assert w["speed"] <= 0


class TestInitAndCounts:
    def test_shared_unit_init(self):
        params = init_params(5, NcapFlags(), seed=123)
        flat = params.get_flat()
        assert flat.shape == (4,)
        np.testing.assert_array_equal(flat, np.ones(4))

    def test_unshared_count(self):
        flags = NcapFlags(share_weights=False)
        params = init_params(5, flags, seed=0)
        assert params.get_flat().shape == (30,)

    def test_unit_init_seed_independent(self):
        a = init_params(5, NcapFlags(), seed=0).get_flat()
        b = init_params(5, NcapFlags(), seed=99).get_flat()
        np.testing.assert_array_equal(a, b)

    def test_random_magnitudes_in_unit_interval(self):
        flags = NcapFlags(unit_init=False)
        for seed in range(20):
            flat = init_params(5, flags, seed=seed).get_flat()
            assert np.all(flat >= 0.0) and np.all(flat <= 1.0)

    def test_sign_ablation_flips_signs(self):
        flags = NcapFlags(sign_constraints=False)
        flats = np.array(
            [init_params(5, flags, seed=s).get_flat() for s in range(64)]
        )
        assert np.all(np.abs(flats) == 1.0)  # unit magnitudes survive
        assert (flats > 0).any() and (flats < 0).any()

    def test_count_parameters(self):
        assert count_parameters(5, share_weights=True) == 4
        assert count_parameters(5, share_weights=False) == 30
        assert count_parameters(3, share_weights=False) == 18

    @given(st.integers(2, 12), st.booleans())
    def test_count_matches_allocation(self, n, share):
        flags = NcapFlags(share_weights=share)
        policy = NcapPolicy(n, flags=flags, seed=0)
        assert policy.get_flat().size == count_parameters(n, share)
        assert policy.num_trainable == count_parameters(n, share)

    def test_flat_round_trip(self):
        policy = NcapPolicy(5, flags=NcapFlags(share_weights=False), seed=4)
        flat = policy.get_flat()
        vals = np.linspace(-1.0, 1.0, flat.size)
        policy.set_flat(vals)
        np.testing.assert_array_equal(policy.get_flat(), vals)

    def test_set_flat_wrong_size(self):
        policy = NcapPolicy(5)
        with pytest.raises(ContractError):
            policy.set_flat(np.zeros(5))

    def test_non_finite_params_rejected(self):
        policy = NcapPolicy(5)
        with pytest.raises(CorruptedParametersError):
            policy.set_flat(np.array([1.0, np.nan, 1.0, 1.0]))


class TestResize:
    def test_grow_keeps_weights(self):
        policy = NcapPolicy(5)
        policy.set_flat(np.array([1.1, 0.9, 1.2, 0.8]))
        grown = resize_policy(policy, 8)
        assert grown.n_joints == 8
        np.testing.assert_array_equal(grown.get_flat(), policy.get_flat())

    def test_identity_resize_behaviour(self):
        policy = NcapPolicy(5, seed=0)
        same = resize_policy(policy, 5)
        rng = np.random.default_rng(2)
        for t in range(90):
            obs = rng.uniform(-1.0, 1.0, 5)
            np.testing.assert_array_equal(policy.act(obs), same.act(obs))

    def test_resize_consistency_after_training_step(self):
        policy = NcapPolicy(5)
        policy.set_flat(np.array([1.05, 0.97, 1.1, 0.97]))
        resized = resize_policy(policy, 5)
        rng = np.random.default_rng(5)
        obs = rng.uniform(-1.0, 1.0, 5)
        np.testing.assert_array_equal(policy.act(obs), resized.act(obs))

    def test_unshared_rejected(self):
        policy = NcapPolicy(5, flags=NcapFlags(share_weights=False), seed=0)
        with pytest.raises(UnsupportedOperationError):
            resize_policy(policy, 6)

    def test_bad_target_rejected(self):
        with pytest.raises(ConfigurationError):
            resize_policy(NcapPolicy(5), 1)


class TestSpec:
    def test_spec_round_trips_flags(self):
        flags = NcapFlags(share_weights=False, sign_constraints=False, unit_init=False)
        policy = NcapPolicy(4, flags=flags, seed=9)
        spec = policy.spec()
        assert spec["kind"] == "ncap"
        assert spec["n_joints"] == 4
        assert spec["share_weights"] is False
        assert spec["sign_constraints"] is False
        assert spec["unit_init"] is False
        assert spec["oscillator"]["period"] == 60
