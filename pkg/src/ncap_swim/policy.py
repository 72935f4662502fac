"""Sign-constrained modular swimmer policy.

The controller is a chain of N identical modules, one per joint. Module 1
is driven by an antiphase square-wave oscillator pair; module i >= 2 senses
the normalized angle of joint i-1 (its anterior neighbour) split into
positive/negative rectified channels. Each module has a dorsal and a
ventral premotor cell feeding a dorsal and a ventral muscle cell, and emits
joint acceleration = min(m_d, 1) - min(m_v, 1), always in [-1, 1].

Connection signs are enforced structurally: excitatory weights pass through
max(w, 0), inhibitory through -max(w, 0), so no parameter setting can flip
a connection's sign while constraints are on. With weight sharing on, one
scalar per connection type is shared across all modules and both sides.

Command channels: speed s in [0, 1] gates all premotor cells through a
fixed inhibitory weight scaled by (1 - s); turn commands r, l add direct
excitatory drive to the first module's dorsal/ventral premotor cells. The
swim task fixes s = 1, r = l = 0, so those two fixed weights are excluded
from the trainable set.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    ConfigurationError,
    ContractError,
    CorruptedParametersError,
    UnsupportedOperationError,
)

logger = logging.getLogger(__name__)

PARAM_NAMES = ("prop", "ipsi", "contra", "osc", "speed", "turn")
TRAINABLE_NAMES = ("prop", "ipsi", "contra", "osc")

# connection type -> sign class
EXCITATORY_NAMES = frozenset({"prop", "ipsi", "osc", "turn"})
INHIBITORY_NAMES = frozenset({"contra", "speed"})


class SignConstraint(enum.Enum):
    EXCITATORY = "excitatory"
    INHIBITORY = "inhibitory"
    UNCONSTRAINED = "unconstrained"


def constrain(w, mode: SignConstraint):
    """Map a raw weight (scalar or array) to its sign-constrained value."""
    w = np.asarray(w, dtype=np.float64)
    if not np.isfinite(w).all():
        raise CorruptedParametersError("non-finite weight passed to constrain()")
    if mode is SignConstraint.EXCITATORY:
        out = np.maximum(w, 0.0)
    elif mode is SignConstraint.INHIBITORY:
        out = -np.maximum(w, 0.0)
    elif mode is SignConstraint.UNCONSTRAINED:
        out = w.copy()
    else:
        raise ContractError(f"unknown sign constraint {mode!r}")
    return out if out.ndim else float(out)


def activation(z):
    """Rectifier used by premotor and muscle cells."""
    return np.maximum(np.asarray(z, dtype=np.float64), 0.0)


def split_proprioception(q):
    """Split normalized joint angles into positive/negative channels.

    Values outside [-1, 1] are clamped first (the simulator guarantees the
    range; the clamp only guards float drift).
    """
    q = np.asarray(q, dtype=np.float64)
    if np.any(np.abs(q) > 1.0):
        logger.warning("proprioceptive input outside [-1, 1], clamping")
        q = np.clip(q, -1.0, 1.0)
    return np.maximum(q, 0.0), np.maximum(-q, 0.0)


@dataclass(frozen=True)
class OscillatorConfig:
    """Antiphase square-wave pair with integer-timestep period."""

    period: int = 60
    high_width: int = 30
    phase_offset: int = 0

    def __post_init__(self):
        if self.period < 2:
            raise ConfigurationError("oscillator period must be >= 2 timesteps")
        if not (0 < self.high_width < self.period):
            raise ConfigurationError(
                "oscillator high_width must satisfy 0 < high_width < period"
            )

    def outputs(self, t: int) -> tuple[float, float]:
        phase_d = (t + self.phase_offset) % self.period
        phase_v = (t + self.phase_offset + self.period // 2) % self.period
        o_d = 1.0 if phase_d < self.high_width else 0.0
        o_v = 1.0 if phase_v < self.high_width else 0.0
        return o_d, o_v


def oscillator_output(cfg: OscillatorConfig, t: int) -> tuple[float, float]:
    """Dorsal/ventral oscillator levels at timestep t (ventral lags by period//2)."""
    return cfg.outputs(t)


@dataclass(frozen=True)
class ControlCommand:
    """Speed and turn commands, each clamped to [0, 1]."""

    speed: float = 1.0
    turn_right: float = 0.0
    turn_left: float = 0.0

    def __post_init__(self):
        for name in ("speed", "turn_right", "turn_left"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, min(max(v, 0.0), 1.0))


SWIM_COMMAND = ControlCommand(speed=1.0, turn_right=0.0, turn_left=0.0)


@dataclass(frozen=True)
class NcapFlags:
    share_weights: bool = True
    sign_constraints: bool = True
    unit_init: bool = True


@dataclass
class NcapParams:
    """Raw (pre-constraint) weights.

    Shared layout: every name maps to a scalar array. Unshared layout:
      prop   (N-1, 2)  modules 2..N x (dorsal, ventral)
      ipsi   (N, 2)    per module x muscle side
      contra (N, 2)
      osc    (2,)      dorsal, ventral
      speed  ()        fixed, not trainable
      turn   ()        fixed, not trainable
    The trainable flat vector concatenates prop, ipsi, contra, osc in
    C order, giving 4 entries shared and 6N unshared.
    """

    n_joints: int
    shared: bool
    values: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "NcapParams":
        return NcapParams(
            self.n_joints, self.shared, {k: v.copy() for k, v in self.values.items()}
        )

    def get_flat(self) -> np.ndarray:
        return np.concatenate(
            [np.atleast_1d(self.values[name]).ravel() for name in TRAINABLE_NAMES]
        ).astype(np.float64)

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        expected = count_parameters(self.n_joints, self.shared)
        if flat.shape != (expected,):
            raise ContractError(
                f"flat vector must have shape ({expected},), got {flat.shape}"
            )
        pos = 0
        for name in TRAINABLE_NAMES:
            arr = self.values[name]
            size = arr.size
            chunk = flat[pos : pos + size].reshape(arr.shape)
            self.values[name] = chunk.copy()
            pos += size

    def to_jsonable(self) -> dict:
        return {k: v.tolist() for k, v in self.values.items()}

    @classmethod
    def from_jsonable(cls, n_joints: int, shared: bool, blob: dict) -> "NcapParams":
        missing = set(PARAM_NAMES) - set(blob)
        if missing:
            raise ContractError(f"parameter blob missing names: {sorted(missing)}")
        values = {k: np.asarray(blob[k], dtype=np.float64) for k in PARAM_NAMES}
        return cls(n_joints, shared, values)


def count_parameters(n_joints: int, share_weights: bool) -> int:
    """Trainable parameter count for the swim task.

    Shared: one scalar each for prop, ipsi, contra, osc. Unshared:
    2(N-1) prop + 2N ipsi + 2N contra + 2 osc = 6N. The fixed speed and
    turn weights multiply zero inputs under the swim command and are not
    counted.
    """
    if n_joints < 2:
        raise ConfigurationError("n_joints must be >= 2")
    if share_weights:
        return 4
    return 2 * (n_joints - 1) + 2 * n_joints + 2 * n_joints + 2


def _param_shapes(n_joints: int, shared: bool) -> dict[str, tuple]:
    if shared:
        return {name: () for name in PARAM_NAMES}
    return {
        "prop": (n_joints - 1, 2),
        "ipsi": (n_joints, 2),
        "contra": (n_joints, 2),
        "osc": (2,),
        "speed": (),
        "turn": (),
    }


def init_params(n_joints: int, flags: NcapFlags, seed: int | None = 0) -> NcapParams:
    """Draw raw weights.

    unit_init on: all magnitudes 1. Off: magnitudes ~ Uniform[0, 1).
    sign_constraints off: each raw weight's sign is flipped with
    probability 1/2 (with constraints on, raw values stay non-negative and
    the constraint applies the sign). Draw order is fixed (names in
    PARAM_NAMES order, magnitudes before signs) so results are
    reproducible for a given seed.
    """
    shapes = _param_shapes(n_joints, flags.share_weights)
    rng = np.random.default_rng(seed)
    values: dict[str, np.ndarray] = {}
    for name in PARAM_NAMES:
        shape = shapes[name]
        if flags.unit_init:
            mag = np.ones(shape, dtype=np.float64)
        else:
            mag = rng.uniform(0.0, 1.0, size=shape)
        if not flags.sign_constraints:
            sign = rng.integers(0, 2, size=shape) * 2.0 - 1.0
            mag = mag * sign
        values[name] = np.asarray(mag, dtype=np.float64)
    return NcapParams(n_joints, flags.share_weights, values)


def _sign_mode(name: str, constrained: bool) -> SignConstraint:
    if not constrained:
        return SignConstraint.UNCONSTRAINED
    return (
        SignConstraint.EXCITATORY
        if name in EXCITATORY_NAMES
        else SignConstraint.INHIBITORY
    )


class NcapPolicy:
    """Modular swimmer controller with an internal timestep counter.

    A single instance is not safe for concurrent stepping: the counter and
    the activation buffers are per-instance state.
    """

    kind = "ncap"

    def __init__(
        self,
        n_joints: int = 5,
        params: NcapParams | None = None,
        flags: NcapFlags | None = None,
        oscillator: OscillatorConfig | None = None,
        seed: int | None = 0,
    ):
        if n_joints < 2:
            raise ConfigurationError("n_joints must be >= 2")
        self.n_joints = int(n_joints)
        self.flags = flags if flags is not None else NcapFlags()
        self.oscillator = oscillator if oscillator is not None else OscillatorConfig()
        if params is None:
            params = init_params(self.n_joints, self.flags, seed)
        if params.n_joints != self.n_joints:
            raise ContractError("params sized for a different joint count")
        if params.shared != self.flags.share_weights:
            raise ContractError("params sharing layout does not match flags")
        self.params = params
        self.timestep = 0
        self._warned_obs = False
        self._materialize()

    # -- weight plumbing ----------------------------------------------------

    def _materialize(self) -> None:
        """Expand raw params into per-module sign-constrained arrays."""
        n = self.n_joints
        vals = self.params.values
        for name in PARAM_NAMES:
            if not np.isfinite(vals[name]).all():
                raise CorruptedParametersError(f"non-finite raw weight in {name!r}")
        constrained = self.flags.sign_constraints

        def c(name, raw):
            return constrain(raw, _sign_mode(name, constrained))

        w = {}
        if self.flags.share_weights:
            prop = c("prop", vals["prop"])
            w["prop_d"] = np.full(n, prop)
            w["prop_v"] = np.full(n, prop)
            for name in ("ipsi", "contra"):
                v = c(name, vals[name])
                w[name + "_d"] = np.full(n, v)
                w[name + "_v"] = np.full(n, v)
            osc = c("osc", vals["osc"])
            w["osc_d"] = float(osc)
            w["osc_v"] = float(osc)
        else:
            prop = c("prop", vals["prop"])
            w["prop_d"] = np.concatenate(([0.0], prop[:, 0]))
            w["prop_v"] = np.concatenate(([0.0], prop[:, 1]))
            for name in ("ipsi", "contra"):
                v = c(name, vals[name])
                w[name + "_d"] = np.ascontiguousarray(v[:, 0])
                w[name + "_v"] = np.ascontiguousarray(v[:, 1])
            osc = c("osc", vals["osc"])
            w["osc_d"] = float(osc[0])
            w["osc_v"] = float(osc[1])
        w["prop_d"][0] = 0.0  # module 1 has no anterior joint
        w["prop_v"][0] = 0.0
        w["speed"] = float(c("speed", vals["speed"]))
        w["turn"] = float(c("turn", vals["turn"]))
        self._w = w

    @property
    def num_trainable(self) -> int:
        return count_parameters(self.n_joints, self.flags.share_weights)

    def get_flat(self) -> np.ndarray:
        return self.params.get_flat()

    def set_flat(self, flat: np.ndarray) -> None:
        self.params.set_flat(flat)
        self._materialize()

    # -- forward passes -----------------------------------------------------

    def reset(self) -> None:
        self.timestep = 0

    def act(self, obs, cmd: ControlCommand | None = None) -> np.ndarray:
        """One control step: read the oscillator, advance the counter by one."""
        o_d, o_v = self.oscillator.outputs(self.timestep)
        action = self.forward_with_oscillator(obs, o_d, o_v, cmd)
        self.timestep += 1
        return action

    def forward_with_oscillator(
        self, obs, o_d: float, o_v: float, cmd: ControlCommand | None = None
    ) -> np.ndarray:
        """Forward pass with explicit oscillator levels; no counter side effects."""
        cmd = cmd if cmd is not None else SWIM_COMMAND
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.n_joints,):
            raise ContractError(
                f"observation must have shape ({self.n_joints},), got {obs.shape}"
            )
        if np.any(np.abs(obs) > 1.0):
            if not self._warned_obs:
                logger.warning("observation outside [-1, 1], clamping")
                self._warned_obs = True
            obs = np.clip(obs, -1.0, 1.0)
        n = self.n_joints
        action = np.empty(n)
        b_d = np.empty(n)
        b_v = np.empty(n)
        m_d = np.empty(n)
        m_v = np.empty(n)
        w = self._w
        kernels.ncap_step(
            w["prop_d"],
            w["prop_v"],
            w["ipsi_d"],
            w["ipsi_v"],
            w["contra_d"],
            w["contra_v"],
            w["osc_d"],
            w["osc_v"],
            w["turn"],
            w["speed"],
            np.ascontiguousarray(obs),
            float(o_d),
            float(o_v),
            cmd.speed,
            cmd.turn_right,
            cmd.turn_left,
            action,
            b_d,
            b_v,
            m_d,
            m_v,
        )
        self.last_activations = {"b_d": b_d, "b_v": b_v, "m_d": m_d, "m_v": m_v}
        return action

    # -- reference per-module paths (used by tests as an independent route) --

    def module_output(self, i: int, q_prev: float, cmd: ControlCommand | None = None):
        """Output of module i (2..N) given its anterior joint's normalized angle."""
        if not 2 <= i <= self.n_joints:
            raise ContractError(f"module index must be in 2..{self.n_joints}, got {i}")
        cmd = cmd if cmd is not None else SWIM_COMMAND
        w = self._w
        gate = w["speed"] * (1.0 - cmd.speed)
        q_d = max(q_prev, 0.0)
        q_v = max(-q_prev, 0.0)
        b_d = max(w["prop_d"][i - 1] * q_d + gate, 0.0)
        b_v = max(w["prop_v"][i - 1] * q_v + gate, 0.0)
        return self._muscle_difference(i - 1, b_d, b_v)

    def first_module_output(
        self, o_d: float, o_v: float, cmd: ControlCommand | None = None
    ):
        """Output of the oscillator-driven module 1."""
        cmd = cmd if cmd is not None else SWIM_COMMAND
        w = self._w
        gate = w["speed"] * (1.0 - cmd.speed)
        b_d = max(w["osc_d"] * o_d + w["turn"] * cmd.turn_right + gate, 0.0)
        b_v = max(w["osc_v"] * o_v + w["turn"] * cmd.turn_left + gate, 0.0)
        return self._muscle_difference(0, b_d, b_v)

    def _muscle_difference(self, idx: int, b_d: float, b_v: float) -> float:
        w = self._w
        m_d = max(w["ipsi_d"][idx] * b_d + w["contra_d"][idx] * b_v, 0.0)
        m_v = max(w["ipsi_v"][idx] * b_v + w["contra_v"][idx] * b_d, 0.0)
        return min(m_d, 1.0) - min(m_v, 1.0)

    # -- misc ----------------------------------------------------------------

    def spec(self) -> dict:
        return {
            "kind": "ncap",
            "n_joints": self.n_joints,
            "share_weights": self.flags.share_weights,
            "sign_constraints": self.flags.sign_constraints,
            "unit_init": self.flags.unit_init,
            "oscillator": {
                "period": self.oscillator.period,
                "high_width": self.oscillator.high_width,
                "phase_offset": self.oscillator.phase_offset,
            },
        }


def unshared_unconstrained_copy(policy: NcapPolicy) -> NcapPolicy:
    """Equivalent policy with sharing and sign constraints removed.

    The copy's raw weights are the source's constrained values expanded to
    per-module tables, so the forward pass is unchanged. This is the
    canonical route into the masked-MLP embedding.
    """
    n = policy.n_joints
    w = policy._w
    values = {
        "prop": np.column_stack((w["prop_d"][1:], w["prop_v"][1:])),
        "ipsi": np.column_stack((w["ipsi_d"], w["ipsi_v"])),
        "contra": np.column_stack((w["contra_d"], w["contra_v"])),
        "osc": np.array([w["osc_d"], w["osc_v"]]),
        "speed": np.asarray(w["speed"], dtype=np.float64),
        "turn": np.asarray(w["turn"], dtype=np.float64),
    }
    flags = NcapFlags(
        share_weights=False, sign_constraints=False, unit_init=policy.flags.unit_init
    )
    params = NcapParams(n, False, values)
    return NcapPolicy(n, params=params, flags=flags, oscillator=policy.oscillator)


def resize_policy(policy: NcapPolicy, n_joints_new: int) -> NcapPolicy:
    """Rebuild the controller for a different joint count, keeping weights.

    Only meaningful with weight sharing: the same four scalars drive any
    number of modules. Unshared parameter tables are tied to a specific N.
    """
    if not policy.flags.share_weights:
        raise UnsupportedOperationError("cannot resize a policy without weight sharing")
    if n_joints_new < 2:
        raise ConfigurationError("n_joints must be >= 2")
    params = policy.params.copy()
    params.n_joints = n_joints_new
    return NcapPolicy(
        n_joints=n_joints_new,
        params=params,
        flags=policy.flags,
        oscillator=policy.oscillator,
    )
