"""Planar swimmer in a viscous medium.

An (n_joints + 1)-link chain moves through fluid modeled by anisotropic
per-link drag: normal motion is resisted much more strongly than tangential
motion (c_n >> c_t), which is what converts body undulation into thrust.
See kernels.py for the integration scheme and frame conventions.

Actions are commanded joint angular accelerations in [-1, 1], scaled by
max_joint_accel and applied for action_repeat physics substeps per control
step. The observation is the joint angle vector normalized by the joint
limit, so it always lies in [-1, 1]. Reward per control step is forward
progress: clamp(forward_speed / desired_speed, 0, 1), where forward_speed
is the center of mass's recent average velocity (a speed_window-step
moving window) projected onto the swimmer's course axis, a low-passed
heading direction with time constant heading_tau. Center-of-mass motion
only ever comes from drag thrust, and the window plus low-pass make the
reward track sustained translation: within-cycle wiggle, body spin, and
uncoordinated flailing all average out to nearly zero credit.

All numeric defaults are calibration choices for this simulator; they make
the unit-initialized modular policy swim forward at a reward-relevant speed.
"""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ConfigurationError, ContractError, SimulationDivergedError
from .policy import ControlCommand, SWIM_COMMAND

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SwimmerConfig:
    n_joints: int = 5
    link_length: float = 0.1
    link_mass: float = 1.0
    joint_limit: float = math.pi / 3
    max_joint_accel: float = 20.0
    drag_normal: float = 5.0
    drag_tangential: float = 0.1
    physics_dt: float = 0.01
    action_repeat: int = 3
    joint_damping: float = 0.5
    desired_speed: float = 0.1
    speed_window: int = 60
    heading_tau: float = 6.0
    episode_steps: int = 1000
    reset_noise_rad: float = 0.01

    def validate(self) -> "SwimmerConfig":
        checks = [
            (self.n_joints >= 2, "n_joints must be >= 2"),
            (self.link_length > 0, "link_length must be positive"),
            (self.link_mass > 0, "link_mass must be positive"),
            (self.joint_limit > 0, "joint_limit must be positive"),
            (self.max_joint_accel > 0, "max_joint_accel must be positive"),
            (
                self.drag_normal >= self.drag_tangential > 0,
                "drag coefficients must satisfy drag_normal >= drag_tangential > 0",
            ),
            (self.physics_dt > 0, "physics_dt must be positive"),
            (self.action_repeat >= 1, "action_repeat must be >= 1"),
            (self.joint_damping >= 0, "joint_damping must be >= 0"),
            (self.desired_speed > 0, "desired_speed must be positive"),
            (self.speed_window >= 1, "speed_window must be >= 1"),
            (self.heading_tau > 0, "heading_tau must be positive"),
            (self.episode_steps >= 1, "episode_steps must be >= 1"),
            (self.reset_noise_rad >= 0, "reset_noise_rad must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigurationError(msg)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SwimmerConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown swimmer config keys: {sorted(unknown)}")
        return cls(**d).validate()


# Handy variant for tests of the anisotropy property.
def isotropic_variant(cfg: SwimmerConfig) -> SwimmerConfig:
    """Same config with normal drag lowered to the tangential value."""
    return replace(cfg, drag_normal=cfg.drag_tangential)


@dataclass
class SwimmerState:
    com: np.ndarray  # (2,) center of mass, world frame
    heading: float  # orientation of the head link
    phi: np.ndarray  # (N,) joint angles
    v_com: np.ndarray  # (2,)
    omega: float  # body rotation rate
    phi_dot: np.ndarray  # (N,)
    physics_steps: int = 0

    def copy(self) -> "SwimmerState":
        return SwimmerState(
            self.com.copy(),
            self.heading,
            self.phi.copy(),
            self.v_com.copy(),
            self.omega,
            self.phi_dot.copy(),
            self.physics_steps,
        )


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


def reward_swim(forward_speed: float, cfg: SwimmerConfig) -> float:
    """Per-step swim reward: clamp(forward_speed / desired_speed, 0, 1)."""
    return min(max(forward_speed / cfg.desired_speed, 0.0), 1.0)


def kinetic_energy(state: SwimmerState, cfg: SwimmerConfig) -> float:
    """Total kinetic energy: translational per link plus per-link spin."""
    _, _, _, _, _, _, _, link_vel, alpha_dot = kernels.chain_kinematics(
        state.phi, state.phi_dot, state.heading, state.omega, state.v_com,
        cfg.link_length,
    )
    m = cfg.link_mass
    rot_inertia = m * cfg.link_length**2 / 12.0
    trans = 0.5 * m * float(np.sum(link_vel**2))
    rot = 0.5 * rot_inertia * float(np.sum(alpha_dot**2))
    return trans + rot


class SwimmerEnv:
    """Episodic swimmer environment.

    Not safe for concurrent stepping; training code builds one instance per
    rollout worker.
    """

    def __init__(self, cfg: SwimmerConfig | None = None):
        self.cfg = (cfg if cfg is not None else SwimmerConfig()).validate()
        self.state: SwimmerState | None = None
        self.t_control = 0
        self._head = np.zeros(2)
        self._head_vel = np.zeros(2)
        self._axis = np.array([1.0, 0.0])
        self._com_hist: deque | None = None
        self._warned_action = False

    def reset(self, seed=None) -> np.ndarray:
        """Straight body at the origin heading +x, with small joint angle noise."""
        cfg = self.cfg
        rng = np.random.default_rng(seed)
        noise = cfg.reset_noise_rad
        if noise > 0:
            phi = rng.uniform(-noise, noise, size=cfg.n_joints)
        else:
            phi = np.zeros(cfg.n_joints)
        phi = np.clip(phi, -cfg.joint_limit, cfg.joint_limit)
        # place the head tip at the world origin
        _, _, _, com_local, _, _, _, _, _ = kernels.chain_kinematics(
            phi, np.zeros(cfg.n_joints), 0.0, 0.0, np.zeros(2), cfg.link_length
        )
        self.state = SwimmerState(
            com=com_local.copy(),
            heading=0.0,
            phi=phi.astype(np.float64),
            v_com=np.zeros(2),
            omega=0.0,
            phi_dot=np.zeros(cfg.n_joints),
        )
        self.t_control = 0
        self._head = np.zeros(2)
        self._head_vel = np.zeros(2)
        self._axis = np.array([1.0, 0.0])
        self._com_hist = deque(
            [self.state.com.copy()], maxlen=cfg.speed_window + 1
        )
        self._warned_action = False
        return self.observation()

    def observation(self) -> np.ndarray:
        if self.state is None:
            raise ContractError("reset() must be called before observation()")
        return self.state.phi / self.cfg.joint_limit

    @property
    def head_position(self) -> np.ndarray:
        return self._head.copy()

    def step(self, action) -> StepResult:
        if self.state is None:
            raise ContractError("reset() must be called before step()")
        cfg = self.cfg
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (cfg.n_joints,):
            raise ContractError(
                f"action must have shape ({cfg.n_joints},), got {action.shape}"
            )
        if not np.isfinite(action).all():
            raise ContractError("action contains non-finite values")
        if np.any(np.abs(action) > 1.0):
            if not self._warned_action:
                logger.warning("action outside [-1, 1], clamping")
                self._warned_action = True
            action = np.clip(action, -1.0, 1.0)

        st = self.state
        accel = np.ascontiguousarray(action * cfg.max_joint_accel)
        ok, heading, omega, head_x, head_y, head_vx, head_vy = kernels.swim_substeps(
            st.phi,
            st.phi_dot,
            st.com,
            st.v_com,
            accel,
            st.heading,
            st.omega,
            cfg.action_repeat,
            cfg.physics_dt,
            cfg.link_length,
            cfg.link_mass,
            cfg.joint_limit,
            cfg.joint_damping,
            cfg.drag_normal,
            cfg.drag_tangential,
        )
        st.heading = float(heading)
        st.omega = float(omega)
        st.physics_steps += cfg.action_repeat
        if not ok:
            raise SimulationDivergedError(
                f"non-finite simulator state at control step {self.t_control}"
            )
        self._head[0] = head_x
        self._head[1] = head_y
        self._head_vel[0] = head_vx
        self._head_vel[1] = head_vy
        self.t_control += 1

        # course axis: low-passed heading, renormalized each step
        dt_ctrl = cfg.physics_dt * cfg.action_repeat
        lam = min(1.0, dt_ctrl / cfg.heading_tau)
        ax = (1.0 - lam) * self._axis[0] + lam * math.cos(st.heading)
        ay = (1.0 - lam) * self._axis[1] + lam * math.sin(st.heading)
        norm = math.hypot(ax, ay)
        if norm > 1e-12:
            ax /= norm
            ay /= norm
        self._axis[0] = ax
        self._axis[1] = ay

        self._com_hist.append(st.com.copy())
        window = len(self._com_hist) - 1
        oldest = self._com_hist[0]
        fwd = (
            (st.com[0] - oldest[0]) * ax + (st.com[1] - oldest[1]) * ay
        ) / (window * dt_ctrl)
        reward = reward_swim(fwd, cfg)
        done = self.t_control >= cfg.episode_steps
        info = {
            "forward_speed": fwd,
            "head_x": head_x,
            "head_y": head_y,
            "heading": st.heading,
        }
        return StepResult(self.observation(), reward, done, info)


# ---------------------------------------------------------------------------
# command schedules and rollouts
# ---------------------------------------------------------------------------


class CommandSchedule:
    """Piecewise-constant command sequence keyed by control step.

    Breakpoints are dicts with a "t" key and any of speed/turn_right/
    turn_left; unspecified fields carry over from the previous segment.
    """

    def __init__(self, breakpoints: list[dict] | None = None):
        base = {"speed": 1.0, "turn_right": 0.0, "turn_left": 0.0}
        self._segments: list[tuple[int, ControlCommand]] = []
        current = dict(base)
        if not breakpoints:
            breakpoints = [{"t": 0}]
        for bp in sorted(breakpoints, key=lambda b: int(b.get("t", 0))):
            t = int(bp.get("t", 0))
            for key in ("speed", "turn_right", "turn_left"):
                if key in bp:
                    current[key] = float(bp[key])
            self._segments.append((t, ControlCommand(**current)))
        if self._segments[0][0] > 0:
            self._segments.insert(0, (0, ControlCommand(**base)))

    def __call__(self, t: int) -> ControlCommand:
        cmd = self._segments[0][1]
        for start, seg_cmd in self._segments:
            if t >= start:
                cmd = seg_cmd
            else:
                break
        return cmd

    @classmethod
    def from_json(cls, path) -> "CommandSchedule":
        with open(path) as f:
            return cls(json.load(f))


@dataclass
class TrajectoryLog:
    """One record per control step, serializable as JSON lines."""

    records: list[dict] = field(default_factory=list)

    def append(self, record: dict) -> None:
        self.records.append(record)

    def save_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for rec in self.records:
                f.write(json.dumps(rec) + "\n")

    @classmethod
    def load_jsonl(cls, path) -> "TrajectoryLog":
        records = []
        with open(path) as f:
            for line in f:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return cls(records)


@dataclass
class RolloutResult:
    episode_return: float
    steps: int
    diverged: bool
    log: TrajectoryLog | None


def rollout(
    policy,
    cfg: SwimmerConfig,
    schedule=None,
    seed=None,
    trace: bool = False,
) -> RolloutResult:
    """Run one episode. Resets both the env and the policy's counter.

    schedule: callable control step -> ControlCommand (default: constant
    swim command). With trace on, records observation, action, reward, the
    post-step head pose, and per-cell activations when the policy exposes
    them. A diverged simulation scores 0 and sets the flag; the partial
    trace is kept.
    """
    env = SwimmerEnv(cfg)
    obs = env.reset(seed)
    policy.reset()
    log = TrajectoryLog() if trace else None
    total = 0.0
    steps = 0
    for t in range(cfg.episode_steps):
        cmd = schedule(t) if schedule is not None else SWIM_COMMAND
        action = policy.act(obs, cmd)
        try:
            result = env.step(action)
        except SimulationDivergedError:
            logger.warning("rollout diverged at step %d; scoring 0", t)
            return RolloutResult(0.0, steps, True, log)
        steps += 1
        total += result.reward
        if trace:
            rec = {
                "t": t,
                "obs": [float(x) for x in obs],
                "action": [float(a) for a in action],
                "reward": float(result.reward),
                "head_x": float(result.info["head_x"]),
                "head_y": float(result.info["head_y"]),
                "heading": float(result.info["heading"]),
            }
            acts = getattr(policy, "last_activations", None)
            if acts is not None:
                rec["activations"] = {k: [float(x) for x in v] for k, v in acts.items()}
            log.append(rec)
        obs = result.observation
        if result.done:
            break
    return RolloutResult(total, steps, False, log)
