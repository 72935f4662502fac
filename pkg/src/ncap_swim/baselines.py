"""Baseline networks: free-standing MLPs and the masked-MLP embedding family.

The modular policy embeds exactly in a three-hidden-layer ReLU MLP of
dimensions (2(N-1)+4, 2N, 2N):

  layer 1  fixed +-1 wiring: rectified +-q channels for joints 1..N-1 plus
           pass-through oscillator and turn channels
  layer 2  premotor cells; trainable entries sit where the modular wiring
           has a connection, plus fixed +1 turn overlays on the first
           module's rows
  layer 3  muscle cells; trainable ipsi/contra entries
  output   fixed pairing min(m_d, 1) - min(m_v, 1) per joint

The speed command enters every layer-2 preactivation through a fixed -1
gain on (1 - s), mirroring the modular policy's fixed inhibitory speed
weight. Densifying the masks (all-ones, trainable biases) turns the same
function class into an ordinary MLP with the same output stage, which is
the densified cell of the ablation grid.

Free-standing baselines (e.g. MLP(256, 256)) are unrelated to the
embedding: they read only the joint observation and squash with tanh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractError
from .policy import ControlCommand, NcapPolicy, OscillatorConfig, SWIM_COMMAND

# ---------------------------------------------------------------------------
# plain MLP
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden_dims: tuple
    output_dim: int

    def __post_init__(self):
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(int(d) < 1 for d in dims):
            raise ConfigurationError("all MLP dimensions must be >= 1")
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))


@dataclass
class MlpParams:
    weights: list  # per layer, shape (out, in)
    biases: list  # per layer, shape (out,)


def count_mlp_parameters(cfg: MlpConfig) -> int:
    dims = (cfg.input_dim, *cfg.hidden_dims, cfg.output_dim)
    return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


def init_mlp_params(cfg: MlpConfig, seed=0) -> MlpParams:
    """Uniform fan-in scaled init, biases zero."""
    rng = np.random.default_rng(seed)
    dims = (cfg.input_dim, *cfg.hidden_dims, cfg.output_dim)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def mlp_forward(params: MlpParams, cfg: MlpConfig, obs, aux_inputs=None) -> np.ndarray:
    """ReLU hidden layers, tanh output. obs dim must be input_dim - |aux|."""
    obs = np.asarray(obs, dtype=np.float64)
    aux = np.asarray(aux_inputs, dtype=np.float64) if aux_inputs is not None else None
    n_aux = 0 if aux is None else aux.size
    if obs.size + n_aux != cfg.input_dim:
        raise ContractError(
            f"obs dim {obs.size} + aux dim {n_aux} must equal input_dim {cfg.input_dim}"
        )
    x = obs if aux is None else np.concatenate((obs, aux))
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        x = np.maximum(w @ x + b, 0.0)
    return np.tanh(params.weights[-1] @ x + params.biases[-1])


class MlpPolicy:
    """Free-standing joint-observation baseline; ignores commands."""

    kind = "mlp"

    def __init__(self, n_joints: int, hidden_dims=(256, 256), seed=0):
        self.n_joints = int(n_joints)
        self.cfg = MlpConfig(self.n_joints, tuple(hidden_dims), self.n_joints)
        self.params = init_mlp_params(self.cfg, seed)
        self.last_activations = None

    def reset(self) -> None:
        pass

    def act(self, obs, cmd: ControlCommand | None = None) -> np.ndarray:
        return mlp_forward(self.params, self.cfg, obs)

    @property
    def num_trainable(self) -> int:
        return count_mlp_parameters(self.cfg)

    def get_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.params.weights, self.params.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.num_trainable,):
            raise ContractError(
                f"flat vector must have shape ({self.num_trainable},), got {flat.shape}"
            )
        pos = 0
        for i, (w, b) in enumerate(zip(self.params.weights, self.params.biases)):
            self.params.weights[i] = flat[pos : pos + w.size].reshape(w.shape).copy()
            pos += w.size
            self.params.biases[i] = flat[pos : pos + b.size].copy()
            pos += b.size

    def spec(self) -> dict:
        return {
            "kind": "mlp",
            "n_joints": self.n_joints,
            "hidden_dims": list(self.cfg.hidden_dims),
        }


# ---------------------------------------------------------------------------
# embedding mask
# ---------------------------------------------------------------------------

SPEED_GAIN = -1.0  # fixed inhibitory gain on (1 - s) for all premotor rows


@dataclass
class EmbeddingMask:
    """Trainable-position masks and fixed-value overlays for the three layers.

    Effective weight per layer: mask * W + overlay. Bias masks are scalar
    0/1 flags per layer (the sparse modular configuration fixes biases at
    zero; the densified cell trains them).
    """

    n_joints: int
    masks: list  # three 0/1 arrays
    overlays: list  # three arrays, nonzero only off-mask
    bias_masks: tuple  # three 0/1 flags

    @property
    def input_dim(self) -> int:
        return self.n_joints + 4

    @property
    def hidden_dims(self) -> tuple:
        n = self.n_joints
        return (2 * (n - 1) + 4, 2 * n, 2 * n)

    @property
    def live_count(self) -> int:
        return int(sum(m.sum() for m in self.masks))

    def num_trainable(self) -> int:
        if all(self.bias_masks) and all((m == 1).all() for m in self.masks):
            return self.live_count + sum(h for h in self.hidden_dims)
        return self.live_count


def build_embedding_mask(n_joints: int) -> EmbeddingMask:
    """Mask matching the modular wiring (unshared, unconstrained form)."""
    n = int(n_joints)
    if n < 2:
        raise ConfigurationError("n_joints must be >= 2")
    d1 = 2 * (n - 1) + 4
    d_in = n + 4
    col_osc_d = 2 * (n - 1)
    col_osc_v = col_osc_d + 1
    col_r = col_osc_d + 2
    col_l = col_osc_d + 3

    # layer 1: fixed wiring, nothing trainable
    mask1 = np.zeros((d1, d_in))
    over1 = np.zeros((d1, d_in))
    for j in range(n - 1):  # joints 1..N-1 feed modules 2..N
        over1[2 * j, j] = 1.0  # positive channel
        over1[2 * j + 1, j] = -1.0  # negative channel
    for k, col in enumerate((n, n + 1, n + 2, n + 3)):  # osc_d, osc_v, r, l
        over1[col_osc_d + k, col] = 1.0

    # layer 2: premotor rows, dorsal block then ventral block
    mask2 = np.zeros((2 * n, d1))
    over2 = np.zeros((2 * n, d1))
    mask2[0, col_osc_d] = 1.0
    mask2[n, col_osc_v] = 1.0
    over2[0, col_r] = 1.0  # fixed turn drive
    over2[n, col_l] = 1.0
    for i in range(1, n):
        mask2[i, 2 * (i - 1)] = 1.0  # dorsal reads the + channel
        mask2[n + i, 2 * (i - 1) + 1] = 1.0  # ventral reads the - channel

    # layer 3: muscle rows, ipsi + contra
    mask3 = np.zeros((2 * n, 2 * n))
    for i in range(n):
        mask3[i, i] = 1.0  # m_d <- b_d
        mask3[i, n + i] = 1.0  # m_d <- b_v
        mask3[n + i, n + i] = 1.0  # m_v <- b_v
        mask3[n + i, i] = 1.0  # m_v <- b_d
    over3 = np.zeros((2 * n, 2 * n))
    return EmbeddingMask(n, [mask1, mask2, mask3], [over1, over2, over3], (0, 0, 0))


def dense_embedding_mask(n_joints: int) -> EmbeddingMask:
    """All connections live, biases trainable: an ordinary MLP of the same size."""
    sparse = build_embedding_mask(n_joints)
    masks = [np.ones_like(m) for m in sparse.masks]
    overlays = [np.zeros_like(o) for o in sparse.overlays]
    return EmbeddingMask(n_joints, masks, overlays, (1, 1, 1))


@dataclass
class EmbeddedParams:
    weights: list  # W1, W2, W3 full matrices
    biases: list  # b1, b2, b3


def init_embedded_params(mask: EmbeddingMask, seed=0) -> EmbeddedParams:
    """He-style init on trainable positions, zeros elsewhere; biases zero."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for m in mask.masks:
        fan_in = m.shape[1]
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=m.shape) * m
        weights.append(w)
        biases.append(np.zeros(m.shape[0]))
    return EmbeddedParams(weights, biases)


def masked_mlp_forward(
    params: EmbeddedParams,
    mask: EmbeddingMask,
    obs,
    osc,
    cmd: ControlCommand | None = None,
):
    """Forward pass of the embedding family.

    obs: N normalized joint angles; osc: (o_d, o_v). Returns (action,
    premotor activations, muscle activations). With all-ones masks and
    trainable biases this is a plain MLP with the same fixed output stage.
    """
    cmd = cmd if cmd is not None else SWIM_COMMAND
    obs = np.asarray(obs, dtype=np.float64)
    n = mask.n_joints
    if obs.shape != (n,):
        raise ContractError(f"observation must have shape ({n},), got {obs.shape}")
    x_in = np.concatenate(
        (obs, [float(osc[0]), float(osc[1]), cmd.turn_right, cmd.turn_left])
    )
    w1 = mask.masks[0] * params.weights[0] + mask.overlays[0]
    w2 = mask.masks[1] * params.weights[1] + mask.overlays[1]
    w3 = mask.masks[2] * params.weights[2] + mask.overlays[2]
    b1 = params.biases[0] * mask.bias_masks[0]
    b2 = params.biases[1] * mask.bias_masks[1]
    b3 = params.biases[2] * mask.bias_masks[2]

    x1 = np.maximum(w1 @ x_in + b1, 0.0)
    gate = SPEED_GAIN * (1.0 - cmd.speed)
    x2 = np.maximum(w2 @ x1 + b2 + gate, 0.0)
    x3 = np.maximum(w3 @ x2 + b3, 0.0)
    action = np.minimum(x3[:n], 1.0) - np.minimum(x3[n:], 1.0)
    return action, x2, x3


def embedded_params_from_ncap(policy: NcapPolicy) -> EmbeddedParams:
    """Copy an unshared, unconstrained modular policy's raw weights into
    the masked layout. The two forward passes then agree exactly."""
    if policy.flags.share_weights or policy.flags.sign_constraints:
        raise ContractError(
            "embedding conversion expects an unshared, unconstrained policy"
        )
    if float(policy.params.values["speed"]) != SPEED_GAIN or (
        float(policy.params.values["turn"]) != 1.0
    ):
        raise ContractError(
            "the masked family fixes the speed gain at -1 and the turn gain at +1; "
            "set the policy's fixed channels to match before converting"
        )
    n = policy.n_joints
    mask = build_embedding_mask(n)
    vals = policy.params.values
    w2 = np.zeros_like(mask.masks[1])
    w3 = np.zeros_like(mask.masks[2])
    col_osc_d = 2 * (n - 1)
    w2[0, col_osc_d] = vals["osc"][0]
    w2[n, col_osc_d + 1] = vals["osc"][1]
    for i in range(1, n):
        w2[i, 2 * (i - 1)] = vals["prop"][i - 1, 0]
        w2[n + i, 2 * (i - 1) + 1] = vals["prop"][i - 1, 1]
    for i in range(n):
        w3[i, i] = vals["ipsi"][i, 0]
        w3[i, n + i] = vals["contra"][i, 0]
        w3[n + i, n + i] = vals["ipsi"][i, 1]
        w3[n + i, i] = vals["contra"][i, 1]
    w1 = np.zeros_like(mask.masks[0])
    zeros = [np.zeros(m.shape[0]) for m in mask.masks]
    return EmbeddedParams([w1, w2, w3], zeros)


class EmbeddedPolicy:
    """Policy wrapper around the embedding family (sparse or densified)."""

    def __init__(
        self,
        n_joints: int,
        dense: bool = True,
        oscillator: OscillatorConfig | None = None,
        seed=0,
        params: EmbeddedParams | None = None,
    ):
        self.n_joints = int(n_joints)
        self.dense = bool(dense)
        self.mask = (
            dense_embedding_mask(self.n_joints)
            if dense
            else build_embedding_mask(self.n_joints)
        )
        self.oscillator = oscillator if oscillator is not None else OscillatorConfig()
        self.params = (
            params if params is not None else init_embedded_params(self.mask, seed)
        )
        self.timestep = 0
        self.last_activations = None

    @property
    def kind(self) -> str:
        return "embedded"

    def reset(self) -> None:
        self.timestep = 0

    def act(self, obs, cmd: ControlCommand | None = None) -> np.ndarray:
        osc = self.oscillator.outputs(self.timestep)
        action, x2, x3 = masked_mlp_forward(self.params, self.mask, obs, osc, cmd)
        n = self.n_joints
        self.last_activations = {
            "b_d": x2[:n],
            "b_v": x2[n:],
            "m_d": x3[:n],
            "m_v": x3[n:],
        }
        self.timestep += 1
        return action

    # flat layout: live weight entries per layer in row-major scan order,
    # then biases per layer when trainable
    def _live_indices(self):
        return [np.nonzero(m.ravel())[0] for m in self.mask.masks]

    @property
    def num_trainable(self) -> int:
        return self.mask.num_trainable()

    def get_flat(self) -> np.ndarray:
        parts = []
        for w, idx in zip(self.params.weights, self._live_indices()):
            parts.append(w.ravel()[idx])
        if all(self.mask.bias_masks):
            parts.extend(self.params.biases)
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts)

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.num_trainable,):
            raise ContractError(
                f"flat vector must have shape ({self.num_trainable},), got {flat.shape}"
            )
        pos = 0
        for i, idx in enumerate(self._live_indices()):
            w = self.params.weights[i].ravel().copy()
            w[idx] = flat[pos : pos + idx.size]
            self.params.weights[i] = w.reshape(self.params.weights[i].shape)
            pos += idx.size
        if all(self.mask.bias_masks):
            for i, b in enumerate(self.params.biases):
                self.params.biases[i] = flat[pos : pos + b.size].copy()
                pos += b.size

    def spec(self) -> dict:
        return {
            "kind": "embedded",
            "n_joints": self.n_joints,
            "dense": self.dense,
            "oscillator": {
                "period": self.oscillator.period,
                "high_width": self.oscillator.high_width,
                "phase_offset": self.oscillator.phase_offset,
            },
        }
