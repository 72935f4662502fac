"""Swimming with a wired-in reflex circuit.

An articulated swimmer environment, a sparse sign-constrained policy whose
topology mirrors an undulatory motor circuit, dense and free-form baselines,
and an evolution-strategies trainer, all reproducible from seeds.

Hot numeric kernels run through numba when available; set
NCAP_SWIM_BACKEND=numpy to force the pure-numpy twins.
"""

from .backend import ENV_VAR as BACKEND_ENV_VAR
from .backend import active_backend
from .baselines import (
    EmbeddedParams,
    EmbeddedPolicy,
    EmbeddingMask,
    MlpConfig,
    MlpParams,
    MlpPolicy,
    build_embedding_mask,
    count_mlp_parameters,
    dense_embedding_mask,
    embedded_params_from_ncap,
    init_embedded_params,
    init_mlp_params,
    masked_mlp_forward,
    mlp_forward,
)
from .checkpoints import build_policy, load_checkpoint, save_checkpoint
from .env import (
    CommandSchedule,
    RolloutResult,
    StepResult,
    SwimmerConfig,
    SwimmerEnv,
    SwimmerState,
    TrajectoryLog,
    kinetic_energy,
    reward_swim,
    rollout,
)
from .errors import (
    CheckpointError,
    ConfigurationError,
    ContractError,
    CorruptedParametersError,
    SimulationDivergedError,
    UnsupportedOperationError,
)
from .es import (
    AdamState,
    EsConfig,
    RunRecord,
    es_update,
    read_run_records,
    sample_perturbations,
    shape_fitness,
    train,
    write_run_records,
)
from .policy import (
    SWIM_COMMAND,
    ControlCommand,
    NcapFlags,
    NcapParams,
    NcapPolicy,
    OscillatorConfig,
    count_parameters,
    init_params,
    oscillator_output,
    resize_policy,
    unshared_unconstrained_copy,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BACKEND_ENV_VAR",
    "CheckpointError",
    "CommandSchedule",
    "ConfigurationError",
    "ContractError",
    "ControlCommand",
    "CorruptedParametersError",
    "EmbeddedParams",
    "EmbeddedPolicy",
    "EmbeddingMask",
    "EsConfig",
    "MlpConfig",
    "MlpParams",
    "MlpPolicy",
    "NcapFlags",
    "NcapParams",
    "NcapPolicy",
    "OscillatorConfig",
    "RolloutResult",
    "RunRecord",
    "SWIM_COMMAND",
    "SimulationDivergedError",
    "StepResult",
    "SwimmerConfig",
    "SwimmerEnv",
    "SwimmerState",
    "TrajectoryLog",
    "UnsupportedOperationError",
    "active_backend",
    "build_embedding_mask",
    "build_policy",
    "count_mlp_parameters",
    "count_parameters",
    "dense_embedding_mask",
    "embedded_params_from_ncap",
    "es_update",
    "init_embedded_params",
    "init_mlp_params",
    "init_params",
    "kinetic_energy",
    "load_checkpoint",
    "masked_mlp_forward",
    "mlp_forward",
    "oscillator_output",
    "read_run_records",
    "resize_policy",
    "reward_swim",
    "rollout",
    "sample_perturbations",
    "save_checkpoint",
    "shape_fitness",
    "train",
    "unshared_unconstrained_copy",
    "write_run_records",
]
