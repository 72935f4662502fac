"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A config object or config file holds an invalid or unknown value."""


class ContractError(ValueError):
    """A caller violated an interface precondition (bad shape, bad order of calls)."""


class CorruptedParametersError(ValueError):
    """Non-finite values found where finite weights are required."""


class UnsupportedOperationError(RuntimeError):
    """The operation is well-formed but not supported for this object."""


class CheckpointError(ValueError):
    """A checkpoint file is malformed or does not match the requested configuration."""


class SimulationDivergedError(RuntimeError):
    """The simulator produced non-finite state."""
