"""Exception types shared across the package."""


class GateError(ValueError):
    """Malformed gate: unknown kind, bad qubit index, or missing control."""


class EncodingError(ValueError):
    """Input feature outside the [-1, 1] angle-encoding range."""


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration key."""


class CheckpointError(ValueError):
    """Checkpoint file malformed or incompatible with the requested backend."""


class TrainingError(RuntimeError):
    """Unrecoverable condition inside a learning step (e.g. non-finite gradient)."""


class EpisodeDoneError(RuntimeError):
    """step() called on an environment whose episode already terminated."""
