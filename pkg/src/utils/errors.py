class AgrlError(Exception):
    """Base class of every error raised by this package. `exit_code` is what the CLI returns."""

    exit_code = 1


class ConfigError(AgrlError, ValueError):
    exit_code = 1


class GoalError(AgrlError, ValueError):
    exit_code = 1


class ShapeError(AgrlError, ValueError):
    """Dimension mismatch. `layer` holds the offending layer index when there is one."""

    exit_code = 1

    def __init__(self, message: str, layer: int = None):
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)
        self.layer = layer


class NumericError(AgrlError, ArithmeticError):
    exit_code = 2


class WorldGenerationError(AgrlError, RuntimeError):
    exit_code = 2


class OutputError(AgrlError, OSError):
    """A file could not be read or written."""

    exit_code = 3


class CheckpointError(OutputError):
    exit_code = 3
