"""Exceptions raised by granulab.

Every exception derives from :class:`GranulabError` and carries the exit
code that the command-line interface reports for it.
"""
from typing import Optional


class GranulabError(Exception):
    """Base class for all granulab errors.

    Class Attributes:
        exit_code: The process exit code the CLI uses for this error.
    """

    exit_code: int = 3


class ConfigError(GranulabError, ValueError):
    """A configuration value violates its documented invariants."""

    exit_code = 3


class SchemaMismatchError(GranulabError):
    """A persisted artifact has an incompatible schema version or shape."""

    exit_code = 3


class DigestMismatchError(GranulabError):
    """A file no longer matches the digest recorded in its manifest."""

    exit_code = 3


class EmptySegmentationError(GranulabError):
    """A depth image contains no grain pixels."""

    exit_code = 3


class SimulationDivergedError(GranulabError):
    """The simulator produced a non-finite or runaway state.

    Instance Attributes:
        time: The simulated time at which divergence was detected.
        max_speed: The largest grain speed at that time.
    """

    exit_code = 4

    def __init__(self, message: str, time: float = float('nan'),
                 max_speed: float = float('nan')) -> None:
        """Initialize a SimulationDivergedError.

        Args:
            message: A description of the failure.
            time: The simulated time at which divergence was detected.
            max_speed: The largest grain speed at that time.
        """
        super().__init__(message)
        self.time = time
        self.max_speed = max_speed


class DegenerateGroundError(GranulabError):
    """Too few usable ground points to fit a plane."""

    exit_code = 4


class TrainingError(GranulabError):
    """Training the conditional density model failed.

    Instance Attributes:
        diagnostics: Values describing the state of the optimizer at the
            time of failure.
    """

    exit_code = 4

    def __init__(self, message: str,
                 diagnostics: Optional[dict] = None) -> None:
        """Initialize a TrainingError."""
        super().__init__(message)
        self.diagnostics = diagnostics or {}
