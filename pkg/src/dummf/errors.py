"""Exception hierarchy shared across the package."""


class DummfError(Exception):
    """Base class for all package errors."""


class ShapeError(DummfError):
    """Array dimensions do not match what an operation requires."""


class UsageError(DummfError):
    """An operation was called with arguments outside its contract."""


class ConfigError(DummfError):
    """A configuration file or mapping table is invalid or incomplete."""


class MocapParseError(DummfError):
    """Malformed ASF/AMC input.

    Carries the 1-based line number where parsing failed when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MocapSemanticError(MocapParseError):
    """Syntactically valid mocap file with inconsistent content."""


class SynthesisError(DummfError):
    """Scene synthesis could not satisfy its placement constraints."""


class CheckpointError(DummfError):
    """A checkpoint file is missing, truncated, or corrupted."""


class TrainingError(DummfError):
    """Training aborted, e.g. on a non-finite loss."""
