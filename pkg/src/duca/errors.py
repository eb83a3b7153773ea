"""Exception types shared across the package."""


class DucaError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DucaError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """A config or data file could not be parsed."""


class ValidationError(ConfigError):
    """A value is outside its documented range or has the wrong shape."""


class UnknownKey(ConfigError):
    """A config mapping contains a key the schema does not define."""


class DimMismatch(DucaError):
    """An array has the wrong dimensionality for the operation."""


class LengthMismatch(DucaError):
    """Paired sequences differ in length."""


class StepAfterTerminal(DucaError):
    """step() was called on a terminal dialogue state."""


class EmptyUtterance(DucaError):
    """An utterance has zero tokens where tokens are required."""


class EmptyLibrary(DucaError):
    """The script library is empty."""


class EmptyInput(DucaError):
    """An operation that needs at least one element received none."""


class NonTerminalTrajectory(DucaError):
    """A session-level computation was attempted on an unfinished episode."""


class UnknownMethod(DucaError):
    """A method name does not match any registered training method."""
