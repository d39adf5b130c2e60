"""Exception taxonomy shared by all modules."""


class SwitchpassError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SwitchpassError, ValueError):
    """Operand shapes are incompatible; the message names both shapes."""


class ContractError(SwitchpassError, ValueError):
    """A caller violated an operation's precondition."""


class ConfigError(SwitchpassError, ValueError):
    """A configuration value or document is invalid."""


class FormatError(SwitchpassError, ValueError):
    """A file (WAV, checkpoint, config) does not match its declared format.

    The message names the offending field or header so callers can report
    exactly what was rejected.
    """


class TrainingError(SwitchpassError, RuntimeError):
    """Optimization produced a non-finite value; the message says where."""
