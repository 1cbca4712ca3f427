"""Exception hierarchy shared by all hagen modules."""


class HagenError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(HagenError):
    """Operand shapes are incompatible for the requested operation."""


class ContractError(HagenError):
    """An API was called in a way its contract forbids."""


class ConfigError(HagenError):
    """A configuration value is missing, unknown or out of range."""


class DataError(HagenError):
    """An input file or array violates the documented data format."""


class CheckpointError(HagenError):
    """A checkpoint file is corrupt, incompatible or unreadable."""


class NumericalError(HagenError):
    """Training produced non-finite values and cannot continue."""
