"""Exception hierarchy shared across the package."""


class JamlabError(Exception):
    """Base class for all package errors."""


class ShapeError(JamlabError):
    """Operands have incompatible shapes or non-conformable parameter sets."""


class NumericError(JamlabError):
    """A numeric operation produced NaN/Inf or otherwise left the finite domain."""


class ArgumentError(JamlabError, ValueError):
    """An argument is outside its documented domain."""


class AlignmentError(JamlabError):
    """Cross-modal window indices do not match."""


class DataError(JamlabError):
    """A data stream violates its contract (e.g. too few samples in a channel)."""


class PartitionError(JamlabError):
    """A client partition cannot be constructed as requested."""


class ConfigError(JamlabError):
    """An experiment config failed validation; message carries the field path."""


class IoError(JamlabError):
    """Reading or writing an artifact failed."""
