"""Exception types raised by the library.

Every error derives from :class:`DeepRAftError` and from the closest builtin,
so callers may catch either one.
"""


class DeepRAftError(Exception):
    """Base class for all library errors."""


class DimensionError(DeepRAftError, ValueError):
    """Array lengths or shapes do not agree."""


class InvalidArgumentError(DeepRAftError, ValueError):
    """An argument is outside its allowed range or set."""


class EmptyEventError(DeepRAftError, ValueError):
    """The operation needs at least one observed failure."""


class PairIndexError(DeepRAftError, IndexError):
    """A pair refers to a subject outside the residual vector."""


class SingularDesignError(DeepRAftError, ValueError):
    """The design matrix is rank deficient."""


class UndefinedMetricError(DeepRAftError, ValueError):
    """A metric has no comparable pairs or no observations."""


class SchemaError(DeepRAftError, KeyError):
    """A dataset file does not match its column spec."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class EmptyDataError(DeepRAftError, ValueError):
    """No rows remain after filtering."""


class DegenerateSplitError(DeepRAftError, ValueError):
    """A train/test split could not place any event in the training part."""


class ConfigError(DeepRAftError, ValueError):
    """An experiment config file is malformed or has unknown keys."""


class ModelFormatError(DeepRAftError, ValueError):
    """A saved model file is not a valid container."""
