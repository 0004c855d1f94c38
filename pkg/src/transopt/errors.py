"""Exception hierarchy shared by all modules."""


class TransOptError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(TransOptError, ValueError):
    """Invalid configuration value (instance spec, model config, experiment config)."""


class ShapeError(TransOptError, ValueError):
    """Array or tensor extents do not match what the operation requires."""


class InputError(TransOptError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class StratificationError(TransOptError, ValueError):
    """A class has too few members for the requested number of folds."""


class DataError(TransOptError, ValueError):
    """A data split came out empty or a dataset is malformed."""


class CacheError(TransOptError):
    """Design cache missing, partial or corrupted."""


class EmptyReportError(TransOptError):
    """A sweep CSV contained no result rows."""
