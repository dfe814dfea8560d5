"""Exception types shared across the package."""


class CdglError(Exception):
    """Base class for all package-specific errors."""


class ParseError(CdglError):
    """Malformed input file: ragged CSV, non-numeric cell, bad manifest or checkpoint."""


class ShapeError(CdglError):
    """Array shape violates an operation's contract."""


class NumericsError(CdglError):
    """A computation produced NaN/Inf or an otherwise unusable value."""


class StratificationError(CdglError):
    """A class has too few members for the requested split."""


class StateError(CdglError):
    """Optimizer or model state used out of order (e.g. step before backward)."""


class ContrastiveConfigError(CdglError):
    """Too few windows for the configured contrastive offset."""


class WindowBudgetError(CdglError):
    """A subject yields too few sliding windows for the configured training run."""


class SpecError(CdglError):
    """Invalid synthetic-dataset parameters."""


class ConfigError(CdglError):
    """Invalid or unknown training-configuration key/value."""
