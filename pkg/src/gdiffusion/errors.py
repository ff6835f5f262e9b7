"""Exception hierarchy shared by all modules."""


class GDiffusionError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(GDiffusionError):
    """Shapes of inputs do not agree."""


class NonFiniteError(GDiffusionError):
    """A value that must be finite is NaN or infinite."""


class StabilityError(GDiffusionError):
    """A time step violates the explicit-scheme stability bound."""


class GridError(GDiffusionError):
    """Invalid grid geometry or an out-of-range query."""


class ConfigError(GDiffusionError):
    """A configuration document failed to parse or validate."""


class EvaluationError(GDiffusionError):
    """A user-supplied coefficient or functional failed at a sample point."""
