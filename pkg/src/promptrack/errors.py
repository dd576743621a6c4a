"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible dimensions."""


class ConfigError(ValueError):
    """A configuration value is out of its allowed range or unknown."""


class EmptyPromptError(ValueError):
    """A prompt produced zero tokens."""


class SequencingError(RuntimeError):
    """Frames were presented to a tracking session out of order."""


class SchemaError(ValueError):
    """An annotation document is missing a required key.

    The offending path (e.g. ``annotations[3].bbox``) is part of the message.
    """


class IntegrityError(ValueError):
    """An id reference in an annotation document does not resolve."""


class SupervisionError(ValueError):
    """A training step was given an empty or invalid positive set."""


class UndefinedMetricError(ValueError):
    """A metric's denominator is zero (e.g. no ground truth)."""


class ScenarioUnavailableError(ValueError):
    """The requested prompt scenario is not constructible from the data."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""
