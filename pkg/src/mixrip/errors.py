class ConfigurationError(ValueError):
    """Raised when an experiment or sampler configuration cannot be satisfied."""


class SeparationError(ValueError):
    """Raised when mixtures violate the required center separation."""


class PreconditionError(ValueError):
    """Raised when a bound is requested outside the range where it applies."""
