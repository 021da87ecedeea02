"""Shared exception types."""


class OqsError(Exception):
    """Base class for package errors."""


class InvalidParameterError(OqsError, ValueError):
    """A parameter is outside its documented domain."""


class RegimeError(OqsError, ValueError):
    """Parameters are formally valid but outside the regime where the
    implemented expression is meaningful (e.g. a radicand went negative)."""


class ConfigError(OqsError, ValueError):
    """A scenario configuration file is malformed or contains unknown keys."""


class ToleranceError(OqsError, RuntimeError):
    """A numerical routine could not reach its accuracy target."""


class NumericalError(OqsError, RuntimeError):
    """NaN/Inf or another hard numerical failure during integration."""
