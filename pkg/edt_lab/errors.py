"""Named failures raised by the EDT toolkit.

Every operation raises one of these (never a bare Exception) so that the CLI can
map them onto exit codes. Queue instability is *not* an error: it is reported as
``stable=False`` on the result.

Input errors do not derive from ValueError: pydantic wraps ValueError
raised inside validators, while other exceptions propagate unchanged.
"""

from __future__ import annotations


class EdtLabError(Exception):
    """Base class for all toolkit failures."""


class NonPositiveInput(EdtLabError):
    """A rate, duration or count that must be positive was not."""


class OutOfRange(EdtLabError):
    """A probability or quantity fell outside its admissible interval."""


class SingularParameter(EdtLabError):
    """A series parameter hit a pole (e.g. a non-terminating negative integer)."""


class ZeroPoleOffset(EdtLabError):
    """Partial fractions requested for 1/[x(x-a)]^n with a == 0."""


class DivergentSeries(EdtLabError):
    """A transform was evaluated outside its region of convergence."""


class TruncationFailure(EdtLabError):
    """The horizon leaves more probability mass than the tolerance allows."""

    def __init__(self, message: str, suggested_horizon: float | None = None):
        super().__init__(message)
        self.suggested_horizon = suggested_horizon


class NormalizationFailure(EdtLabError):
    """The grid could not be refined until the represented mass sums to 1."""


class ConfigError(EdtLabError):
    """Invalid or inconsistent experiment configuration."""


class IOFailure(EdtLabError, OSError):
    """Output could not be written or read back."""
