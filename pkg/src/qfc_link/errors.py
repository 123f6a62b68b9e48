"""Shared exception types.

Domain errors (bad arguments, unphysical inputs) raise plain ValueError
throughout the package. The classes here mark failures of the numerics
themselves, so callers can tell "your input is wrong" apart from
"the algorithm did not converge".
"""


class NumericsError(RuntimeError):
    """Quadrature, root finding or optimization failed to converge."""


class FitError(NumericsError):
    """Nonlinear fit did not converge; carries the last iterate."""

    def __init__(self, message: str, last_iterate=None, iterations: int | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class ConfigError(ValueError):
    """Run configuration is missing, malformed or inconsistent."""
