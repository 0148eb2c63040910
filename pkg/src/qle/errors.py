"""Exception hierarchy.

Every error carries a short machine-readable ``reason`` string; the CLI maps
the class to a process exit code.
"""


class QLEError(Exception):
    exit_code = 3

    def __init__(self, reason, **details):
        super().__init__(reason)
        self.reason = reason
        self.details = details


class ValidationError(QLEError):
    """Bad user input: parameters, tables, config files."""

    exit_code = 2


class DomainError(ValidationError):
    """A point or surface lies outside the region where V > 0."""


class PreconditionError(ValidationError):
    """Inputs are well-formed but violate an operation's assumptions."""


class GeometryError(QLEError):
    """Degenerate geometry: non-immersed profile, timelike mean curvature, ..."""


class DegenerateGaugeError(GeometryError):
    pass


class ConvergenceError(QLEError):
    def __init__(self, reason, residual=None, **details):
        super().__init__(reason, residual=residual, **details)
        self.residual = residual
