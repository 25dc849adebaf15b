"""Exception types shared across the package."""


class BflabError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(BflabError, ValueError):
    """A caller-supplied argument violates a documented precondition."""


class ProcessExhaustedError(BflabError):
    """The graph is complete; no absent edge can be sampled."""


class UnsupportedRuleError(BflabError):
    """The deterministic machinery has no equations for this rule."""


class StiffnessError(BflabError):
    """The adaptive integrator underflowed its step size.

    ``last_t`` holds the last time reached before failure.
    """

    def __init__(self, message, last_t=None):
        super().__init__(message)
        self.last_t = last_t


class BlowupError(BflabError):
    """Integration target lies at or past the susceptibility blow-up."""

    def __init__(self, message, t_c=None):
        super().__init__(message)
        self.t_c = t_c


class NoBlowupError(BflabError):
    """No susceptibility blow-up found before the search cap."""


class ResolutionError(BflabError):
    """Requested epsilon is below the resolution of the computed trace."""


class NoSingularityFoundError(BflabError):
    """The fold search found no sign change in the scanned bracket."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InsufficientRangeError(BflabError):
    """The profile has too short a usable decay window for a fit."""
