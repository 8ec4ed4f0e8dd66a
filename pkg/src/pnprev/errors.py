"""Exception types shared across the package."""


class PnprevError(Exception):
    """Base class for all package-specific errors."""


class InvalidProfileError(PnprevError):
    """Channel cross-section profile is not strictly positive or malformed."""


class DomainError(PnprevError, ValueError):
    """An argument lies outside the mathematically admissible domain."""


class ConfigurationError(PnprevError, ValueError):
    """A configuration value violates the documented schema or an invariant."""


class BracketFailure(PnprevError, RuntimeError):
    """A guaranteed sign change was not found; indicates invalid inputs or a bug."""

    def __init__(self, message, f_lo=None, f_hi=None):
        super().__init__(message)
        self.f_lo = f_lo
        self.f_hi = f_hi


class NoReversalChargeError(PnprevError):
    """The existence condition for a reversal permanent charge is violated."""


class DegenerateSystemError(PnprevError):
    """Equal bath concentrations make the requested quantity ill-posed."""


class DegenerateProfileError(PnprevError):
    """Internal-profile reconstruction is not defined at (near-)zero permanent charge."""


class ConvergenceError(PnprevError, RuntimeError):
    """An iterative scheme failed to reach its tolerance."""

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect
