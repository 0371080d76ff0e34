"""Exception hierarchy shared by every stage of the pipeline."""


class RydkickError(Exception):
    """Base class; the CLI maps subclasses onto exit codes."""


class DomainError(RydkickError, ValueError):
    """Invalid quantum numbers or physically meaningless inputs."""


class SolverError(RydkickError):
    """Radial integration failed.

    Carries the grid extent and energy so failures can be diagnosed
    without rerunning.
    """

    def __init__(self, message, *, r_min=None, r_max=None, energy=None):
        details = []
        if r_min is not None:
            details.append(f"r_min={r_min:.4g}")
        if r_max is not None:
            details.append(f"r_max={r_max:.4g}")
        if energy is not None:
            details.append(f"energy={energy:.6g}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.r_min = r_min
        self.r_max = r_max
        self.energy = energy


class GridError(RydkickError):
    pass


class TruncationError(RydkickError):
    """The truncated basis cannot represent the kick to the requested tolerance."""

    def __init__(self, message, *, worst_state=None, deficit=None):
        super().__init__(message)
        self.worst_state = worst_state
        self.deficit = deficit


class BasisMismatchError(RydkickError, ValueError):
    pass


class ConfigError(RydkickError, ValueError):
    pass


class FitError(RydkickError):
    pass
