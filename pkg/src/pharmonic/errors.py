"""Exception types shared across the package."""


class PHarmonicError(Exception):
    """Base class for all package errors."""


class DegenerateStateError(PHarmonicError, ArithmeticError):
    """Energy density fell below the degenerate floor, so the ODE is vacuous."""


class StartupNotAdmissibleError(PHarmonicError, ValueError):
    """A warp without f(0)=0, f'(0)=1 was handed to the startup solver."""


class NonContractionError(PHarmonicError):
    """The startup fixed-point iteration did not converge before epsilon underflowed."""

    def __init__(self, message, last_change=float("nan"), epsilon=float("nan")):
        super().__init__(message)
        self.last_change = last_change
        self.epsilon = epsilon


class MonotonicityError(PHarmonicError):
    """An accepted integration step produced alpha' <= 0 on a nontrivial solution."""

    def __init__(self, message, r):
        super().__init__(message)
        self.r = r


class RangeError(PHarmonicError, ValueError):
    """Requested interval lies outside the stored grid."""


class WindowTooShortError(PHarmonicError, ValueError):
    """Too few nodes in an analysis window."""


class HypothesisViolatedError(PHarmonicError, ValueError):
    """The bounds a check relies on do not hold on the requested window."""


class WrongFamilyError(PHarmonicError, ValueError):
    """The check only applies to a different warp family."""


class NotApplicableError(PHarmonicError, ValueError):
    """The check does not apply to this profile (e.g. bounded where unbounded is needed)."""


class UnsupportedFamilyError(PHarmonicError, ValueError):
    """No regime prediction is available for this pair of warps."""


class ConfigError(PHarmonicError, ValueError):
    """Invalid run configuration; the message names the offending key."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
