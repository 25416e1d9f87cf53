"""Exception hierarchy shared across quadtomo modules."""


class QuadtomoError(Exception):
    """Base class for all quadtomo errors."""


class StateError(QuadtomoError, ValueError):
    """A Gaussian state violates symmetry, positivity or the uncertainty bound."""


class ResolutionError(QuadtomoError, ValueError):
    """The phase-space grid is too coarse for the requested operation."""


class DataError(QuadtomoError, ValueError):
    """Measured data is empty, degenerate or malformed."""


class FitError(QuadtomoError):
    """A least-squares fit is underdetermined or does not describe the data."""


class DegenerateFitError(FitError):
    """A fitted covariance matrix is not positive definite."""


class IndeterminateError(QuadtomoError, ArithmeticError):
    """A quantity is 0/0 for the given input (e.g. efficiency of vacuum)."""


class ConsistencyError(QuadtomoError, ValueError):
    """Inputs are individually valid but jointly unphysical."""
