"""Exception hierarchy shared across the package."""


class RegressionGameError(Exception):
    """Base class for all domain errors raised by this package."""


class CovarianceUndefinedError(RegressionGameError):
    """The estimator covariance does not exist at the given profile."""


class DegenerateProfileError(CovarianceUndefinedError):
    """Precision matrix is numerically singular (a direction is unobserved)."""


class ZeroWeightPerturbationError(CovarianceUndefinedError):
    """A player with zero weight carries a nonzero estimator perturbation row."""


class InvalidEstimatorError(RegressionGameError):
    """Perturbation matrix violates the unbiasedness condition D'X = 0."""


class InfiniteCostError(RegressionGameError):
    """An operation requiring a finite cost was invoked at an infinite-cost profile."""


class StencilError(RegressionGameError):
    """A finite-difference stencil point left the effective domain."""


class ConvergenceError(RegressionGameError):
    """An iterative solver exhausted its budget before reaching tolerance."""


class ConfigError(RegressionGameError):
    """An experiment configuration failed validation.

    The message carries the dotted path of the offending field.
    """
