"""Linear model, weighted least-squares estimators, and Monte Carlo validation.

The analyst observes perturbed reports whose per-player precision is the
action vector lambda.  Everything downstream (costs, equilibria, efficiency)
is built on the precision matrix A(lambda) = X' diag(lambda) X computed here.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import (
    DegenerateProfileError,
    InvalidEstimatorError,
    ZeroWeightPerturbationError,
)

# Relative rank tolerance for the design matrix at construction.
RANK_RTOL = 1e-10
# A(lambda) is treated as singular when min_eig <= SINGULARITY_RTOL * (1 + max_eig).
SINGULARITY_RTOL = 1e-12
# Max entrywise magnitude of D'X tolerated by the unbiasedness condition.
UNBIASEDNESS_TOL = 1e-10


class NoiseKind(Enum):
    """Zero-mean noise families available to the Monte Carlo driver."""

    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    RADEMACHER = "rademacher-scaled"


def _frozen_array(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RegressionInstance:
    """Public design of the regression problem.

    Parameters
    ----------
    features : (n, d) array
        Design matrix; row i is the transposed feature vector of player i.
    inherent_variance : float
        Common variance of the inherent observation noise, > 0.
    true_model : (d,) array, optional
        Ground-truth coefficient vector; required only for Monte Carlo runs.
    """

    features: np.ndarray
    inherent_variance: float
    true_model: np.ndarray | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.features, dtype=float))
        if X.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n, d = X.shape
        if n < d:
            raise ValueError(f"need at least as many players as dimensions (n={n} < d={d})")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        svals = np.linalg.svd(X, compute_uv=False)
        if svals[-1] <= RANK_RTOL * svals[0]:
            raise ValueError("features matrix is rank deficient")
        if not (self.inherent_variance > 0 and np.isfinite(self.inherent_variance)):
            raise ValueError("inherent_variance must be a positive finite real")
        object.__setattr__(self, "features", _frozen_array(X))
        if self.true_model is not None:
            beta = np.asarray(self.true_model, dtype=float).reshape(-1)
            if beta.shape != (d,):
                raise ValueError(f"true_model must have length d={d}")
            object.__setattr__(self, "true_model", _frozen_array(beta))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def cap(self) -> float:
        """Upper end of every player's action interval, 1 / inherent_variance."""
        return 1.0 / self.inherent_variance


@dataclass(frozen=True)
class ActionProfile:
    """Vector of inverse aggregate variances chosen by the players."""

    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float).reshape(-1)
        if not np.all(np.isfinite(lam)):
            raise ValueError("lambdas must be finite")
        if np.any(lam < 0):
            raise ValueError("lambdas must be nonnegative")
        object.__setattr__(self, "lambdas", _frozen_array(lam))

    def __len__(self) -> int:
        return self.lambdas.shape[0]


@dataclass(frozen=True)
class EstimatorSpec:
    """Fixed linear unbiased estimator, parameterized as GLS + scaling * D'.

    ``null_matrix`` must satisfy D'X = 0 (checked against the instance at the
    point of use); ``scaling`` interpolates between GLS (0) and the full
    perturbation (1).
    """

    null_matrix: np.ndarray
    scaling: float = 1.0

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.null_matrix, dtype=float))
        if D.ndim != 2:
            raise ValueError("null_matrix must be a 2-d matrix")
        if not np.all(np.isfinite(D)):
            raise ValueError("null_matrix must be finite")
        if not (0.0 <= self.scaling <= 1.0):
            raise ValueError("scaling must lie in [0, 1]")
        object.__setattr__(self, "null_matrix", _frozen_array(D))

    @property
    def row_sq(self) -> np.ndarray:
        """Squared Euclidean norm of each perturbation row."""
        return np.einsum("ij,ij->i", self.null_matrix, self.null_matrix)

    @property
    def is_effective(self) -> bool:
        """True when scaling * D actually perturbs the estimator."""
        return self.scaling != 0.0 and bool(np.any(self.null_matrix != 0.0))


@dataclass(frozen=True)
class MonteCarloReport:
    """Aggregate of a simulated estimation run against its analytic targets."""

    empirical_mean: np.ndarray
    empirical_covariance: np.ndarray
    theoretical_covariance: np.ndarray
    mean_deviation: float
    covariance_deviation: float
    trials: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        eigs = np.linalg.eigvalsh(self.theoretical_covariance)
        if eigs[0] <= 0:
            raise ValueError("theoretical covariance must be positive definite")


def _check_profile(instance: RegressionInstance, profile: ActionProfile) -> np.ndarray:
    lam = profile.lambdas
    if lam.shape[0] != instance.n:
        raise ValueError(
            f"profile has {lam.shape[0]} entries but the instance has {instance.n} players"
        )
    if np.any(lam > instance.cap * (1 + 1e-12)):
        raise ValueError("profile exceeds the action cap 1/sigma^2")
    return lam


def _precision(features: np.ndarray, lam: np.ndarray) -> np.ndarray:
    A = (features * lam[:, None]).T @ features
    return 0.5 * (A + A.T)


def _eig_degenerate(eigs: np.ndarray) -> bool:
    return eigs[0] <= SINGULARITY_RTOL * (1.0 + eigs[-1])


def _factor_precision(instance: RegressionInstance, lam: np.ndarray):
    """Cholesky factor of A(lambda), raising on numerical singularity."""
    A = _precision(instance.features, lam)
    eigs = np.linalg.eigvalsh(A)
    if _eig_degenerate(eigs):
        raise DegenerateProfileError(
            "precision matrix is singular: contributing features do not span the model space"
        )
    return A, cho_factor(A, lower=True)


def _require_unbiased(instance: RegressionInstance, estimator: EstimatorSpec) -> None:
    D = estimator.null_matrix
    if D.shape != (instance.n, instance.d):
        raise InvalidEstimatorError(
            f"null_matrix has shape {D.shape}, expected {(instance.n, instance.d)}"
        )
    defect = np.max(np.abs(D.T @ instance.features)) if D.size else 0.0
    if defect > UNBIASEDNESS_TOL:
        raise InvalidEstimatorError(
            f"unbiasedness violated: max |D'X| = {defect:.3e} > {UNBIASEDNESS_TOL:.0e}"
        )


def precision_matrix(instance: RegressionInstance, profile: ActionProfile) -> np.ndarray:
    """Weighted information matrix X' diag(lambda) X, symmetrized exactly."""
    lam = _check_profile(instance, profile)
    return _precision(instance.features, lam)


def gls_covariance(instance: RegressionInstance, profile: ActionProfile) -> np.ndarray:
    """Covariance of the weighted least-squares estimate, inverse of the precision."""
    lam = _check_profile(instance, profile)
    _, factor = _factor_precision(instance, lam)
    V = cho_solve(factor, np.eye(instance.d))
    return 0.5 * (V + V.T)


def gls_estimate(
    instance: RegressionInstance, profile: ActionProfile, reports: np.ndarray
) -> np.ndarray:
    """Solve the weighted normal equations for the reported values."""
    lam = _check_profile(instance, profile)
    y = np.asarray(reports, dtype=float).reshape(-1)
    if y.shape[0] != instance.n:
        raise ValueError("reports must have one entry per player")
    _, factor = _factor_precision(instance, lam)
    rhs = instance.features.T @ (lam * y)
    return cho_solve(factor, rhs)


def lue_estimate(
    instance: RegressionInstance,
    profile: ActionProfile,
    estimator: EstimatorSpec,
    reports: np.ndarray,
) -> np.ndarray:
    """Estimate under GLS plus the scaled null-space perturbation."""
    _require_unbiased(instance, estimator)
    y = np.asarray(reports, dtype=float).reshape(-1)
    base = gls_estimate(instance, profile, y)
    return base + estimator.scaling * (estimator.null_matrix.T @ y)


def lue_covariance(
    instance: RegressionInstance, profile: ActionProfile, estimator: EstimatorSpec
) -> np.ndarray:
    """Covariance of the perturbed estimator: GLS covariance plus a^2 D' diag(1/lambda) D."""
    _require_unbiased(instance, estimator)
    lam = _check_profile(instance, profile)
    V = gls_covariance(instance, profile)
    a = estimator.scaling
    if a == 0.0:
        return V
    row_sq = estimator.row_sq
    zero = lam <= 0.0
    if np.any(zero & (row_sq > 0.0)):
        raise ZeroWeightPerturbationError(
            "a player with zero weight has a nonzero perturbation row; covariance is infinite"
        )
    D = estimator.null_matrix
    active = ~zero
    Dw = D[active] / lam[active, None]
    extra = a * a * (D[active].T @ Dw)
    return V + 0.5 * (extra + extra.T)


def random_null_direction(
    instance: RegressionInstance, norm: float, seed: int
) -> np.ndarray:
    """Random matrix D with D'X = 0 and Frobenius norm ``norm``.

    Draws a standard-normal n x d matrix, projects it onto the orthogonal
    complement of the column space of X, and rescales.  Deterministic in
    ``seed``.
    """
    if instance.n == instance.d:
        raise ValueError("null space of X' is trivial when n = d")
    if norm < 0:
        raise ValueError("norm must be nonnegative")
    n, d = instance.n, instance.d
    if norm == 0.0:
        return np.zeros((n, d))
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((n, d))
    X = instance.features
    gram = cho_factor(X.T @ X, lower=True)
    D0 = R - X @ cho_solve(gram, X.T @ R)
    fro = np.linalg.norm(D0)
    return D0 * (norm / fro)


def _estimator_matrix(
    instance: RegressionInstance, lam: np.ndarray, estimator: EstimatorSpec | None
) -> np.ndarray:
    """The d x n linear map from reports to the estimate."""
    _, factor = _factor_precision(instance, lam)
    L = cho_solve(factor, (instance.features * lam[:, None]).T)
    if estimator is not None and estimator.scaling != 0.0:
        L = L + estimator.scaling * estimator.null_matrix.T
    return L


def monte_carlo_validate(
    instance: RegressionInstance,
    profile: ActionProfile,
    estimator: EstimatorSpec | None = None,
    noise_kind: NoiseKind = NoiseKind.GAUSSIAN,
    trials: int = 10_000,
    seed: int = 0,
) -> MonteCarloReport:
    """Simulate the reporting pipeline and compare against analytic moments.

    Each trial draws reports y_i = beta'x_i + noise_i with Var(noise_i) equal
    to 1/lambda_i, runs the estimator, and aggregates the empirical mean and
    covariance of the estimates.  Only the first two moments of the noise are
    assumed, so any of the supported zero-mean families may be used.
    """
    if instance.true_model is None:
        raise ValueError("monte_carlo_validate requires an instance with a true_model")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    lam = _check_profile(instance, profile)
    if estimator is not None:
        _require_unbiased(instance, estimator)
        theoretical = lue_covariance(instance, profile, estimator)
    else:
        theoretical = gls_covariance(instance, profile)
    L = _estimator_matrix(instance, lam, estimator)

    rng = np.random.default_rng(seed)
    # Players at lambda = 0 receive zero estimator weight, so their (formally
    # infinite-variance) reports are pinned to the mean instead of simulated.
    std = np.zeros_like(lam)
    positive = lam > 0
    std[positive] = 1.0 / np.sqrt(lam[positive])
    if noise_kind is NoiseKind.GAUSSIAN:
        noise = rng.standard_normal((trials, instance.n)) * std
    elif noise_kind is NoiseKind.UNIFORM:
        half_width = np.sqrt(3.0) * std
        noise = rng.uniform(-1.0, 1.0, (trials, instance.n)) * half_width
    elif noise_kind is NoiseKind.RADEMACHER:
        signs = rng.integers(0, 2, (trials, instance.n)) * 2 - 1
        noise = signs * std
    else:
        raise ValueError(f"unknown noise kind: {noise_kind!r}")

    mean_reports = instance.features @ instance.true_model
    estimates = (mean_reports + noise) @ L.T

    empirical_mean = estimates.mean(axis=0)
    centered = estimates - empirical_mean
    empirical_cov = centered.T @ centered / max(trials - 1, 1)
    return MonteCarloReport(
        empirical_mean=empirical_mean,
        empirical_covariance=empirical_cov,
        theoretical_covariance=theoretical,
        mean_deviation=float(np.max(np.abs(empirical_mean - instance.true_model))),
        covariance_deviation=float(np.max(np.abs(empirical_cov - theoretical))),
        trials=trials,
    )
