"""Extended-value estimation costs and their analytic gradients.

The shared estimation cost is a scalarization of the estimator covariance:
trace or squared Frobenius norm.  It is +infinity wherever the covariance is
undefined, and that infinity is an in-band value so that optimizers can
compare against it during line searches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .estimation import (
    ActionProfile,
    EstimatorSpec,
    RegressionInstance,
    _check_profile,
    _eig_degenerate,
    _precision,
    _require_unbiased,
)
from .exceptions import InfiniteCostError, StencilError


class ScalarizationKind(Enum):
    TRACE = "trace"
    FROBENIUS_SQUARED = "frobenius_squared"


@dataclass(frozen=True)
class ExtendedCost:
    """Nonnegative cost value with +infinity as an ordinary member."""

    value: float

    def __post_init__(self):
        if math.isnan(self.value) or self.value < 0:
            raise ValueError("cost must be nonnegative or +inf")

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def _reject_frobenius_perturbation(
    kind: ScalarizationKind, estimator: EstimatorSpec | None
) -> None:
    if (
        kind is ScalarizationKind.FROBENIUS_SQUARED
        and estimator is not None
        and estimator.is_effective
    ):
        raise ValueError(
            "squared-Frobenius costs are not defined for perturbed estimators; use the trace kind"
        )


def _cost_value(
    features: np.ndarray,
    lam: np.ndarray,
    kind: ScalarizationKind,
    estimator: EstimatorSpec | None = None,
) -> float:
    """Scalarized covariance at ``lam``; +inf outside the effective domain."""
    eigs = np.linalg.eigvalsh(_precision(features, lam))
    if _eig_degenerate(eigs):
        return math.inf
    if kind is ScalarizationKind.TRACE:
        total = float(np.sum(1.0 / eigs))
    else:
        total = float(np.sum(1.0 / eigs**2))
    if estimator is not None and estimator.scaling != 0.0:
        row_sq = estimator.row_sq
        zero = lam <= 0.0
        if np.any(zero & (row_sq > 0.0)):
            return math.inf
        active = ~zero
        a = estimator.scaling
        total += a * a * float(np.sum(row_sq[active] / lam[active]))
    return total


def _cost_gradient(
    features: np.ndarray,
    lam: np.ndarray,
    kind: ScalarizationKind,
    estimator: EstimatorSpec | None = None,
) -> np.ndarray:
    """Partial derivatives of the finite cost; caller guarantees finiteness."""
    A = _precision(features, lam)
    eigs, vecs = np.linalg.eigh(A)
    if _eig_degenerate(eigs):
        raise InfiniteCostError("estimation cost is infinite at this profile")
    M2 = (features @ vecs) ** 2
    if kind is ScalarizationKind.TRACE:
        grad = -(M2 @ (1.0 / eigs**2))
    else:
        grad = -2.0 * (M2 @ (1.0 / eigs**3))
    if estimator is not None and estimator.scaling != 0.0:
        row_sq = estimator.row_sq
        carries = row_sq > 0.0
        if np.any(carries & (lam <= 0.0)):
            raise InfiniteCostError(
                "estimation cost is infinite: zero weight under a nonzero perturbation row"
            )
        a = estimator.scaling
        grad[carries] -= a * a * row_sq[carries] / lam[carries] ** 2
    return grad


def is_degenerate(instance: RegressionInstance, profile: ActionProfile) -> bool:
    """Whether A(lambda) fails the numeric singularity threshold.

    The threshold is min_eig <= SINGULARITY_RTOL * (1 + max_eig); profiles at
    or below it have undefined covariance and infinite estimation cost.
    """
    lam = _check_profile(instance, profile)
    eigs = np.linalg.eigvalsh(_precision(instance.features, lam))
    return _eig_degenerate(eigs)


def estimation_cost(
    instance: RegressionInstance,
    profile: ActionProfile,
    kind: ScalarizationKind,
    estimator: EstimatorSpec | None = None,
) -> ExtendedCost:
    """Extended-value estimation cost F(V(lambda)) shared by all players."""
    _reject_frobenius_perturbation(kind, estimator)
    if estimator is not None:
        _require_unbiased(instance, estimator)
    lam = _check_profile(instance, profile)
    return ExtendedCost(_cost_value(instance.features, lam, kind, estimator))


def estimation_cost_gradient(
    instance: RegressionInstance,
    profile: ActionProfile,
    kind: ScalarizationKind,
    estimator: EstimatorSpec | None = None,
) -> np.ndarray:
    """Analytic gradient of the estimation cost at a finite-cost profile.

    Uses the quadratic-form identities for the derivatives of trace(A^-1) and
    ||A^-1||_F^2, evaluated through an eigendecomposition of A rather than by
    powering an explicit inverse.  The perturbed-estimator term requires every
    weighted coordinate to be strictly interior.
    """
    _reject_frobenius_perturbation(kind, estimator)
    if estimator is not None:
        _require_unbiased(instance, estimator)
    lam = _check_profile(instance, profile)
    return _cost_gradient(instance.features, lam, kind, estimator)


def finite_difference_gradient(
    instance: RegressionInstance,
    profile: ActionProfile,
    kind: ScalarizationKind,
    estimator: EstimatorSpec | None = None,
    step: float = 1e-6,
) -> np.ndarray:
    """Central-difference gradient oracle with per-coordinate step step*max(lambda_i, 1).

    Intended for validating the analytic gradient in tests; raises when a
    stencil point leaves the effective domain.
    """
    _reject_frobenius_perturbation(kind, estimator)
    if step <= 0:
        raise ValueError("step must be positive")
    lam = _check_profile(instance, profile).copy()
    features = instance.features
    grad = np.empty_like(lam)
    for i in range(lam.shape[0]):
        h = step * max(lam[i], 1.0)
        if lam[i] - h < 0:
            raise StencilError(f"stencil for coordinate {i} leaves the domain (lambda - h < 0)")
        values = []
        for shifted in (lam[i] + h, lam[i] - h):
            probe = lam.copy()
            probe[i] = shifted
            v = _cost_value(features, probe, kind, estimator)
            if math.isinf(v):
                raise StencilError(f"stencil for coordinate {i} hit an infinite-cost point")
            values.append(v)
        grad[i] = (values[0] - values[1]) / (2.0 * h)
    return grad
