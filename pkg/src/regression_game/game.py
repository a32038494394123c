"""Player costs, the potential function, and equilibrium solvers.

Each player pays a private privacy cost plus the shared estimation cost, which
makes the game an exact potential game: unilateral cost differences equal
differences of Phi(lambda) = f(lambda) + sum_i c_i(lambda_i).  Equilibria are
therefore located by minimizing Phi over the action box, and independently by
round-robin best-response dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Union

import numpy as np

from .estimation import (
    SINGULARITY_RTOL,
    ActionProfile,
    EstimatorSpec,
    RegressionInstance,
    _check_profile,
    _precision,
    _require_unbiased,
)
from .exceptions import ConvergenceError, InfiniteCostError, InvalidEstimatorError
from .scalarization import ScalarizationKind, _cost_gradient, _cost_value

# Armijo line-search parameters for the projected descent solver.
ARMIJO_DECREASE = 1e-4
BACKTRACK_FACTOR = 0.5
INITIAL_STEP = 1.0
MAX_ITERATIONS = 100_000
# Interval width at which the per-player best-response bisection stops.
BISECTION_TOL = 1e-12
# Coordinates within this relative distance of a bound count as active.
ACTIVE_ATOL = 1e-10
# Number of samples used to vet user-supplied cost callables at construction.
COST_VALIDATION_SAMPLES = 32


@dataclass(frozen=True)
class MonomialCost:
    """Privacy cost c * lambda^k with c > 0 and k >= 1."""

    coefficient: float
    exponent: float = 2.0

    def __post_init__(self):
        if not (self.coefficient > 0 and math.isfinite(self.coefficient)):
            raise ValueError("coefficient must be positive")
        if not (self.exponent >= 1 and math.isfinite(self.exponent)):
            raise ValueError("exponent must be >= 1")

    @property
    def weakly_convex(self) -> bool:
        """Linear costs satisfy convexity but not strict convexity."""
        return self.exponent == 1.0

    def value(self, lam: float) -> float:
        return self.coefficient * lam**self.exponent

    def first_derivative(self, lam: float) -> float:
        return self.coefficient * self.exponent * lam ** (self.exponent - 1.0)

    def second_derivative(self, lam: float) -> float:
        k = self.exponent
        if k == 1.0:
            return 0.0
        if lam == 0.0 and k < 2.0:
            return math.inf
        return self.coefficient * k * (k - 1.0) * lam ** (k - 2.0)

    def derivative_inverse(self, y: float) -> float:
        """Inverse of the strictly increasing derivative; requires k > 1."""
        if self.exponent == 1.0:
            raise ValueError("the derivative of a linear cost is not invertible")
        return (y / (self.coefficient * self.exponent)) ** (1.0 / (self.exponent - 1.0))


@dataclass(frozen=True)
class CustomCost:
    """Privacy cost given by user-supplied callables.

    The three callables must implement a nonnegative, non-decreasing,
    strictly convex function on the action interval; this is verified by
    sampling when the cost is attached to a game.
    """

    value: Callable[[float], float]
    first_derivative: Callable[[float], float]
    second_derivative: Callable[[float], float]

    @property
    def weakly_convex(self) -> bool:
        return False


PrivacyCostSpec = Union[MonomialCost, CustomCost]


def _validate_custom_cost(cost: CustomCost, cap: float, index: int) -> None:
    samples = np.geomspace(cap * 1e-6, cap, COST_VALIDATION_SAMPLES)
    values = np.array([cost.value(s) for s in samples])
    if cost.value(0.0) < 0 or np.any(values < 0):
        raise ValueError(f"costs[{index}]: value must be nonnegative on [0, cap]")
    if np.any(np.diff(values) < -1e-12) or values[0] < cost.value(0.0) - 1e-12:
        raise ValueError(f"costs[{index}]: value must be non-decreasing on [0, cap]")
    curvature = np.array([cost.second_derivative(s) for s in samples])
    if np.any(curvature <= 0):
        raise ValueError(f"costs[{index}]: second derivative must be > 0 on (0, cap]")


@dataclass(frozen=True)
class GameSpec:
    """A complete game: design, per-player privacy costs, scalarization, estimator."""

    instance: RegressionInstance
    costs: tuple[PrivacyCostSpec, ...]
    kind: ScalarizationKind = ScalarizationKind.TRACE
    estimator: EstimatorSpec | None = None

    def __post_init__(self):
        costs = tuple(self.costs)
        if len(costs) != self.instance.n:
            raise ValueError(
                f"expected {self.instance.n} cost specs, got {len(costs)}"
            )
        object.__setattr__(self, "costs", costs)
        for i, cost in enumerate(costs):
            if isinstance(cost, CustomCost):
                _validate_custom_cost(cost, self.instance.cap, i)
        if self.estimator is not None:
            if self.kind is not ScalarizationKind.TRACE:
                raise InvalidEstimatorError(
                    "perturbed estimators are supported for the trace scalarization only"
                )
            _require_unbiased(self.instance, self.estimator)

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def cap(self) -> float:
        return self.instance.cap

    @property
    def weakly_convex(self) -> bool:
        return any(c.weakly_convex for c in self.costs)


class EquilibriumStatus(Enum):
    NON_TRIVIAL = "NonTrivial"
    TRIVIAL = "Trivial"
    NON_UNIQUE_FLAGGED = "NonUniqueFlagged"


@dataclass(frozen=True)
class ActiveSets:
    """Indices of players clamped at zero, strictly interior, or at the cap."""

    at_zero: tuple[int, ...]
    interior: tuple[int, ...]
    at_cap: tuple[int, ...]


@dataclass(frozen=True)
class EquilibriumResult:
    profile: ActionProfile
    potential_value: float
    estimation_cost: float
    player_costs: np.ndarray
    kkt_residual: float
    iterations: int
    status: EquilibriumStatus
    active_sets: ActiveSets

    def __post_init__(self):
        if self.status is not EquilibriumStatus.TRIVIAL and not math.isfinite(
            self.estimation_cost
        ):
            raise ValueError("a non-trivial equilibrium must have finite estimation cost")


def _cost_vector(spec: GameSpec, lam: np.ndarray) -> np.ndarray:
    return np.array([c.value(v) for c, v in zip(spec.costs, lam)])


def _cost_derivatives(spec: GameSpec, lam: np.ndarray) -> np.ndarray:
    return np.array([c.first_derivative(v) for c, v in zip(spec.costs, lam)])


def _f_value(spec: GameSpec, lam: np.ndarray) -> float:
    return _cost_value(spec.instance.features, lam, spec.kind, spec.estimator)


def _f_gradient(spec: GameSpec, lam: np.ndarray) -> np.ndarray:
    return _cost_gradient(spec.instance.features, lam, spec.kind, spec.estimator)


def player_cost(spec: GameSpec, i: int, profile: ActionProfile) -> float:
    """Cost of player i: private privacy cost plus the shared estimation cost."""
    if not 0 <= i < spec.n:
        raise IndexError(f"player index {i} out of range for n={spec.n}")
    lam = _check_profile(spec.instance, profile)
    return spec.costs[i].value(lam[i]) + _f_value(spec, lam)


def potential(spec: GameSpec, profile: ActionProfile) -> float:
    """Exact potential f(lambda) + sum_i c_i(lambda_i); +inf propagates."""
    lam = _check_profile(spec.instance, profile)
    f = _f_value(spec, lam)
    if math.isinf(f):
        return math.inf
    return f + float(np.sum(_cost_vector(spec, lam)))


def _potential_value(spec: GameSpec, lam: np.ndarray) -> float:
    f = _f_value(spec, lam)
    if math.isinf(f):
        return math.inf
    return f + float(np.sum(_cost_vector(spec, lam)))


def _potential_gradient(spec: GameSpec, lam: np.ndarray) -> np.ndarray:
    return _f_gradient(spec, lam) + _cost_derivatives(spec, lam)


def _projected_residual(lam: np.ndarray, grad: np.ndarray, cap: float) -> float:
    """Infinity norm of the projected-gradient (first-order) residual."""
    atol = ACTIVE_ATOL * max(1.0, cap)
    res = np.abs(grad.copy())
    at_zero = lam <= atol
    at_cap = lam >= cap - atol
    res[at_zero] = np.maximum(0.0, -grad[at_zero])
    res[at_cap] = np.maximum(0.0, grad[at_cap])
    both = at_zero & at_cap
    if np.any(both):  # degenerate zero-width box cannot occur for cap > 0
        res[both] = 0.0
    return float(np.max(res)) if res.size else 0.0


def _classify(lam: np.ndarray, cap: float) -> ActiveSets:
    atol = ACTIVE_ATOL * max(1.0, cap)
    at_zero, interior, at_cap = [], [], []
    for i, v in enumerate(lam):
        if v <= atol:
            at_zero.append(i)
        elif v >= cap - atol:
            at_cap.append(i)
        else:
            interior.append(i)
    return ActiveSets(tuple(at_zero), tuple(interior), tuple(at_cap))


def _coordinate_minimize(
    value: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    lam: np.ndarray,
    i: int,
    cap: float,
) -> float:
    """Exact minimizer of the objective along coordinate i, by bisection.

    The objective is convex with a nondecreasing partial derivative along
    each coordinate, so locating the derivative's sign change is exact to the
    bisection tolerance and immune to the cancellation that defeats
    function-value comparisons near the optimum.
    """

    def deriv(t: float) -> float:
        lam[i] = t
        return gradient(lam)[i]

    def finite(t: float) -> bool:
        lam[i] = t
        return math.isfinite(value(lam))

    if deriv(cap) <= 0.0:
        return cap
    if finite(0.0) and deriv(0.0) >= 0.0:
        return 0.0
    lo, hi = 0.0, cap
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if not finite(mid) or deriv(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _polish_by_residual(
    value: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    lam: np.ndarray,
    cap: float,
    tol: float,
    budget: int,
) -> tuple[np.ndarray, int, float]:
    """Drive the projected residual below tol with derivative information only.

    Near the minimizer the objective can no longer resolve Armijo decreases
    at double precision, but the gradient is still computed to near machine
    accuracy.  Projected gradient steps with a Barzilai-Borwein step estimate
    run first; because the sup-norm residual is not monotone along gradient
    steps, a deadlock there falls back to rounds of exact coordinate-wise
    minimization, which always makes progress on a convex objective.
    """
    grad = gradient(lam)
    residual = _projected_residual(lam, grad, cap)
    step = INITIAL_STEP
    prev_lam = prev_grad = None
    spent = 0
    # Spectral-step phase: cheap, but only kept while it makes clear headway,
    # because the sup-norm residual may refuse to contract along gradients.
    for _ in range(min(budget, 100)):
        if residual <= tol:
            return lam, spent, residual
        spent += 1
        trial_step = step
        if prev_lam is not None:
            dx = lam - prev_lam
            dg = grad - prev_grad
            denom = float(dg @ dg)
            if denom > 0.0:
                bb = float(dx @ dg) / denom
                if bb > 0.0:
                    trial_step = bb
        accepted = False
        for _ in range(60):
            trial = np.clip(lam - trial_step * grad, 0.0, cap)
            try:
                trial_grad = gradient(trial)
            except InfiniteCostError:
                trial_step *= BACKTRACK_FACTOR
                continue
            trial_residual = _projected_residual(trial, trial_grad, cap)
            if trial_residual <= tol or trial_residual < 0.999 * residual:
                accepted = True
                break
            trial_step *= BACKTRACK_FACTOR
        if not accepted:
            break
        prev_lam, prev_grad = lam, grad
        lam, grad, residual, step = trial, trial_grad, trial_residual, trial_step

    lam = lam.copy()
    for _ in range(200):
        if residual <= tol:
            return lam, spent, residual
        spent += 1
        for i in range(lam.shape[0]):
            lam[i] = _coordinate_minimize(value, gradient, lam, i, cap)
        residual = _projected_residual(lam, gradient(lam), cap)
    if residual <= tol:
        return lam, spent, residual
    raise ConvergenceError(
        f"solver stalled at first-order residual {residual:.3e} (tol {tol:.1e})"
    )


def _projected_descent(
    value: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    cap: float,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, int, float]:
    """Minimize a convex objective over [0, cap]^n by projected gradient descent.

    Backtracking Armijo search along the projection arc; infinite objective
    values (degenerate profiles) simply fail the decrease test, which keeps
    the iterates inside the effective domain.  Once function-value decreases
    fall below double-precision resolution the run finishes with a
    residual-driven polishing phase.
    """
    lam = np.clip(start, 0.0, cap)
    v = value(lam)
    if math.isinf(v):
        raise InfiniteCostError("projected descent must start at a finite-cost profile")
    for iteration in range(1, max_iter + 1):
        grad = gradient(lam)
        residual = _projected_residual(lam, grad, cap)
        if residual <= tol:
            return lam, iteration, residual
        step = INITIAL_STEP
        accepted = False
        while step > 1e-18:
            trial = np.clip(lam - step * grad, 0.0, cap)
            delta = trial - lam
            decrease = ARMIJO_DECREASE * float(grad @ delta)
            trial_value = value(trial)
            # The strict inequality rejects float-invisible decreases, which
            # would otherwise be accepted forever without progress.
            if math.isfinite(trial_value) and trial_value < v and trial_value <= v + decrease:
                accepted = True
                break
            step *= BACKTRACK_FACTOR
        if not accepted:
            # Armijo can no longer certify a decrease at double precision;
            # finish with derivative-only steps.
            lam, extra, residual = _polish_by_residual(
                value, gradient, lam, cap, tol, max(max_iter - iteration, 1)
            )
            return lam, iteration + extra, residual
        lam, v = trial, trial_value
    raise ConvergenceError(f"no convergence within {max_iter} iterations")


def kkt_residual(spec: GameSpec, profile: ActionProfile) -> float:
    """Infinity norm of the projected-gradient residual of the potential.

    Interior coordinates contribute the absolute partial derivative; clamped
    coordinates contribute only the infeasible part of the derivative, which
    encodes the sign conditions on the box multipliers.
    """
    lam = _check_profile(spec.instance, profile)
    if math.isinf(_potential_value(spec, lam)):
        raise InfiniteCostError("potential is infinite at this profile")
    grad = _potential_gradient(spec, lam)
    return _projected_residual(lam, grad, spec.cap)


def _build_result(spec: GameSpec, lam: np.ndarray, iterations: int) -> EquilibriumResult:
    profile = ActionProfile(lam)
    f = _f_value(spec, lam)
    costs = _cost_vector(spec, lam)
    status = (
        EquilibriumStatus.NON_UNIQUE_FLAGGED
        if spec.weakly_convex
        else EquilibriumStatus.NON_TRIVIAL
    )
    return EquilibriumResult(
        profile=profile,
        potential_value=f + float(np.sum(costs)),
        estimation_cost=f,
        player_costs=costs + f,
        kkt_residual=kkt_residual(spec, profile),
        iterations=iterations,
        status=status,
        active_sets=_classify(lam, spec.cap),
    )


def solve_equilibrium(
    spec: GameSpec, tol: float = 1e-8, max_iter: int = MAX_ITERATIONS
) -> EquilibriumResult:
    """Locate the unique non-trivial equilibrium by minimizing the potential.

    Starts from the all-cap profile, which is interior to the effective
    domain because the design has full rank.  Weakly convex (linear) privacy
    costs are admitted but flagged, since the minimizer need not be unique.
    """
    start = np.full(spec.n, spec.cap)
    lam, iterations, _ = _projected_descent(
        lambda x: _potential_value(spec, x),
        lambda x: _potential_gradient(spec, x),
        start,
        spec.cap,
        tol,
        max_iter,
    )
    return _build_result(spec, lam, iterations)


def best_response(spec: GameSpec, i: int, others: np.ndarray) -> float:
    """Minimizer of player i's cost over [0, cap] with the rest of the profile fixed.

    ``others`` holds the n-1 actions of the remaining players in index order.
    The player's cost is convex in her own action, so its derivative is
    nondecreasing and the minimizer is found by bisecting the derivative's
    sign change, clamping at whichever box end the sign never changes.
    """
    if not 0 <= i < spec.n:
        raise IndexError(f"player index {i} out of range for n={spec.n}")
    rest = np.asarray(others, dtype=float).reshape(-1)
    if rest.shape[0] != spec.n - 1:
        raise ValueError(f"others must have length n-1={spec.n - 1}")
    if np.any(rest < 0) or np.any(rest > spec.cap * (1 + 1e-12)):
        raise ValueError("others must lie within the action box")
    lam = np.insert(rest, i, 0.0)
    return _best_response_inplace(spec, i, lam)


def _best_response_inplace(spec: GameSpec, i: int, lam: np.ndarray) -> float:
    """Best response of player i with lam[i] treated as scratch space."""
    cap = spec.cap

    def deriv(t: float) -> float:
        lam[i] = t
        return _f_gradient(spec, lam)[i] + spec.costs[i].first_derivative(t)

    def finite(t: float) -> bool:
        lam[i] = t
        return math.isfinite(_f_value(spec, lam))

    if not finite(cap):
        raise InfiniteCostError(
            f"player {i} faces an infinite cost for every action (others are degenerate)"
        )
    if deriv(cap) <= 0.0:
        return cap
    lo, hi = 0.0, cap
    if finite(0.0) and deriv(0.0) >= 0.0:
        return 0.0
    # Invariant: moving right from lo decreases the cost (or lo is outside the
    # effective domain, which also pushes the minimizer right), while the
    # derivative at hi is positive.
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if not finite(mid) or deriv(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def best_response_dynamics(
    spec: GameSpec,
    start: ActionProfile,
    tol: float = 1e-9,
    max_rounds: int = 10_000,
) -> EquilibriumResult:
    """Round-robin best responses from a finite-potential starting profile.

    Players update in fixed index order; the dynamics stop once a full round
    moves no coordinate by more than ``tol`` and the first-order residual is
    certified.  Convergence to the non-trivial equilibrium is guaranteed for
    exact potential games started inside the effective domain.
    """
    lam = _check_profile(spec.instance, start).copy()
    if math.isinf(_potential_value(spec, lam)):
        raise InfiniteCostError("best-response dynamics require a finite-potential start")
    rounds = 0
    while rounds < max_rounds:
        rounds += 1
        largest_move = 0.0
        for i in range(spec.n):
            previous = lam[i]
            lam[i] = _best_response_inplace(spec, i, lam)
            largest_move = max(largest_move, abs(lam[i] - previous))
        if largest_move <= tol and kkt_residual(spec, ActionProfile(lam)) <= 1e-8:
            return _build_result(spec, lam, rounds)
    raise ConvergenceError(f"best-response dynamics did not settle in {max_rounds} rounds")


def is_trivial_equilibrium(spec: GameSpec, profile: ActionProfile) -> bool:
    """Whether the profile is an equilibrium with infinite estimation cost.

    True exactly when the cost is infinite and no unilateral deviation, even
    to the cap, restores an invertible precision matrix.  Such profiles exist
    only when the model dimension exceeds one.
    """
    lam = _check_profile(spec.instance, profile).copy()
    if math.isfinite(_f_value(spec, lam)):
        return False
    for i in range(spec.n):
        previous = lam[i]
        lam[i] = spec.cap
        finite = math.isfinite(_f_value(spec, lam))
        lam[i] = previous
        if finite:
            return False
    return True


def max_unilateral_improvement(
    spec: GameSpec, profile: ActionProfile, grid_size: int = 1000
) -> float:
    """Largest cost reduction any player can reach on a uniform action grid.

    Verification helper for equilibrium certificates: evaluates every
    player's cost along ``grid_size`` actions spanning [0, cap] and returns
    the best improvement over the current profile (nonpositive values mean
    no deviation on the grid helps).
    """
    lam = _check_profile(spec.instance, profile)
    features = spec.instance.features
    grid = np.linspace(0.0, spec.cap, grid_size)
    best = -math.inf
    for i in range(spec.n):
        x_i = features[i]
        base = _precision(features, np.where(np.arange(spec.n) == i, 0.0, lam))
        stacked = base[None, :, :] + grid[:, None, None] * np.outer(x_i, x_i)[None, :, :]
        eigs = np.linalg.eigvalsh(stacked)
        degenerate = eigs[:, 0] <= SINGULARITY_RTOL * (1.0 + eigs[:, -1])
        if spec.kind is ScalarizationKind.TRACE:
            f_vals = np.sum(1.0 / eigs, axis=1)
        else:
            f_vals = np.sum(1.0 / eigs**2, axis=1)
        f_vals[degenerate] = math.inf
        if spec.estimator is not None and spec.estimator.scaling != 0.0:
            row_sq = spec.estimator.row_sq
            a2 = spec.estimator.scaling**2
            others = np.delete(np.arange(spec.n), i)
            lam_others = lam[others]
            rs_others = row_sq[others]
            blocked = np.any((lam_others <= 0.0) & (rs_others > 0.0))
            fixed_term = (
                math.inf
                if blocked
                else a2 * float(np.sum(rs_others[lam_others > 0.0] / lam_others[lam_others > 0.0]))
            )
            own = np.full_like(grid, 0.0)
            if row_sq[i] > 0.0:
                own = np.where(grid > 0.0, a2 * row_sq[i] / np.maximum(grid, 1e-300), math.inf)
            f_vals = f_vals + fixed_term + own
        costs_i = np.array([spec.costs[i].value(t) for t in grid])
        current = spec.costs[i].value(lam[i]) + _f_value(spec, lam)
        improvement = current - float(np.min(costs_i + f_vals))
        best = max(best, improvement)
    return best
