"""Social cost, price of stability, theoretical bounds, and the fixed-point apparatus.

The social cost counts the shared estimation cost once per player, so the
socially optimal profile generally adds more precision than the equilibrium.
The price of stability compares the two; which theoretical bound applies
depends on the structure of the privacy costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .estimation import SINGULARITY_RTOL, ActionProfile, _check_profile, _precision
from .exceptions import DegenerateProfileError
from .game import (
    BISECTION_TOL,
    MAX_ITERATIONS,
    EquilibriumResult,
    GameSpec,
    MonomialCost,
    _cost_derivatives,
    _cost_vector,
    _f_gradient,
    _f_value,
    _projected_descent,
    solve_equilibrium,
)
from .scalarization import ScalarizationKind

SUPERCONVEXITY_SAMPLES = 64
SUPERCONVEXITY_SLACK = 1e-12
BOUND_SLACK = 1e-9


class BoundSource(Enum):
    GENERAL_POTENTIAL = "GeneralPotential"
    MONOMIAL_F1 = "MonomialF1"
    MONOMIAL_F2 = "MonomialF2"
    SUPERCONVEX_F1 = "SuperconvexF1"
    SUPERCONVEX_F2 = "SuperconvexF2"


@dataclass(frozen=True)
class SandwichCheck:
    """Coordinate-wise bracketing of the social optimum by the equilibrium."""

    lower_ok: bool
    upper_ok: bool
    lower_margin: float
    upper_margin: float
    advisory: bool = False


@dataclass(frozen=True)
class EfficiencyReport:
    nash: EquilibriumResult
    social_optimum: ActionProfile
    opt_cost: float
    nash_social_cost: float
    pos: float
    bound: float
    bound_source: BoundSource
    bound_satisfied: bool
    sandwich: SandwichCheck | None = None

    def __post_init__(self):
        if self.pos < 1.0 - BOUND_SLACK:
            raise ValueError(f"price of stability {self.pos} below 1")
        if self.opt_cost > self.nash_social_cost + BOUND_SLACK:
            raise ValueError("social optimum cost exceeds the equilibrium social cost")


def social_cost(spec: GameSpec, profile: ActionProfile) -> float:
    """Sum of all player costs: privacy costs plus n times the estimation cost."""
    lam = _check_profile(spec.instance, profile)
    f = _f_value(spec, lam)
    if math.isinf(f):
        return math.inf
    return float(np.sum(_cost_vector(spec, lam))) + spec.n * f


def solve_social_optimum(
    spec: GameSpec, tol: float = 1e-8, max_iter: int = MAX_ITERATIONS
) -> ActionProfile:
    """Minimize the convex social cost over the action box.

    Reuses the projected-descent machinery of the equilibrium solver; the
    only difference is that the estimation-cost gradient is weighted by the
    number of players.
    """
    n = spec.n

    def value(lam: np.ndarray) -> float:
        f = _f_value(spec, lam)
        if math.isinf(f):
            return math.inf
        return float(np.sum(_cost_vector(spec, lam))) + n * f

    def gradient(lam: np.ndarray) -> np.ndarray:
        return n * _f_gradient(spec, lam) + _cost_derivatives(spec, lam)

    start = np.full(n, spec.cap)
    lam, _, _ = _projected_descent(value, gradient, start, spec.cap, tol, max_iter)
    return ActionProfile(lam)


def _superconvexity_scale(spec: GameSpec) -> float:
    if spec.kind is ScalarizationKind.TRACE:
        return math.sqrt(spec.n)
    return spec.n ** (1.0 / 3.0)


def check_superconvexity(spec: GameSpec) -> bool:
    """Sampled test of the derivative growth condition n c'(x) <= c'(scale * x).

    The scale is sqrt(n) for the trace cost and n^(1/3) for the squared
    Frobenius cost.  Sampling covers 64 log-spaced actions; the scaled
    argument may exceed the action cap, so cost derivatives must be
    evaluable there.
    """
    scale = _superconvexity_scale(spec)
    samples = np.geomspace(spec.cap * 1e-6, spec.cap, SUPERCONVEXITY_SAMPLES)
    for index, cost in enumerate(spec.costs):
        for lam in samples:
            lhs = spec.n * cost.first_derivative(lam)
            try:
                rhs = cost.first_derivative(scale * lam)
            except Exception as exc:
                raise ValueError(
                    f"costs[{index}]: derivative not evaluable at the scaled "
                    f"argument {scale * lam:.6g}"
                ) from exc
            if lhs > rhs + SUPERCONVEXITY_SLACK * max(1.0, abs(rhs)):
                return False
    return True


def pos_bound(spec: GameSpec) -> tuple[float, BoundSource]:
    """Tightest applicable price-of-stability bound and its provenance.

    Monomial costs with a common exponent admit the exponent-dependent bound;
    otherwise the superconvexity bound applies when the derivative condition
    holds, and the potential-game bound n covers everything else.
    """
    n = spec.n
    trace = spec.kind is ScalarizationKind.TRACE
    monomial = all(isinstance(c, MonomialCost) for c in spec.costs)
    if monomial:
        exponents = {c.exponent for c in spec.costs}
        if len(exponents) == 1:
            k = exponents.pop()
            if trace:
                return n ** (1.0 / (k + 1.0)), BoundSource.MONOMIAL_F1
            return n ** (2.0 / (k + 2.0)), BoundSource.MONOMIAL_F2
    if check_superconvexity(spec):
        if trace:
            return math.sqrt(n), BoundSource.SUPERCONVEX_F1
        return n ** (2.0 / 3.0), BoundSource.SUPERCONVEX_F2
    return float(n), BoundSource.GENERAL_POTENTIAL


def _quadratic_forms(spec: GameSpec, lam: np.ndarray) -> np.ndarray:
    """x_i' A(lambda)^-2 x_i for every player, via the eigendecomposition."""
    A = _precision(spec.instance.features, lam)
    eigs, vecs = np.linalg.eigh(A)
    if eigs[0] <= SINGULARITY_RTOL * (1.0 + eigs[-1]):
        raise DegenerateProfileError("precision matrix is singular at this profile")
    M2 = (spec.instance.features @ vecs) ** 2
    return M2 @ (1.0 / eigs**2)


def _invert_derivative(cost, target: float, cap: float) -> float:
    if isinstance(cost, MonomialCost):
        return min(cost.derivative_inverse(target), cap)
    # Custom costs expose only pointwise evaluation; their derivative is
    # strictly increasing, so bisection on [0, cap] recovers the inverse.
    if target <= cost.first_derivative(0.0):
        return 0.0
    lo, hi = 0.0, cap
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if cost.first_derivative(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fixed_point_map(spec: GameSpec, profile: ActionProfile) -> ActionProfile:
    """One application of the decreasing map whose fixed point is the social optimum.

    Coordinate i maps to the inverse derivative of the privacy cost evaluated
    at min(n * x_i' A^-2 x_i, c_i'(cap)); the min caps the image inside the
    action box.  Defined for the trace cost with strictly convex privacy
    costs only.
    """
    if spec.kind is not ScalarizationKind.TRACE:
        raise ValueError("the fixed-point map is defined for the trace cost only")
    for i, cost in enumerate(spec.costs):
        if cost.weakly_convex:
            raise ValueError(
                f"costs[{i}]: derivative of a linear cost is not invertible"
            )
    # The map is evaluated on the enlarged box reaching sqrt(n) * lambda*, so
    # only the dimension is checked; entries above the cap are legitimate.
    lam = profile.lambdas
    if lam.shape[0] != spec.n:
        raise ValueError(f"profile has {lam.shape[0]} entries, expected {spec.n}")
    forms = _quadratic_forms(spec, lam)
    cap = spec.cap
    image = np.empty(spec.n)
    for i, cost in enumerate(spec.costs):
        target = min(spec.n * forms[i], cost.first_derivative(cap))
        image[i] = _invert_derivative(cost, target, cap)
    return ActionProfile(image)


def _sandwich_from_profiles(
    spec: GameSpec,
    lam_star: np.ndarray,
    lam_opt: np.ndarray,
    advisory: bool,
    tol: float = 1e-8,
) -> SandwichCheck:
    factor = _superconvexity_scale(spec)
    lower_margin = float(np.min(lam_opt - lam_star))
    upper_margin = float(np.min(factor * lam_star - lam_opt))
    return SandwichCheck(
        lower_ok=lower_margin >= -tol,
        upper_ok=upper_margin >= -tol,
        lower_margin=lower_margin,
        upper_margin=upper_margin,
        advisory=advisory,
    )


def sandwich_check(spec: GameSpec, tol: float = 1e-8) -> SandwichCheck:
    """Verify lambda* <= lambda_opt <= scale * lambda* coordinate-wise.

    Requires the superconvexity condition; the trace case is the proven one,
    while the squared-Frobenius case (scale n^(1/3)) is returned with
    ``advisory=True`` because the bracketing argument is only suggested by
    the derivative condition there.
    """
    if not check_superconvexity(spec):
        raise ValueError("sandwich check hypothesis not met: superconvexity fails")
    nash = solve_equilibrium(spec)
    opt = solve_social_optimum(spec)
    advisory = spec.kind is not ScalarizationKind.TRACE
    return _sandwich_from_profiles(
        spec, nash.profile.lambdas, opt.lambdas, advisory, tol
    )


def price_of_stability(
    spec: GameSpec, tol: float = 1e-8, max_iter: int = MAX_ITERATIONS
) -> EfficiencyReport:
    """Solve both problems and report the efficiency of the best equilibrium.

    Trivial equilibria carry infinite social cost, so the unique non-trivial
    equilibrium is always the best one.  When the sandwich hypotheses hold,
    the coordinate-wise bracketing check is attached to the report.
    """
    nash = solve_equilibrium(spec, tol, max_iter)
    opt_profile = solve_social_optimum(spec, tol, max_iter)
    nash_social = social_cost(spec, nash.profile)
    opt_cost = social_cost(spec, opt_profile)
    pos = nash_social / opt_cost
    bound, source = pos_bound(spec)
    sandwich = None
    if check_superconvexity(spec):
        sandwich = _sandwich_from_profiles(
            spec,
            nash.profile.lambdas,
            opt_profile.lambdas,
            advisory=spec.kind is not ScalarizationKind.TRACE,
        )
    return EfficiencyReport(
        nash=nash,
        social_optimum=opt_profile,
        opt_cost=opt_cost,
        nash_social_cost=nash_social,
        pos=pos,
        bound=bound,
        bound_source=source,
        bound_satisfied=pos <= bound + BOUND_SLACK,
        sandwich=sandwich,
    )
