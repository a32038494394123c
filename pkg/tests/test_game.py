import math

import numpy as np
import pytest

import regression_game as rg
from helpers import identity_instance, instance_b, make_instance, monomials, random_monomial_spec, spec_b


def profile(*values):
    return rg.ActionProfile(np.array(values))


class TestPrivacyCosts:
    def test_monomial_validation(self):
        with pytest.raises(ValueError):
            rg.MonomialCost(0.0, 2.0)
        with pytest.raises(ValueError):
            rg.MonomialCost(1.0, 0.5)

    def test_monomial_derivatives(self):
        cost = rg.MonomialCost(2.0, 3.0)
        assert cost.value(0.5) == pytest.approx(2.0 * 0.125)
        assert cost.first_derivative(0.5) == pytest.approx(6.0 * 0.25)
        assert cost.second_derivative(0.5) == pytest.approx(12.0 * 0.5)

    def test_linear_cost_flagged_weakly_convex(self):
        assert rg.MonomialCost(1.0, 1.0).weakly_convex
        assert not rg.MonomialCost(1.0, 2.0).weakly_convex

    def test_derivative_inverse(self):
        cost = rg.MonomialCost(1.5, 3.0)
        y = cost.first_derivative(0.42)
        assert cost.derivative_inverse(y) == pytest.approx(0.42, rel=1e-12)
        with pytest.raises(ValueError):
            rg.MonomialCost(1.0, 1.0).derivative_inverse(1.0)

    def test_custom_cost_accepted_when_strictly_convex(self):
        cost = rg.CustomCost(
            value=lambda x: math.expm1(x),
            first_derivative=lambda x: math.exp(x),
            second_derivative=lambda x: math.exp(x),
        )
        rg.GameSpec(instance_b(), (cost, cost))

    def test_custom_cost_rejected_when_not_strictly_convex(self):
        linear = rg.CustomCost(
            value=lambda x: x,
            first_derivative=lambda x: 1.0,
            second_derivative=lambda x: 0.0,
        )
        with pytest.raises(ValueError, match="second derivative"):
            rg.GameSpec(instance_b(), (linear, linear))

    def test_custom_cost_rejected_when_decreasing(self):
        decreasing = rg.CustomCost(
            value=lambda x: 1.0 - x + x * x,
            first_derivative=lambda x: -1.0 + 2 * x,
            second_derivative=lambda x: 2.0,
        )
        with pytest.raises(ValueError, match="non-decreasing"):
            rg.GameSpec(instance_b(), (decreasing, decreasing))


class TestGameSpec:
    def test_cost_count_must_match_players(self):
        with pytest.raises(ValueError, match="cost"):
            rg.GameSpec(instance_b(), monomials(3))

    def test_estimator_requires_trace(self):
        est = rg.EstimatorSpec(np.array([[0.5], [-0.5]]), 1.0)
        with pytest.raises(rg.InvalidEstimatorError, match="trace"):
            rg.GameSpec(instance_b(), monomials(2), rg.ScalarizationKind.FROBENIUS_SQUARED, est)

    def test_estimator_must_be_unbiased(self):
        est = rg.EstimatorSpec(np.array([[0.5], [0.5]]), 1.0)
        with pytest.raises(rg.InvalidEstimatorError, match="unbiased"):
            rg.GameSpec(instance_b(), monomials(2), rg.ScalarizationKind.TRACE, est)


class TestPlayerCostAndPotential:
    def test_player_cost_direct_oracle(self):
        assert rg.player_cost(spec_b(), 0, profile(0.5, 0.5)) == pytest.approx(0.25 + 1.0)

    def test_player_cost_infinite_when_degenerate(self):
        spec = rg.GameSpec(identity_instance(), monomials(2))
        assert math.isinf(rg.player_cost(spec, 0, profile(0.0, 0.0)))

    def test_zero_action_zero_privacy_cost(self):
        cost = rg.player_cost(spec_b(), 0, profile(0.0, 0.5))
        assert cost == pytest.approx(1.0 / 0.5)

    def test_player_index_checked(self):
        with pytest.raises(IndexError):
            rg.player_cost(spec_b(), 2, profile(0.5, 0.5))

    def test_potential_direct_oracle(self):
        assert rg.potential(spec_b(), profile(0.5, 0.5)) == pytest.approx(1.5)

    def test_potential_infinite_when_degenerate(self):
        spec = rg.GameSpec(identity_instance(), monomials(2))
        assert math.isinf(rg.potential(spec, profile(0.0, 0.0)))

    def test_single_player_stationary_point(self):
        # Closed form: the minimum of 1/x + x^2 sits at x = 2^(-1/3).
        spec = rg.GameSpec(make_instance([[1.0]]), monomials(1))
        x = 2.0 ** (-1.0 / 3.0)
        assert rg.potential(spec, profile(x)) == pytest.approx(3.0 * 2.0 ** (-2.0 / 3.0))

    def test_exact_potential_identity(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            spec = random_monomial_spec(rng, 5, 2)
            lam = rng.uniform(0.2, 1.0, 5)
            i = int(rng.integers(5))
            deviated = lam.copy()
            deviated[i] = rng.uniform(0.2, 1.0)
            cost_delta = rg.player_cost(spec, i, rg.ActionProfile(lam)) - rg.player_cost(
                spec, i, rg.ActionProfile(deviated)
            )
            potential_delta = rg.potential(spec, rg.ActionProfile(lam)) - rg.potential(
                spec, rg.ActionProfile(deviated)
            )
            assert cost_delta == pytest.approx(potential_delta, abs=1e-12)


class TestBestResponse:
    def test_interior_stationary_point(self):
        # -1/(x + 0.5)^2 + 2x vanishes at x = 0.5.
        assert rg.best_response(spec_b(), 0, [0.5]) == pytest.approx(0.5, abs=1e-10)

    def test_clamps_at_zero_for_huge_privacy_coefficient(self):
        costs = (rg.MonomialCost(100.0, 1.0), rg.MonomialCost(1.0, 2.0))
        spec = rg.GameSpec(instance_b(), costs)
        assert rg.best_response(spec, 0, [0.5]) == 0.0

    def test_clamps_at_cap_for_tiny_privacy_coefficient(self):
        costs = (rg.MonomialCost(1e-4, 2.0), rg.MonomialCost(1.0, 2.0))
        spec = rg.GameSpec(instance_b(), costs)
        assert rg.best_response(spec, 0, [0.5]) == spec.cap

    def test_all_actions_infinite(self):
        spec = rg.GameSpec(identity_instance(), monomials(2))
        with pytest.raises(rg.InfiniteCostError):
            rg.best_response(spec, 0, [0.0])

    def test_others_validated(self):
        with pytest.raises(ValueError, match="box"):
            rg.best_response(spec_b(), 0, [2.0])
        with pytest.raises(ValueError, match="length"):
            rg.best_response(spec_b(), 0, [0.5, 0.5])


class TestBestResponseDynamics:
    def test_reference_instance_converges(self):
        result = rg.best_response_dynamics(spec_b(), profile(1.0, 1.0))
        np.testing.assert_allclose(result.profile.lambdas, [0.5, 0.5], atol=1e-8)
        assert result.status is rg.EquilibriumStatus.NON_TRIVIAL

    def test_fixed_point_detected_in_one_round(self):
        result = rg.best_response_dynamics(spec_b(), profile(0.5, 0.5))
        assert result.iterations == 1
        np.testing.assert_allclose(result.profile.lambdas, [0.5, 0.5], atol=1e-10)

    def test_cubic_costs_closed_form(self):
        # Symmetric stationarity -1/(4t^2) + 3t^2 = 0 gives t = 12^(-1/4).
        spec = spec_b(k=3.0)
        result = rg.best_response_dynamics(spec, profile(1.0, 1.0))
        t = 12.0 ** (-0.25)
        np.testing.assert_allclose(result.profile.lambdas, [t, t], atol=1e-8)

    def test_infinite_start_rejected(self):
        spec = rg.GameSpec(identity_instance(), monomials(2))
        with pytest.raises(rg.InfiniteCostError, match="finite-potential"):
            rg.best_response_dynamics(spec, profile(0.0, 0.0))

    def test_round_budget_exhaustion(self):
        with pytest.raises(rg.ConvergenceError):
            rg.best_response_dynamics(spec_b(), profile(1.0, 1.0), tol=0.0, max_rounds=1)


class TestSolveEquilibrium:
    def test_reference_instance(self):
        result = rg.solve_equilibrium(spec_b())
        np.testing.assert_allclose(result.profile.lambdas, [0.5, 0.5], atol=1e-8)
        assert result.potential_value == pytest.approx(1.5, abs=1e-8)
        assert result.estimation_cost == pytest.approx(1.0, abs=1e-7)
        assert result.kkt_residual <= 1e-8
        assert result.active_sets.interior == (0, 1)

    def test_cubic_reference(self):
        t = 12.0 ** (-0.25)
        result = rg.solve_equilibrium(spec_b(k=3.0))
        np.testing.assert_allclose(result.profile.lambdas, [t, t], atol=1e-8)

    def test_single_player_closed_form(self):
        spec = rg.GameSpec(make_instance([[1.0]]), monomials(1))
        result = rg.solve_equilibrium(spec)
        assert result.profile.lambdas[0] == pytest.approx(2.0 ** (-1.0 / 3.0), abs=1e-8)

    def test_weakly_convex_costs_flagged(self):
        spec = rg.GameSpec(instance_b(), monomials(2, c=1.0, k=1.0))
        result = rg.solve_equilibrium(spec)
        assert result.status is rg.EquilibriumStatus.NON_UNIQUE_FLAGGED
        assert result.kkt_residual <= 1e-8

    def test_solvers_agree_on_random_instances(self):
        rng = np.random.default_rng(33)
        for _ in range(8):
            n = int(rng.integers(2, 6))
            spec = random_monomial_spec(rng, n, int(rng.integers(1, 3)))
            descent = rg.solve_equilibrium(spec)
            dynamics = rg.best_response_dynamics(
                spec, rg.ActionProfile(np.full(n, spec.cap))
            )
            assert np.max(np.abs(descent.profile.lambdas - dynamics.profile.lambdas)) <= 1e-6

    def test_no_profitable_unilateral_deviation(self):
        rng = np.random.default_rng(35)
        for _ in range(5):
            spec = random_monomial_spec(rng, 4, 2)
            result = rg.solve_equilibrium(spec)
            assert rg.max_unilateral_improvement(spec, result.profile) <= 1e-7

    def test_permutation_invariance(self):
        rng = np.random.default_rng(37)
        spec = random_monomial_spec(rng, 5, 2)
        result = rg.solve_equilibrium(spec)
        perm = rng.permutation(5)
        permuted_spec = rg.GameSpec(
            rg.RegressionInstance(spec.instance.features[perm], 1.0),
            tuple(spec.costs[i] for i in perm),
            spec.kind,
        )
        permuted = rg.solve_equilibrium(permuted_spec)
        np.testing.assert_allclose(
            permuted.profile.lambdas, result.profile.lambdas[perm], atol=1e-6
        )

    def test_symmetric_instance_symmetric_equilibrium(self):
        spec = rg.GameSpec(make_instance([[1.0]] * 4), monomials(4))
        lam = rg.solve_equilibrium(spec).profile.lambdas
        assert np.max(lam) - np.min(lam) <= 1e-8

    def test_iteration_budget_enforced(self):
        with pytest.raises(rg.ConvergenceError):
            rg.solve_equilibrium(spec_b(), tol=1e-12, max_iter=2)


class TestKktResidual:
    def test_zero_at_equilibrium(self):
        assert rg.kkt_residual(spec_b(), profile(0.5, 0.5)) <= 1e-12

    def test_direct_value_off_equilibrium(self):
        expected = abs(-1.0 / 1.44 + 1.2)
        assert rg.kkt_residual(spec_b(), profile(0.6, 0.6)) == pytest.approx(expected)

    def test_cap_with_inward_gradient_contributes_nothing(self):
        # At the cap the gradient -1/4 + 2e-6 still points outward, so the
        # clamped coordinates contribute no residual at all.
        costs = (rg.MonomialCost(1e-6, 2.0), rg.MonomialCost(1e-6, 2.0))
        spec = rg.GameSpec(instance_b(), costs)
        assert rg.kkt_residual(spec, profile(1.0, 1.0)) == 0.0

    def test_infinite_potential_rejected(self):
        spec = rg.GameSpec(identity_instance(), monomials(2))
        with pytest.raises(rg.InfiniteCostError):
            rg.kkt_residual(spec, profile(0.0, 0.0))


class TestTrivialEquilibrium:
    def test_zero_profile_in_two_dimensions(self):
        spec = rg.GameSpec(identity_instance(), monomials(2))
        assert rg.is_trivial_equilibrium(spec, profile(0.0, 0.0))

    def test_single_deviation_restores_rank(self):
        spec = rg.GameSpec(identity_instance(), monomials(2))
        assert not rg.is_trivial_equilibrium(spec, profile(1.0, 0.0))

    def test_one_dimension_never_trivial(self):
        assert not rg.is_trivial_equilibrium(spec_b(), profile(0.0, 0.0))
