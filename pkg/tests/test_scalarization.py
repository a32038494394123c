import math

import numpy as np
import pytest

import regression_game as rg
from helpers import identity_instance, instance_b, interior_profile, random_instance

TRACE = rg.ScalarizationKind.TRACE
FROB = rg.ScalarizationKind.FROBENIUS_SQUARED


def profile(*values):
    return rg.ActionProfile(np.array(values))


def rel_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12))


class TestIsDegenerate:
    def test_missing_direction(self):
        assert rg.is_degenerate(identity_instance(), profile(1.0, 0.0))

    def test_eigenvalue_below_threshold(self):
        # min eig 1e-13 is under the 1e-12 * (1 + max eig) = 2e-12 cutoff.
        assert rg.is_degenerate(identity_instance(), profile(1e-13, 1.0))

    def test_rank_one_suffices_in_one_dimension(self):
        assert not rg.is_degenerate(instance_b(), profile(0.5, 0.0))


class TestEstimationCost:
    def test_trace_of_identity(self):
        cost = rg.estimation_cost(identity_instance(), profile(1.0, 1.0), TRACE)
        assert cost.finite and cost.value == pytest.approx(2.0)

    def test_frobenius_of_identity(self):
        cost = rg.estimation_cost(identity_instance(), profile(1.0, 1.0), FROB)
        assert cost.value == pytest.approx(2.0)

    def test_singular_precision_is_infinite(self):
        cost = rg.estimation_cost(identity_instance(), profile(1.0, 0.0), TRACE)
        assert not cost.finite and math.isinf(cost.value)

    def test_perturbed_cost_matches_covariance_oracle(self):
        inst = instance_b()
        est = rg.EstimatorSpec(np.array([[0.5], [-0.5]]), 1.0)
        lam = profile(0.5, 0.5)
        expected = float(np.trace(rg.lue_covariance(inst, lam, est)))
        cost = rg.estimation_cost(inst, lam, TRACE, est)
        assert cost.value == pytest.approx(expected)
        assert expected == pytest.approx(2.0)

    def test_zero_weight_under_perturbation_is_infinite(self):
        inst = instance_b()
        est = rg.EstimatorSpec(np.array([[0.5], [-0.5]]), 1.0)
        assert not rg.estimation_cost(inst, profile(0.0, 0.5), TRACE, est).finite

    def test_frobenius_rejects_effective_perturbation(self):
        inst = instance_b()
        est = rg.EstimatorSpec(np.array([[0.5], [-0.5]]), 1.0)
        with pytest.raises(ValueError, match="trace"):
            rg.estimation_cost(inst, profile(0.5, 0.5), FROB, est)
        # A scaling of zero leaves plain least squares, which is fine.
        cost = rg.estimation_cost(inst, profile(0.5, 0.5), FROB, rg.EstimatorSpec(est.null_matrix, 0.0))
        assert cost.finite

    def test_monotone_nonincreasing_in_profile(self):
        rng = np.random.default_rng(2)
        for kind in (TRACE, FROB):
            for _ in range(15):
                inst = random_instance(rng, 5, 2)
                lower = rng.uniform(0.05, 0.6, 5)
                higher = np.minimum(lower + rng.uniform(0.0, 0.4, 5), 1.0)
                c_low = rg.estimation_cost(inst, rg.ActionProfile(higher), kind).value
                c_high = rg.estimation_cost(inst, rg.ActionProfile(lower), kind).value
                assert c_low <= c_high + 1e-12

    def test_convexity_probe(self):
        rng = np.random.default_rng(4)
        for kind in (TRACE, FROB):
            for _ in range(10):
                inst = random_instance(rng, 4, 2)
                a = rng.uniform(0.1, 1.0, 4)
                b = rng.uniform(0.1, 1.0, 4)
                fa = rg.estimation_cost(inst, rg.ActionProfile(a), kind).value
                fb = rg.estimation_cost(inst, rg.ActionProfile(b), kind).value
                for alpha in np.linspace(0.0, 1.0, 7):
                    mix = alpha * a + (1 - alpha) * b
                    fmix = rg.estimation_cost(inst, rg.ActionProfile(mix), kind).value
                    assert fmix <= alpha * fa + (1 - alpha) * fb + 1e-10


class TestGradient:
    def test_trace_identity(self):
        grad = rg.estimation_cost_gradient(identity_instance(), profile(1.0, 1.0), TRACE)
        np.testing.assert_allclose(grad, [-1.0, -1.0])

    def test_frobenius_identity(self):
        grad = rg.estimation_cost_gradient(identity_instance(), profile(1.0, 1.0), FROB)
        np.testing.assert_allclose(grad, [-2.0, -2.0])

    def test_perturbed_gradient_matches_finite_differences(self):
        inst = instance_b()
        est = rg.EstimatorSpec(np.array([[0.5], [-0.5]]), 1.0)
        lam = profile(0.5, 0.5)
        grad = rg.estimation_cost_gradient(inst, lam, TRACE, est)
        np.testing.assert_allclose(grad, [-2.0, -2.0], rtol=1e-12)
        fd = rg.finite_difference_gradient(inst, lam, TRACE, est)
        assert rel_error(grad, fd) <= 1e-5

    def test_infinite_cost_raises(self):
        with pytest.raises(rg.InfiniteCostError):
            rg.estimation_cost_gradient(identity_instance(), profile(1.0, 0.0), TRACE)

    def test_strictly_negative_at_interior_for_trace(self):
        rng = np.random.default_rng(6)
        for _ in range(15):
            inst = random_instance(rng, 6, 3)
            lam = interior_profile(rng, inst)
            grad = rg.estimation_cost_gradient(inst, lam, TRACE)
            assert np.all(grad < 0)


class TestFiniteDifferenceOracle:
    def test_consistency_on_identity(self):
        inst = identity_instance()
        lam = profile(1.0, 1.0)
        fd = rg.finite_difference_gradient(inst, lam, TRACE)
        analytic = rg.estimation_cost_gradient(inst, lam, TRACE)
        np.testing.assert_allclose(fd, analytic, atol=1e-6)

    def test_zero_step_rejected(self):
        with pytest.raises(ValueError, match="step"):
            rg.finite_difference_gradient(identity_instance(), profile(1.0, 1.0), TRACE, step=0.0)

    def test_random_instances_both_kinds(self):
        rng = np.random.default_rng(8)
        for kind in (TRACE, FROB):
            for _ in range(10):
                inst = random_instance(rng, 4, 2)
                lam = interior_profile(rng, inst)
                analytic = rg.estimation_cost_gradient(inst, lam, kind)
                fd = rg.finite_difference_gradient(inst, lam, kind)
                assert rel_error(analytic, fd) <= 1e-5

    def test_stencil_below_zero(self):
        with pytest.raises(rg.StencilError, match="domain"):
            rg.finite_difference_gradient(instance_b(), profile(1e-8, 0.5), TRACE)

    def test_stencil_hits_infinite_cost(self):
        # Stepping 1e-6 down from this coordinate crosses the singularity cutoff.
        with pytest.raises(rg.StencilError, match="infinite"):
            rg.finite_difference_gradient(identity_instance(), profile(1e-6 + 1e-13, 1.0), TRACE)


def test_analytic_matches_finite_difference_on_100_random_instances():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(1, min(n, 3) + 1))
        inst = random_instance(rng, n, d)
        lam = interior_profile(rng, inst)
        kind = TRACE if rng.random() < 0.5 else FROB
        analytic = rg.estimation_cost_gradient(inst, lam, kind)
        fd = rg.finite_difference_gradient(inst, lam, kind)
        worst = max(worst, rel_error(analytic, fd))
    assert worst <= 1e-5
