"""Shared builders for test instances and specs."""

from __future__ import annotations

import numpy as np

import regression_game as rg

# The two-player single-feature reference design used throughout the tests:
# X = [[1], [1]], unit inherent variance.
B_ROWS = [[1.0], [1.0]]


def make_instance(rows, variance=1.0, beta=None) -> rg.RegressionInstance:
    return rg.RegressionInstance(np.array(rows, dtype=float), variance, beta)


def instance_b() -> rg.RegressionInstance:
    return make_instance(B_ROWS)


def identity_instance(d=2, beta=None) -> rg.RegressionInstance:
    return make_instance(np.eye(d), 1.0, beta)


def monomials(n, c=1.0, k=2.0):
    return tuple(rg.MonomialCost(c, k) for _ in range(n))


def spec_b(k=2.0) -> rg.GameSpec:
    return rg.GameSpec(instance_b(), monomials(2, 1.0, k))


def random_instance(rng, n, d, normalize=True, min_sv_ratio=0.15) -> rg.RegressionInstance:
    # Redraw pathologically thin designs: a nearly singular X wrecks the
    # finite-difference oracle (roundoff noise ~ eps * f / h) without saying
    # anything about the code under test.
    if n < d:
        raise ValueError("random_instance needs n >= d")
    while True:
        X = rng.standard_normal((n, d))
        if normalize:
            X /= np.linalg.norm(X, axis=1, keepdims=True)
        svals = np.linalg.svd(X, compute_uv=False)
        if svals[-1] < min_sv_ratio * svals[0]:
            continue
        return rg.RegressionInstance(X, 1.0)


def random_monomial_spec(rng, n, d, k=None, kind=rg.ScalarizationKind.TRACE) -> rg.GameSpec:
    instance = random_instance(rng, n, d)
    exponents = k if k is not None else rng.choice([1.5, 2.0, 3.0, 4.0])
    coefficients = rng.uniform(0.3, 3.0, n)
    costs = tuple(rg.MonomialCost(float(c), float(exponents)) for c in coefficients)
    return rg.GameSpec(instance, costs, kind)


def interior_profile(rng, instance, low=0.2, high=1.0) -> rg.ActionProfile:
    cap = instance.cap
    return rg.ActionProfile(rng.uniform(low, high, instance.n) * cap)
