"""Experiment orchestration: deterministic, seeded, cell-by-cell execution.

A config expands into ``cells`` independent repetitions.  Every random stream
(feature generation, model draw, perturbation direction, simulation noise) is
derived from the relevant seed together with the cell index, so re-running a
config reproduces its output exactly, regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..aitken import aitken_compare, scaling_sweep
from ..efficiency import price_of_stability, social_cost, solve_social_optimum
from ..estimation import ActionProfile, EstimatorSpec, RegressionInstance, monte_carlo_validate, random_null_direction
from ..exceptions import RegressionGameError
from ..game import GameSpec, MonomialCost, solve_equilibrium
from ..scalarization import (
    ScalarizationKind,
    estimation_cost_gradient,
    finite_difference_gradient,
)
from .config import ExperimentConfig, GeneratedInstance, InlineInstance, validate_experiment

# Stream tags keep the per-cell RNG streams for different purposes disjoint.
_TAG_FEATURES = 1
_TAG_MODEL = 2
_TAG_ESTIMATOR = 3
_TAG_NOISE = 4
_TAG_PROFILE = 5


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _generate_features(gen: GeneratedInstance, rng: np.random.Generator) -> np.ndarray:
    X = rng.standard_normal((gen.n, gen.d))
    if gen.feature_distribution == "uniform_sphere" or gen.normalize_rows:
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X


def _build_instance(config: ExperimentConfig, cell: int) -> RegressionInstance:
    source = config.instance
    if isinstance(source, InlineInstance):
        return RegressionInstance(
            np.array(source.features), source.inherent_variance, source.true_model
        )
    seed = source.seed if source.seed is not None else config.seed
    rng = np.random.default_rng(_derive_seed(seed, cell, _TAG_FEATURES))
    features = _generate_features(source, rng)
    true_model = None
    if config.experiment == "montecarlo":
        model_rng = np.random.default_rng(_derive_seed(seed, cell, _TAG_MODEL))
        true_model = model_rng.standard_normal(source.d)
    return RegressionInstance(features, 1.0, true_model)


def _build_spec(
    config: ExperimentConfig, instance: RegressionInstance, estimator: EstimatorSpec | None
) -> GameSpec:
    costs = tuple(MonomialCost(c, k) for c, k in config.costs)
    return GameSpec(instance, costs, config.scalarization, estimator)


def _build_estimator(
    config: ExperimentConfig, instance: RegressionInstance, cell: int, scaling: float
) -> EstimatorSpec:
    params = config.estimator
    seed = params.seed if params.seed is not None else config.seed
    D = random_null_direction(instance, params.d_norm, _derive_seed(seed, cell, _TAG_ESTIMATOR))
    return EstimatorSpec(D, scaling)


def _profile_for(config: ExperimentConfig, instance: RegressionInstance, cell: int) -> ActionProfile:
    if config.profile is not None:
        return ActionProfile(np.array(config.profile))
    if config.experiment == "gradcheck":
        rng = np.random.default_rng(_derive_seed(config.seed, cell, _TAG_PROFILE))
        return ActionProfile(rng.uniform(0.2, 1.0, instance.n) * instance.cap)
    return ActionProfile(np.full(instance.n, instance.cap))


def _common_k(config: ExperimentConfig):
    exponents = {k for _, k in config.costs}
    return exponents.pop() if len(exponents) == 1 else "mixed"


def _base_row(config: ExperimentConfig, cell: int) -> dict:
    return {
        "experiment": config.experiment,
        "cell": cell,
        "seed": config.seed,
        "n": config.n,
        "d": config.d,
        "k": _common_k(config),
        "kind": config.scalarization.value,
    }


def _lambda_columns(prefix: str, values) -> dict:
    return {f"{prefix}{i}": float(v) for i, v in enumerate(values)}


def _none_lambdas(prefix: str, n: int) -> dict:
    return {f"{prefix}{i}": None for i in range(n)}


def _rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / scale))


def _cell_equilibrium(config: ExperimentConfig, cell: int) -> list[dict]:
    instance = _build_instance(config, cell)
    estimator = None
    if config.estimator is not None:
        estimator = _build_estimator(config, instance, cell, config.estimator.a)
    spec = _build_spec(config, instance, estimator)
    result = solve_equilibrium(spec, config.solver.tol, config.solver.max_iter)
    row = _base_row(config, cell) | {
        "status": result.status.value,
        "iterations": result.iterations,
        "kkt_residual": float(result.kkt_residual),
        "potential": float(result.potential_value),
        "estimation_cost": float(result.estimation_cost),
        "social_cost": float(social_cost(spec, result.profile)),
    }
    row |= _lambda_columns("lambda_", result.profile.lambdas)
    return [row | {"error": None}]


def _cell_social_opt(config: ExperimentConfig, cell: int) -> list[dict]:
    instance = _build_instance(config, cell)
    spec = _build_spec(config, instance, None)
    profile = solve_social_optimum(spec, config.solver.tol, config.solver.max_iter)
    row = _base_row(config, cell) | {
        "social_cost": float(social_cost(spec, profile)),
    }
    row |= _lambda_columns("lambda_", profile.lambdas)
    return [row | {"error": None}]


def _cell_pos(config: ExperimentConfig, cell: int) -> list[dict]:
    instance = _build_instance(config, cell)
    spec = _build_spec(config, instance, None)
    report = price_of_stability(spec, config.solver.tol, config.solver.max_iter)
    row = _base_row(config, cell) | {
        "pos": float(report.pos),
        "bound": float(report.bound),
        "bound_source": report.bound_source.value,
        "bound_satisfied": bool(report.bound_satisfied),
        "nash_social_cost": float(report.nash_social_cost),
        "opt_cost": float(report.opt_cost),
        "sandwich_lower_ok": None if report.sandwich is None else bool(report.sandwich.lower_ok),
        "sandwich_upper_ok": None if report.sandwich is None else bool(report.sandwich.upper_ok),
    }
    row |= _lambda_columns("lambda_star_", report.nash.profile.lambdas)
    row |= _lambda_columns("lambda_opt_", report.social_optimum.lambdas)
    return [row | {"error": None}]


def _cell_aitken(config: ExperimentConfig, cell: int) -> list[dict]:
    instance = _build_instance(config, cell)
    spec = _build_spec(config, instance, None)
    estimator = _build_estimator(config, instance, cell, config.estimator.a)
    comparison = aitken_compare(spec, estimator, config.solver.tol, config.solver.max_iter)
    row = _base_row(config, cell) | {
        "a": float(config.estimator.a),
        "d_norm": float(config.estimator.d_norm),
        "gls_cost": float(comparison.gls_cost),
        "lue_cost": float(comparison.lue_cost),
        "margin": float(comparison.margin),
        "holds": bool(comparison.holds),
    }
    return [row | {"error": None}]


def _cell_sweep(config: ExperimentConfig, cell: int) -> list[dict]:
    instance = _build_instance(config, cell)
    spec = _build_spec(config, instance, None)
    probe = _build_estimator(config, instance, cell, 1.0)
    sweep = scaling_sweep(
        spec, probe.null_matrix, config.estimator.a_grid, config.solver.tol, config.solver.max_iter
    )
    rows = []
    for idx, a in enumerate(sweep.grid):
        row = _base_row(config, cell) | {
            "a": float(a),
            "estimation_cost": float(sweep.costs[idx]),
            "monotone": bool(sweep.monotone),
            "max_violation": float(sweep.max_violation),
            "profile_monotone": bool(sweep.profile_monotone),
            "max_profile_violation": float(sweep.max_profile_violation),
        }
        row |= _lambda_columns("lambda_", sweep.profiles[idx])
        rows.append(row | {"error": None})
    return rows


def _cell_montecarlo(config: ExperimentConfig, cell: int) -> list[dict]:
    instance = _build_instance(config, cell)
    estimator = None
    if config.estimator is not None:
        estimator = _build_estimator(config, instance, cell, config.estimator.a)
    profile = _profile_for(config, instance, cell)
    report = monte_carlo_validate(
        instance,
        profile,
        estimator,
        config.montecarlo.noise,
        config.montecarlo.trials,
        _derive_seed(config.seed, cell, _TAG_NOISE),
    )
    row = _base_row(config, cell) | {
        "trials": int(report.trials),
        "noise": config.montecarlo.noise.value,
        "mean_deviation": float(report.mean_deviation),
        "covariance_deviation": float(report.covariance_deviation),
    }
    return [row | {"error": None}]


def _cell_gradcheck(config: ExperimentConfig, cell: int) -> list[dict]:
    instance = _build_instance(config, cell)
    profile = _profile_for(config, instance, cell)
    errors = {}
    for label, kind in (
        ("max_rel_err_trace", ScalarizationKind.TRACE),
        ("max_rel_err_frob", ScalarizationKind.FROBENIUS_SQUARED),
    ):
        analytic = estimation_cost_gradient(instance, profile, kind)
        numeric = finite_difference_gradient(instance, profile, kind)
        errors[label] = _rel_error(analytic, numeric)
    if config.estimator is not None:
        estimator = _build_estimator(config, instance, cell, config.estimator.a)
        analytic = estimation_cost_gradient(
            instance, profile, ScalarizationKind.TRACE, estimator
        )
        numeric = finite_difference_gradient(
            instance, profile, ScalarizationKind.TRACE, estimator
        )
        errors["max_rel_err_lue"] = _rel_error(analytic, numeric)
    else:
        errors["max_rel_err_lue"] = None
    present = [v for v in errors.values() if v is not None]
    row = _base_row(config, cell) | errors | {"max_rel_err": max(present)}
    return [row | {"error": None}]


_CELL_RUNNERS = {
    "equilibrium": _cell_equilibrium,
    "social-opt": _cell_social_opt,
    "pos": _cell_pos,
    "aitken": _cell_aitken,
    "sweep": _cell_sweep,
    "montecarlo": _cell_montecarlo,
    "gradcheck": _cell_gradcheck,
}


def _error_keys(config: ExperimentConfig) -> list[str]:
    """Column template for a failed cell, matching the experiment's key set."""
    keys = list(_base_row(config, 0))
    extras = {
        "equilibrium": ["status", "iterations", "kkt_residual", "potential",
                        "estimation_cost", "social_cost"]
        + [f"lambda_{i}" for i in range(config.n)],
        "social-opt": ["social_cost"] + [f"lambda_{i}" for i in range(config.n)],
        "pos": ["pos", "bound", "bound_source", "bound_satisfied", "nash_social_cost",
                "opt_cost", "sandwich_lower_ok", "sandwich_upper_ok"]
        + [f"lambda_star_{i}" for i in range(config.n)]
        + [f"lambda_opt_{i}" for i in range(config.n)],
        "aitken": ["a", "d_norm", "gls_cost", "lue_cost", "margin", "holds"],
        "sweep": ["a", "estimation_cost", "monotone", "max_violation",
                  "profile_monotone", "max_profile_violation"]
        + [f"lambda_{i}" for i in range(config.n)],
        "montecarlo": ["trials", "noise", "mean_deviation", "covariance_deviation"],
        "gradcheck": ["max_rel_err_trace", "max_rel_err_frob", "max_rel_err_lue",
                      "max_rel_err"],
    }
    return keys + extras[config.experiment] + ["error"]


def _run_cell(config: ExperimentConfig, cell: int) -> list[dict]:
    try:
        return _CELL_RUNNERS[config.experiment](config, cell)
    except RegressionGameError as exc:
        row = dict.fromkeys(_error_keys(config))
        row.update(_base_row(config, cell))
        row["error"] = f"{type(exc).__name__}: {exc}"
        return [row]


def run(config: ExperimentConfig, workers: int = 1) -> list[dict]:
    """Execute every cell of the config and return the flat report rows.

    Rows appear in cell order (and grid order within a sweep cell) no matter
    how many workers execute the cells; a failing cell contributes a row with
    its error recorded instead of aborting the remaining cells.
    """
    if config.experiment is None:
        raise ValueError("config.experiment must be set before running")
    validate_experiment(config, config.experiment)
    cells = range(config.cells)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda c: _run_cell(config, c), cells))
    else:
        chunks = [_run_cell(config, cell) for cell in cells]
    return [row for chunk in chunks for row in chunk]
