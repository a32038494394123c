"""Experiment configuration: a strict, versioned JSON schema.

Configs are plain JSON with an explicit ``schema_version``.  Unknown keys are
rejected everywhere, and every validation error carries the dotted path of
the offending field, because a silently ignored typo corrupts an experiment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..estimation import NoiseKind, RegressionInstance
from ..exceptions import ConfigError
from ..scalarization import ScalarizationKind

SCHEMA_VERSION = 1
EXPERIMENTS = (
    "equilibrium",
    "social-opt",
    "pos",
    "aitken",
    "sweep",
    "montecarlo",
    "gradcheck",
)
FEATURE_DISTRIBUTIONS = ("gaussian", "uniform_sphere")
FORMATS = ("csv", "jsonl")
MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class InlineInstance:
    features: tuple[tuple[float, ...], ...]
    inherent_variance: float
    true_model: tuple[float, ...] | None

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def d(self) -> int:
        return len(self.features[0])


@dataclass(frozen=True)
class GeneratedInstance:
    n: int
    d: int
    feature_distribution: str
    seed: int | None
    normalize_rows: bool


@dataclass(frozen=True)
class EstimatorParams:
    d_norm: float
    a: float
    a_grid: int | None
    seed: int | None


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-8
    max_iter: int = 100_000


@dataclass(frozen=True)
class MonteCarloParams:
    trials: int
    noise: NoiseKind


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, immutable description of one experiment run."""

    experiment: str
    seed: int
    cells: int
    instance: InlineInstance | GeneratedInstance
    costs: tuple[tuple[float, float], ...]
    scalarization: ScalarizationKind
    estimator: EstimatorParams | None
    solver: SolverParams
    montecarlo: MonteCarloParams | None
    profile: tuple[float, ...] | None
    output: str | None
    fmt: str

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def d(self) -> int:
        return self.instance.d


def _require_keys(data: dict, allowed: set[str], path: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{path}.{key}: unknown key")


def _get_number(data: dict, key: str, path: str, *, required=False, default=None):
    if key not in data:
        if required:
            raise ConfigError(f"{path}.{key}: required field missing")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {type(value).__name__}")
    return value


def _get_int(data: dict, key: str, path: str, *, required=False, default=None):
    value = _get_number(data, key, path, required=required, default=default)
    if value is None:
        return None
    if isinstance(value, float) and not value.is_integer():
        raise ConfigError(f"{path}.{key}: expected an integer")
    return int(value)


def _get_seed(data: dict, key: str, path: str, *, default=None):
    seed = _get_int(data, key, path, default=default)
    if seed is None:
        return None
    if not 0 <= seed <= MAX_SEED:
        raise ConfigError(f"{path}.{key}: seed must be an unsigned 64-bit integer")
    return seed


def _parse_instance(data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    if "features" in data:
        _require_keys(data, {"features", "inherent_variance", "true_model"}, path)
        features = data["features"]
        if (
            not isinstance(features, list)
            or not features
            or not all(isinstance(row, list) and row for row in features)
        ):
            raise ConfigError(f"{path}.features: expected a nonempty matrix (list of rows)")
        width = len(features[0])
        if any(len(row) != width for row in features):
            raise ConfigError(f"{path}.features: rows have inconsistent lengths")
        variance = _get_number(data, "inherent_variance", path, required=True)
        true_model = data.get("true_model")
        if true_model is not None:
            if not isinstance(true_model, list) or len(true_model) != width:
                raise ConfigError(f"{path}.true_model: expected a list of length d={width}")
        inline = InlineInstance(
            features=tuple(tuple(float(v) for v in row) for row in features),
            inherent_variance=float(variance),
            true_model=tuple(float(v) for v in true_model) if true_model else None,
        )
        try:
            RegressionInstance(np.array(inline.features), inline.inherent_variance)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return inline
    _require_keys(data, {"n", "d", "feature_distribution", "seed", "normalize_rows"}, path)
    n = _get_int(data, "n", path, required=True)
    d = _get_int(data, "d", path, required=True)
    if n < 1 or d < 1 or n < d:
        raise ConfigError(f"{path}: need n >= d >= 1, got n={n}, d={d}")
    distribution = data.get("feature_distribution", "gaussian")
    if distribution not in FEATURE_DISTRIBUTIONS:
        raise ConfigError(
            f"{path}.feature_distribution: expected one of {FEATURE_DISTRIBUTIONS}"
        )
    normalize = data.get("normalize_rows", True)
    if not isinstance(normalize, bool):
        raise ConfigError(f"{path}.normalize_rows: expected a boolean")
    if distribution == "uniform_sphere" and not normalize:
        raise ConfigError(f"{path}.normalize_rows: must stay true for uniform_sphere")
    return GeneratedInstance(
        n=n,
        d=d,
        feature_distribution=distribution,
        seed=_get_seed(data, "seed", path),
        normalize_rows=normalize,
    )


def _parse_cost_entry(entry, path: str) -> tuple[float, float]:
    if not isinstance(entry, dict):
        raise ConfigError(f"{path}: expected an object with keys c and k")
    _require_keys(entry, {"c", "k"}, path)
    c = _get_number(entry, "c", path, required=True)
    k = _get_number(entry, "k", path, required=True)
    if c <= 0:
        raise ConfigError(f"{path}.c: coefficient must be positive")
    if k < 1:
        raise ConfigError(f"{path}.k: exponent must be >= 1")
    return float(c), float(k)


def _parse_costs(data, n: int, path: str) -> tuple[tuple[float, float], ...]:
    if isinstance(data, list):
        if len(data) != n:
            raise ConfigError(f"{path}: expected {n} per-player entries, got {len(data)}")
        return tuple(_parse_cost_entry(item, f"{path}[{i}]") for i, item in enumerate(data))
    return (_parse_cost_entry(data, path),) * n


def _parse_estimator(data, path: str, *, n: int, d: int) -> EstimatorParams:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    _require_keys(data, {"d_norm", "a", "a_grid", "seed"}, path)
    d_norm = _get_number(data, "d_norm", path, required=True)
    if d_norm < 0:
        raise ConfigError(f"{path}.d_norm: must be nonnegative")
    if d_norm > 0 and n == d:
        raise ConfigError(f"{path}.d_norm: no null direction exists when n = d")
    a = _get_number(data, "a", path, default=1.0)
    if not 0.0 <= a <= 1.0:
        raise ConfigError(f"{path}.a: must lie in [0, 1]")
    a_grid = _get_int(data, "a_grid", path)
    if a_grid is not None and a_grid < 3:
        raise ConfigError(f"{path}.a_grid: need at least 3 grid points")
    return EstimatorParams(
        d_norm=float(d_norm), a=float(a), a_grid=a_grid, seed=_get_seed(data, "seed", path)
    )


def _parse_montecarlo(data, path: str) -> MonteCarloParams:
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    _require_keys(data, {"trials", "noise"}, path)
    trials = _get_int(data, "trials", path, required=True)
    if trials < 1:
        raise ConfigError(f"{path}.trials: must be >= 1")
    noise_token = data.get("noise", "gaussian")
    for kind in NoiseKind:
        if noise_token == kind.value:
            return MonteCarloParams(trials=trials, noise=kind)
    raise ConfigError(
        f"{path}.noise: expected one of {[k.value for k in NoiseKind]}"
    )


def config_from_dict(data: dict, source: str = "config") -> ExperimentConfig:
    """Validate a raw mapping and produce an :class:`ExperimentConfig`."""
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be an object")
    allowed = {
        "schema_version",
        "experiment",
        "seed",
        "cells",
        "instance",
        "costs",
        "scalarization",
        "estimator",
        "solver",
        "montecarlo",
        "profile",
        "output",
        "format",
    }
    _require_keys(data, allowed, source)
    version = _get_int(data, "schema_version", source, required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{source}.schema_version: expected {SCHEMA_VERSION}, got {version}"
        )
    experiment = data.get("experiment")
    if experiment is not None and experiment not in EXPERIMENTS:
        raise ConfigError(f"{source}.experiment: expected one of {EXPERIMENTS}")
    seed = _get_seed(data, "seed", source, default=0)
    cells = _get_int(data, "cells", source, default=1)
    if cells < 1:
        raise ConfigError(f"{source}.cells: must be >= 1")
    if "instance" not in data:
        raise ConfigError(f"{source}.instance: required field missing")
    instance = _parse_instance(data["instance"], f"{source}.instance")
    if "costs" not in data:
        raise ConfigError(f"{source}.costs: required field missing")
    costs = _parse_costs(data["costs"], instance.n, f"{source}.costs")

    token = data.get("scalarization", "trace")
    kinds = {k.value: k for k in ScalarizationKind}
    if token not in kinds:
        raise ConfigError(f"{source}.scalarization: expected one of {sorted(kinds)}")
    scalarization = kinds[token]

    estimator = None
    if data.get("estimator") is not None:
        estimator = _parse_estimator(
            data["estimator"], f"{source}.estimator", n=instance.n, d=instance.d
        )

    solver_data = data.get("solver", {})
    if not isinstance(solver_data, dict):
        raise ConfigError(f"{source}.solver: expected an object")
    _require_keys(solver_data, {"tol", "max_iter"}, f"{source}.solver")
    tol = _get_number(solver_data, "tol", f"{source}.solver", default=1e-8)
    if tol <= 0:
        raise ConfigError(f"{source}.solver.tol: must be positive")
    max_iter = _get_int(solver_data, "max_iter", f"{source}.solver", default=100_000)
    if max_iter < 1:
        raise ConfigError(f"{source}.solver.max_iter: must be >= 1")
    solver = SolverParams(tol=float(tol), max_iter=max_iter)

    montecarlo = None
    if data.get("montecarlo") is not None:
        montecarlo = _parse_montecarlo(data["montecarlo"], f"{source}.montecarlo")

    profile = data.get("profile")
    if profile is not None:
        if not isinstance(profile, list) or len(profile) != instance.n:
            raise ConfigError(f"{source}.profile: expected a list of length n={instance.n}")
        cap = 1.0 / instance.inherent_variance if isinstance(instance, InlineInstance) else None
        values = []
        for i, v in enumerate(profile):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"{source}.profile[{i}]: expected a nonnegative number")
            if cap is not None and v > cap * (1 + 1e-12):
                raise ConfigError(f"{source}.profile[{i}]: exceeds the action cap {cap}")
            values.append(float(v))
        profile = tuple(values)

    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError(f"{source}.output: expected a string path")
    fmt = data.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"{source}.format: expected one of {FORMATS}")

    config = ExperimentConfig(
        experiment=experiment,
        seed=seed,
        cells=cells,
        instance=instance,
        costs=costs,
        scalarization=scalarization,
        estimator=estimator,
        solver=solver,
        montecarlo=montecarlo,
        profile=profile,
        output=output,
        fmt=fmt,
    )
    if experiment is not None:
        validate_experiment(config, experiment, source)
    return config


def validate_experiment(config: ExperimentConfig, experiment: str, source: str = "config") -> None:
    """Cross-field consistency checks that depend on the experiment type."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"{source}.experiment: expected one of {EXPERIMENTS}")
    trace = config.scalarization is ScalarizationKind.TRACE
    if experiment in ("aitken", "sweep"):
        if config.estimator is None:
            raise ConfigError(f"{source}.estimator: required for the {experiment} experiment")
        if not trace:
            raise ConfigError(
                f"{source}.scalarization: {experiment} requires the trace scalarization"
            )
    if experiment == "sweep" and config.estimator.a_grid is None:
        raise ConfigError(f"{source}.estimator.a_grid: required for the sweep experiment")
    if experiment != "sweep" and config.estimator is not None and config.estimator.a_grid is not None:
        raise ConfigError(f"{source}.estimator.a_grid: only valid for the sweep experiment")
    if config.estimator is not None and not trace:
        raise ConfigError(
            f"{source}.estimator: perturbed estimators require the trace scalarization"
        )
    if experiment in ("pos", "social-opt") and config.estimator is not None:
        raise ConfigError(f"{source}.estimator: not supported for the {experiment} experiment")
    if experiment == "montecarlo":
        if config.montecarlo is None:
            raise ConfigError(f"{source}.montecarlo: required for the montecarlo experiment")
        if isinstance(config.instance, InlineInstance) and config.instance.true_model is None:
            raise ConfigError(
                f"{source}.instance.true_model: required for montecarlo with an inline instance"
            )
    if experiment != "montecarlo" and config.montecarlo is not None:
        raise ConfigError(f"{source}.montecarlo: only valid for the montecarlo experiment")


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config file ({exc})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data, source=str(path))
