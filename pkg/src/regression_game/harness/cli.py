"""Command-line front end.

One subcommand per experiment type; all of them share the same flags and the
same flow: load and validate the config, run every cell, emit the report,
optionally render figures.  Exit codes: 0 on success, 2 on a config error,
3 when any cell's solver failed.
"""

from __future__ import annotations

import dataclasses
import sys
import time
from pathlib import Path

import click

from ..exceptions import ConfigError
from .config import EXPERIMENTS, load_config, validate_experiment
from .reports import emit
from .runner import run

EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_ERROR = 3


def _common_options(command):
    decorators = [
        click.option("--config", "config_path", required=True,
                     type=click.Path(dir_okay=False), help="Path to a JSON config file."),
        click.option("--out", "out_path", type=click.Path(dir_okay=False),
                     help="Report destination (defaults to the config's output, else stdout)."),
        click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]),
                     help="Report format (overrides the config)."),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1),
                     help="Override the config seed."),
        click.option("--tol", type=float, help="Override the solver tolerance."),
        click.option("--workers", type=click.IntRange(1), default=1, show_default=True,
                     help="Worker threads for independent cells."),
        click.option("--plot", is_flag=True,
                     help="Render the experiment figure next to the report (requires --out)."),
    ]
    for decorator in reversed(decorators):
        command = decorator(command)
    return command


def _fail_config(message: str) -> None:
    click.echo(f"config error: {message}", err=True)
    sys.exit(EXIT_CONFIG_ERROR)


def _execute(experiment, config_path, out_path, fmt, seed, tol, workers, plot):
    try:
        config = load_config(config_path)
        if config.experiment is not None and config.experiment != experiment:
            raise ConfigError(
                f"{config_path}.experiment: config says {config.experiment!r} "
                f"but the {experiment!r} subcommand was invoked"
            )
        updates = {"experiment": experiment}
        if seed is not None:
            updates["seed"] = seed
        if tol is not None:
            if tol <= 0:
                raise ConfigError("--tol must be positive")
            updates["solver"] = dataclasses.replace(config.solver, tol=tol)
        config = dataclasses.replace(config, **updates)
        validate_experiment(config, experiment, source=str(config_path))
        destination = out_path or config.output
        if plot and destination is None:
            raise ConfigError("--plot requires a report file (--out or config output)")
    except ConfigError as exc:
        _fail_config(str(exc))

    started = time.perf_counter()
    records = run(config, workers=workers)
    elapsed = time.perf_counter() - started

    fmt = fmt or config.fmt
    if destination is None:
        emit(records, fmt, sys.stdout)
    else:
        emit(records, fmt, destination)
        click.echo(f"wrote {len(records)} rows to {destination} in {elapsed:.2f}s", err=True)
    if plot:
        from .plots import render_figures

        stem = str(Path(destination).with_suffix(""))
        for figure in render_figures(records, stem):
            click.echo(f"wrote figure {figure}", err=True)

    failures = [r for r in records if r.get("error")]
    if failures:
        for row in failures:
            click.echo(f"cell {row['cell']}: {row['error']}", err=True)
        sys.exit(EXIT_SOLVER_ERROR)


@click.group()
@click.version_option(package_name="regression-game")
def main():
    """Equilibria, efficiency, and estimator experiments for the regression game."""


def _register(experiment: str) -> None:
    @main.command(name=experiment, help=f"Run the {experiment} experiment from a config.")
    @_common_options
    def command(config_path, out_path, fmt, seed, tol, workers, plot, _experiment=experiment):
        _execute(_experiment, config_path, out_path, fmt, seed, tol, workers, plot)


for _experiment in EXPERIMENTS:
    _register(_experiment)


if __name__ == "__main__":
    main()
