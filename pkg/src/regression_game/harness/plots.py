"""Figure rendering for experiment reports.

Each experiment type maps to one matplotlib figure saved next to the
delimited report.  Figures are diagnostic companions to the tables, never a
replacement: all numbers live in the CSV/JSONL output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIG_SIZE = (6.4, 4.2)
DPI = 150


def _ok_rows(records: list[dict]) -> list[dict]:
    return [r for r in records if not r.get("error")]


def _lambda_matrix(rows: list[dict], prefix: str = "lambda_") -> np.ndarray:
    count = sum(1 for key in rows[0] if key.startswith(prefix) and key[len(prefix):].isdigit())
    return np.array([[row[f"{prefix}{i}"] for i in range(count)] for row in rows])


def _plot_profiles(ax, rows: list[dict], prefix: str, title: str) -> None:
    lambdas = _lambda_matrix(rows, prefix)
    players = np.arange(lambdas.shape[1])
    for row_values in lambdas:
        ax.plot(players, row_values, "o-", alpha=0.45, linewidth=1)
    ax.set_xlabel("player index")
    ax.set_ylabel("lambda")
    ax.set_title(title)
    ax.set_xticks(players)


def _figure_equilibrium(records: list[dict]):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    _plot_profiles(ax, records, "lambda_", "equilibrium profiles per cell")
    return fig


def _figure_social_opt(records: list[dict]):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    _plot_profiles(ax, records, "lambda_", "socially optimal profiles per cell")
    return fig


def _figure_pos(records: list[dict]):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    cells = [r["cell"] for r in records]
    ax.plot(cells, [r["pos"] for r in records], "o", label="price of stability")
    ax.plot(cells, [r["bound"] for r in records], "k--", label="theoretical bound")
    ax.axhline(1.0, color="gray", linewidth=0.8)
    ax.set_xlabel("cell")
    ax.set_ylabel("ratio")
    ax.set_title("price of stability vs bound")
    ax.legend()
    return fig


def _figure_aitken(records: list[dict]):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    gls = np.array([r["gls_cost"] for r in records])
    lue = np.array([r["lue_cost"] for r in records])
    ax.scatter(gls, lue, zorder=3)
    lim = (0.0, max(gls.max(), lue.max()) * 1.05)
    ax.plot(lim, lim, "k--", linewidth=0.8, label="equal cost")
    ax.set_xlim(lim)
    ax.set_ylim(lim)
    ax.set_xlabel("equilibrium cost under GLS")
    ax.set_ylabel("equilibrium cost under perturbed estimator")
    ax.set_title("strategic estimator comparison")
    ax.legend()
    return fig


def _figure_sweep(records: list[dict]):
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(FIG_SIZE[0], 6.4), sharex=True)
    cells = sorted({r["cell"] for r in records})
    for cell in cells:
        rows = [r for r in records if r["cell"] == cell]
        a = [r["a"] for r in rows]
        top.plot(a, [r["estimation_cost"] for r in rows], "o-", label=f"cell {cell}")
        lambdas = _lambda_matrix(rows)
        for j in range(lambdas.shape[1]):
            bottom.plot(a, lambdas[:, j], "-", alpha=0.6)
    top.set_ylabel("equilibrium estimation cost")
    top.set_title("scaling sweep")
    if len(cells) > 1:
        top.legend()
    bottom.set_xlabel("perturbation scale a")
    bottom.set_ylabel("equilibrium lambda")
    return fig


def _figure_montecarlo(records: list[dict]):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    cells = np.array([r["cell"] for r in records], dtype=float)
    width = 0.4
    ax.bar(cells - width / 2, [r["mean_deviation"] for r in records], width, label="mean deviation")
    ax.bar(cells + width / 2, [r["covariance_deviation"] for r in records], width,
           label="covariance deviation")
    ax.set_xlabel("cell")
    ax.set_ylabel("max absolute deviation")
    ax.set_title("Monte Carlo vs analytic moments")
    ax.legend()
    return fig


def _figure_gradcheck(records: list[dict]):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    cells = [r["cell"] for r in records]
    for key, label in (
        ("max_rel_err_trace", "trace"),
        ("max_rel_err_frob", "frobenius^2"),
        ("max_rel_err_lue", "perturbed"),
    ):
        values = [r[key] for r in records]
        if any(v is not None for v in values):
            ax.semilogy(cells, values, "o", label=label)
    ax.axhline(1e-5, color="k", linestyle="--", linewidth=0.8, label="tolerance")
    ax.set_xlabel("cell")
    ax.set_ylabel("max relative gradient error")
    ax.set_title("analytic vs finite-difference gradients")
    ax.legend()
    return fig


_FIGURES = {
    "equilibrium": _figure_equilibrium,
    "social-opt": _figure_social_opt,
    "pos": _figure_pos,
    "aitken": _figure_aitken,
    "sweep": _figure_sweep,
    "montecarlo": _figure_montecarlo,
    "gradcheck": _figure_gradcheck,
}


def render_figures(records: list[dict], out_stem: str | Path) -> list[Path]:
    """Render the figure for a report next to its delimited output.

    ``out_stem`` is the report path without extension; the figure lands at
    ``<stem>_<experiment>.png``.  Error rows are skipped; nothing is rendered
    when no cell succeeded.
    """
    rows = _ok_rows(records)
    if not rows:
        return []
    experiment = rows[0]["experiment"]
    fig = _FIGURES[experiment](rows)
    fig.tight_layout()
    path = Path(f"{out_stem}_{experiment}.png")
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return [path]
