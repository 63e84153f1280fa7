"""Render isinglab CSV tables into the standard figure set.

Figure kinds:

* ``gap_vs_n``               spectral gap against system size (log y), with
                             exponential-fit overlays taken from the fit CSV
* ``gap_vs_T``               spectral gap against temperature (log-log)
* ``gap_vs_qn``              spectral gap against group fraction q/n (log y)
* ``energy_trace``           ensemble mean cumulative energy per step (log x)
* ``magnetisation_trace``    ensemble mean cumulative magnetisation per step
* ``proposal_cdf``           cumulative Hamming / |dE| distributions

Every y value is taken verbatim from the CSV; the only transforms applied are
axis scales.  ``render`` returns the plotted series so callers can checksum
them against the source tables, and SVG output is deterministic: identical
inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = (
    "gap_vs_n",
    "gap_vs_T",
    "gap_vs_qn",
    "energy_trace",
    "magnetisation_trace",
    "proposal_cdf",
)

#: strategy family colours: uniform orange, local green, full quantum blue,
#: multi-group red, improved group light blue, naive group purple
FAMILY_COLORS = {
    "uniform": "tab:orange",
    "local_flip": "tab:green",
    "qemcmc_full": "tab:blue",
    "cg_multiple_groups": "tab:red",
    "cg_improved_local_group": "#56b4e9",
    "cg_naive_local_group": "tab:purple",
}

_SUFFIX = re.compile(r"(_q\d+|@sqrt_n)$")

_RC = {
    "svg.hashsalt": "isingfigs",
    "figure.figsize": (6.0, 4.2),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class SchemaError(ValueError):
    """A required CSV column or data row is missing."""


@dataclass
class FigureSpec:
    """One figure: kind, input tables, and output path."""

    kind: str
    csv: str
    out: str
    fit_csv: str | None = None
    oracle_csv: str | None = None
    title: str = ""

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(
                f"unknown figure kind {self.kind!r}, expected one of {FIGURE_KINDS}"
            )


def strategy_family(label: str) -> str:
    return _SUFFIX.sub("", label)


def color_for(label: str) -> str:
    return FAMILY_COLORS.get(strategy_family(label), "tab:gray")


def read_table(path, required=()) -> dict[str, list[str]]:
    """Parse one of the lab's CSV files into columns; validate the schema."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise SchemaError(f"{path} has no header row")
    header = lines[0].split(",")
    for column in required:
        if column not in header:
            raise SchemaError(f"{path} is missing required column {column!r}")
    if len(lines) < 2:
        raise SchemaError(f"{path} has no data rows")
    columns: dict[str, list[str]] = {name: [] for name in header}
    for line in lines[1:]:
        for name, value in zip(header, line.split(",")):
            columns[name].append(value)
    return columns


def _floats(values) -> np.ndarray:
    return np.array([float(v) for v in values])


def _series_by(columns, key_column, keys=None):
    labels = columns[key_column]
    order = sorted(set(labels)) if keys is None else keys
    for label in order:
        picks = [i for i, s in enumerate(labels) if s == label]
        yield label, picks


def _gap_series(spec, x_column):
    columns = read_table(
        spec.csv, required=("strategy", x_column, "delta_mean", "delta_err")
    )
    series = {}
    for label, picks in _series_by(columns, "strategy"):
        xs = _floats([columns[x_column][i] for i in picks])
        ys = _floats([columns["delta_mean"][i] for i in picks])
        errs = _floats([columns["delta_err"][i] for i in picks])
        order = np.argsort(xs)
        series[label] = (xs[order], ys[order], errs[order])
    return series


def _plot_gap_figure(spec, ax, x_column, x_label):
    series = _gap_series(spec, x_column)
    plotted = {}
    for label, (xs, ys, errs) in series.items():
        ax.errorbar(
            xs, ys, yerr=np.where(errs > 0, errs, np.nan),
            marker="o", markersize=3.5, linestyle="-", linewidth=1.0,
            capsize=2, color=color_for(label), label=label,
        )
        plotted[label] = {"x": xs.tolist(), "y": ys.tolist()}
    ax.set_xlabel(x_label)
    ax.set_ylabel("spectral gap")
    ax.set_yscale("log")
    return plotted


def _overlay_fits(spec, ax, plotted):
    columns = read_table(spec.fit_csv, required=("strategy", "a", "k"))
    for label, picks in _series_by(columns, "strategy"):
        if label not in plotted:
            continue
        a = float(columns["a"][picks[0]])
        k = float(columns["k"][picks[0]])
        xs = np.array(plotted[label]["x"])
        grid = np.linspace(xs.min(), xs.max(), 64)
        ax.plot(
            grid, a * np.power(2.0, -k * grid),
            linestyle="--", linewidth=0.8, color=color_for(label), alpha=0.7,
        )


def render(spec: FigureSpec) -> dict:
    """Draw one figure and return the plotted series for checksumming."""
    with plt.rc_context(_RC):
        if spec.kind == "proposal_cdf":
            fig, axes = plt.subplots(1, 2, figsize=(8.4, 4.2))
        else:
            fig, ax = plt.subplots()
            axes = None
        try:
            if spec.kind == "gap_vs_n":
                plotted = _plot_gap_figure(spec, ax, "n", "system size n")
                if spec.fit_csv:
                    _overlay_fits(spec, ax, plotted)
            elif spec.kind == "gap_vs_T":
                plotted = _plot_gap_figure(spec, ax, "T", "temperature")
                ax.set_xscale("log")
            elif spec.kind == "gap_vs_qn":
                plotted = _render_gap_vs_qn(spec, ax)
            elif spec.kind in ("energy_trace", "magnetisation_trace"):
                plotted = _render_trace(spec, ax)
            else:
                plotted = _render_proposal_cdf(spec, axes)
            target = axes[0] if axes is not None else ax
            handles, labels = target.get_legend_handles_labels()
            if handles:
                target.legend(fontsize=7, loc="best")
            if spec.title:
                fig.suptitle(spec.title)
            fig.tight_layout()
            fig.savefig(spec.out, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return plotted


def _render_gap_vs_qn(spec, ax):
    columns = read_table(
        spec.csv, required=("strategy", "q", "n", "delta_mean", "delta_err")
    )
    plotted = {}
    keys = sorted({
        (strategy_family(s), n) for s, n in zip(columns["strategy"], columns["n"])
    })
    for family, n in keys:
        picks = [
            i for i, (s, m) in enumerate(zip(columns["strategy"], columns["n"]))
            if strategy_family(s) == family and m == n and columns["q"][i] != ""
        ]
        if not picks:
            continue
        xs = _floats([columns["q"][i] for i in picks]) / float(n)
        ys = _floats([columns["delta_mean"][i] for i in picks])
        errs = _floats([columns["delta_err"][i] for i in picks])
        order = np.argsort(xs)
        label = f"{family} n={n}"
        ax.errorbar(
            xs[order], ys[order], yerr=np.where(errs[order] > 0, errs[order], np.nan),
            marker="o", markersize=3.5, linewidth=1.0, capsize=2,
            color=color_for(family), label=label,
        )
        plotted[label] = {"x": xs[order].tolist(), "y": ys[order].tolist()}
    ax.set_xlabel("group fraction q/n")
    ax.set_ylabel("spectral gap")
    ax.set_yscale("log")
    return plotted


def _render_trace(spec, ax):
    value = "mean_cumulative_E" if spec.kind == "energy_trace" else "mean_cumulative_m"
    columns = read_table(spec.csv, required=("strategy", "step", value))
    plotted = {}
    for label, picks in _series_by(columns, "strategy"):
        xs = _floats([columns["step"][i] for i in picks]) + 1.0
        ys = _floats([columns[value][i] for i in picks])
        order = np.argsort(xs)
        ax.plot(xs[order], ys[order], linewidth=1.1, color=color_for(label), label=label)
        plotted[label] = {"x": (xs[order] - 1.0).tolist(), "y": ys[order].tolist()}
    if spec.oracle_csv:
        ref_column = (
            "boltzmann_energy" if spec.kind == "energy_trace" else "boltzmann_magnetisation"
        )
        oracle = read_table(spec.oracle_csv, required=(ref_column,))
        reference = float(oracle[ref_column][0])
        ax.axhline(reference, color="black", linewidth=1.2, label="exact mean")
        plotted["exact mean"] = {"x": [], "y": [reference]}
    ax.set_xscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel(
        "cumulative mean energy" if spec.kind == "energy_trace"
        else "cumulative mean magnetisation"
    )
    return plotted


def _render_proposal_cdf(spec, axes):
    columns = read_table(
        spec.csv, required=("strategy", "metric", "value", "cumulative_probability")
    )
    plotted = {}
    panels = {"hamming": axes[0], "abs_dE": axes[1]}
    for metric, ax in panels.items():
        picks_metric = [i for i, m in enumerate(columns["metric"]) if m == metric]
        labels = sorted({columns["strategy"][i] for i in picks_metric})
        for label in labels:
            picks = [i for i in picks_metric if columns["strategy"][i] == label]
            xs = _floats([columns["value"][i] for i in picks])
            ys = _floats([columns["cumulative_probability"][i] for i in picks])
            order = np.argsort(xs)
            ax.step(
                xs[order], ys[order], where="post",
                linewidth=1.1, color=color_for(label), label=label,
            )
            plotted[f"{metric}/{label}"] = {
                "x": xs[order].tolist(), "y": ys[order].tolist()
            }
        ax.set_ylabel("cumulative probability")
        ax.set_ylim(0.0, 1.05)
    axes[0].set_xlabel("Hamming distance of proposal")
    axes[1].set_xlabel("|dE| of proposal")
    return plotted


def plotted_checksum(plotted: dict) -> str:
    """SHA-256 over the plotted values, for comparison against the CSV source."""
    parts = []
    for label in sorted(plotted):
        xs = ",".join(repr(float(v)) for v in plotted[label]["x"])
        ys = ",".join(repr(float(v)) for v in plotted[label]["y"])
        parts.append(f"{label}|{xs}|{ys}")
    return hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()
