"""Figure rendering for sweep and speed-limit reports.

Renders the same data that goes into the CSV: mean fidelity with error bars
against the analytic lower-bound curves, and speed-limit times against the
control time.  Uses the Agg backend so report generation works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_MARKERS = ("o", "^", "s", "d")


def render_sweep_figure(rows, path, title: str, crossing: float | None = None) -> None:
    """Mean fidelity vs gamma per series, over the reported F* curve.

    ``rows`` are the CSV row dicts of one sweep; series are split by their
    ``preset`` label.  ``crossing`` marks an estimated crossing point.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    labels = list(dict.fromkeys(r["preset"] for r in rows))
    for i, label in enumerate(labels):
        series = [r for r in rows if r["preset"] == label]
        gammas = [r["gamma"] for r in series]
        ax.errorbar(
            gammas,
            [r["mean_F"] for r in series],
            yerr=[r["stderr_F"] for r in series],
            marker=_MARKERS[i % len(_MARKERS)],
            markersize=4,
            linestyle="-",
            linewidth=0.8,
            capsize=2,
            label=f"mean F ({label})" if len(labels) > 1 else "mean F",
        )
    first = [r for r in rows if r["preset"] == labels[0]]
    ax.plot(
        [r["gamma"] for r in first],
        [r["f_star"] for r in first],
        color="crimson",
        linestyle="--",
        label="F* (reported)",
    )
    if crossing is not None:
        ax.axvline(crossing, color="gray", linestyle=":", linewidth=1)
        ax.annotate(
            f"crossing {crossing:.3f}",
            xy=(crossing, 0.5),
            xytext=(4, 0),
            textcoords="offset points",
            fontsize=8,
            color="gray",
        )
    ax.set_xlabel(r"noise strength $\gamma$")
    ax.set_ylabel("fidelity at T")
    ax.set_ylim(0.0, 1.02)
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_qsl_figure(rows, path, title: str, control_time: float) -> None:
    """Speed-limit time vs gamma with the actual control time for reference."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.errorbar(
        [r["gamma"] for r in rows],
        [r["t_qsl"] for r in rows],
        marker="o",
        markersize=4,
        linestyle="-",
        linewidth=0.8,
        label=r"$T_{QSL}$",
    )
    ax.axhline(control_time, color="crimson", linestyle="--", label="control time T")
    ax.set_xlabel(r"noise strength $\gamma$")
    ax.set_ylabel("time")
    ax.set_ylim(bottom=0.0)
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
