"""Figure rendering for the CLI report path.

Each CLI command renders one matplotlib figure next to its CSV.  The
functions take the already-computed table rows, so they stay decoupled
from the solvers.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_RC = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}


def _axes():
    plt.rcParams.update(_RC)
    fig, ax = plt.subplots()
    return fig, ax


def _finish(fig, ax, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def sweep_current_figure(rows, path: str, tc_mk: float) -> str:
    """Charge current against hot temperature with the zero crossing marked."""
    th = [r[0] for r in rows]
    fig, ax = _axes()
    i_fock = [r[1] for r in rows]
    i_gauss = [r[2] for r in rows]
    if any(not math.isnan(v) for v in i_fock):
        ax.plot(th, i_fock, "-", color="tab:blue", label="full model")
    if any(not math.isnan(v) for v in i_gauss):
        ax.plot(th, i_gauss, "--", color="tab:green", label="bilinear model")
    ax.axhline(0.0, color="0.4", lw=0.8)
    crossing = _first_crossing(th, [f if not math.isnan(f) else g
                                    for f, g in zip(i_fock, i_gauss)])
    if crossing is not None:
        ax.axvline(crossing, color="0.4", lw=0.8, ls=":")
        ax.plot([crossing], [0.0], "o", color="tab:red", ms=5,
                label=f"zero crossing ~ {crossing:.1f} mK")
    ax.set_xlabel(r"$T_h$ (mK)")
    ax.set_ylabel(r"$I$ (pA)")
    ax.set_title(f"Charge current at $T_c$ = {tc_mk:g} mK")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    return _finish(fig, ax, path)


def _first_crossing(xs, ys):
    for (x0, y0), (x1, y1) in zip(zip(xs, ys), zip(xs[1:], ys[1:])):
        if math.isnan(y0) or math.isnan(y1):
            continue
        if y0 == 0.0:
            return x0
        if y0 * y1 < 0.0:
            return x0 + (x1 - x0) * y0 / (y0 - y1)
    return None


def precision_curve_figure(rows, path: str) -> str:
    """Protocol error budget against the cold temperature."""
    tc = [r[0] for r in rows]
    fig, ax = _axes()
    ax.plot(tc, [r[1] for r in rows], "-", color="tab:blue", label="total")
    ax.plot(tc, [r[2] for r in rows], "--", color="tab:orange",
            label="current-resolution term")
    ax.plot(tc, [r[3] for r in rows], ":", color="tab:gray",
            label="hot-thermometer term")
    fock_total = [r[6] for r in rows]
    if any(not math.isnan(v) for v in fock_total):
        ax.plot(tc, fock_total, ".", color="tab:blue", ms=5,
                label="total (full model)")
    ax.set_xlabel(r"$T_c$ (mK)")
    ax.set_ylabel(r"$\Delta T_c$ (mK)")
    ax.set_title("Error budget of the located cold temperature")
    ax.legend()
    return _finish(fig, ax, path)


def qfi_compare_figure(rows, path: str) -> str:
    """Single-shot current precision against the optimal bound."""
    tc = [r[0] for r in rows]
    fig, ax = _axes()
    ax.plot(tc, [r[1] for r in rows], "-", color="tab:blue",
            label="current measurement")
    ax.plot(tc, [r[2] for r in rows], "--", color="tab:blue",
            label="optimal (Fisher bound)")
    ax.set_xlabel(r"$T_c$ (mK)")
    ax.set_ylabel(r"single-shot $\Delta T_c$ (mK)")
    ax.set_yscale("log")
    ax.set_title("Single-shot precision at the vanishing-flow point")
    ax.legend()
    return _finish(fig, ax, path)


def protocol_figure(run_rows, summary, path: str, tc_true_mk: float) -> str:
    """Distribution of the estimates (ensemble) or the search trace (one run)."""
    fig, ax = _axes()
    estimates = [r[4] for r in run_rows]
    if len(estimates) > 1:
        ax.hist(estimates, bins=min(60, max(10, len(estimates) // 50)),
                color="tab:blue", alpha=0.75)
        ax.axvline(tc_true_mk, color="tab:red", lw=1.2, label="true $T_c$")
        ax.axvline(summary.mean_tc_mk, color="0.2", lw=1.0, ls="--",
                   label=f"mean = {summary.mean_tc_mk:.3f} mK")
        ax.set_xlabel(r"estimated $T_c$ (mK)")
        ax.set_ylabel("runs")
        ax.set_title(
            f"{summary.runs} runs: std = {summary.std_tc_mk:.3f} mK, "
            f"predicted = {summary.predicted.total_mk:.3f} mK")
    else:
        trace = summary.results[0].trace if summary.results else ()
        if trace:
            ax.plot([t for t, _ in trace], [r for _, r in trace], "o-",
                    color="tab:blue", label="readings")
        ax.axhline(0.0, color="0.4", lw=0.8)
        ax.set_xlabel(r"$T_h$ dial (mK)")
        ax.set_ylabel("current reading (pA)")
        ax.set_title("Zero-current search trace")
    ax.legend()
    return _finish(fig, ax, path)
