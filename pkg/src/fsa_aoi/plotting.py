"""Figures for result tables, written next to their CSV files.

matplotlib is imported on first use so the numerical core never needs it.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

FIG_SIZE = (4.8, 3.4)
DPI = 150
LINE_WIDTH = 1.0
MARKER_SIZE = 3.5
CAPSIZE = 2.0


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams.update({"font.size": 8, "axes.linewidth": 0.6, "legend.fontsize": 7,
                         "legend.frameon": False, "savefig.dpi": DPI})
    return plt


def _series(rows, key, x):
    groups = defaultdict(list)
    for r in rows:
        groups[key(r)].append(r)
    for label, items in groups.items():
        items.sort(key=lambda r: r[x])
        yield label, [r[x] for r in items], [r["network_aoi"] for r in items], [r["ci_halfwidth"] for r in items]


def _errorbar_figure(table, x, key, xlabel, logx=False):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    for label, xs, ys, hw in _series(table.rows, key, x):
        ax.errorbar(xs, ys, yerr=hw, marker="o", ms=MARKER_SIZE, lw=LINE_WIDTH, capsize=CAPSIZE, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("network average AoI [slots]")
    if logx:
        ax.set_xscale("log")
    ax.legend()
    fig.tight_layout()
    return plt, fig


def _line_figure(table, x, y, xlabel, ylabel, step=False, logy=False):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    xs, ys = table.column(x), table.column(y)
    if step:
        ax.bar(xs, ys, width=0.8, color="0.35")
    else:
        ax.plot(xs, ys, lw=LINE_WIDTH, color="k")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    fig.tight_layout()
    return plt, fig


def render_table(table, directory) -> Path | None:
    """Render a known table layout to ``<name>.png``; unknown layouts are skipped."""
    cols = set(table.columns)
    if table.name == "fig3":
        plt, fig = _errorbar_figure(table, "radius", lambda r: r["protocol"], "window radius R [m]")
    elif table.name == "fig4":
        plt, fig = _errorbar_figure(table, "lambda", lambda r: f"{r['protocol']}, {r['window']}",
                                    "density [pairs / m$^2$]", logx=True)
    elif table.name == "fig5":
        plt, fig = _errorbar_figure(table, "p", lambda r: f"{r['protocol']}, {r['window_kind']}",
                                    "observation budget p")
    elif {"kappa", "ccdf"} <= cols:
        plt, fig = _line_figure(table, "kappa", "ccdf", "$\\kappa$", "P($\\eta^* > \\kappa$)")
    elif {"l", "p_l"} <= cols:
        plt, fig = _line_figure(table, "l", "p_l", "frame size", "probability", step=True)
    elif {"frame_size", "aoi"} <= cols:
        plt, fig = _line_figure(table, "frame_size", "aoi", "frame size F", "network average AoI [slots]",
                                logy=True)
    elif {"node", "aoi"} <= cols:
        plt = _pyplot()
        fig, ax = plt.subplots(figsize=FIG_SIZE)
        ax.hist(table.column("aoi"), bins=40, color="0.35")
        ax.set_xlabel("per-link time-average AoI [slots]")
        ax.set_ylabel("links")
        fig.tight_layout()
    else:
        return None
    path = Path(directory) / f"{table.name}.png"
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path
