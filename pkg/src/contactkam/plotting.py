"""Static SVG line charts of fields, set estimates and orbits.

Output is byte-for-byte reproducible: a fixed hash salt, no creation date
and the Agg-independent SVG backend.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 5.0
fig_size = [fig_width, fig_width * golden_mean]
colors = ["#08589e", "#e6550d", "#31a354", "#756bb1", "#636363", "#2b8cbe"]

params = {
    "axes.prop_cycle": matplotlib.cycler(color=colors),
    "axes.labelsize": 9,
    "axes.linewidth": 0.5,
    "font.family": "sans-serif",
    "font.sans-serif": ["DejaVu Sans"],
    "font.size": 8,
    "mathtext.fontset": "stixsans",
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "figure.figsize": fig_size,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
    "figure.subplot.left": 0.14,
    "figure.subplot.bottom": 0.15,
    "figure.subplot.right": 0.96,
    "figure.subplot.top": 0.90,
    "svg.hashsalt": "contactkam",
    "svg.fonttype": "path",
}


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def _periodic(x, y, period):
    """Close a sampled periodic curve at ``x = period``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x)
    return np.r_[x[order], period], np.r_[y[order], y[order][0]]


def plot_fields(fields: dict, title: str = "", sets: dict | None = None, ylabel: str = "value") -> str:
    """Line chart of one or more scalar fields on the circle.

    ``fields`` maps labels to :class:`ScalarField` objects; ``sets`` optionally
    maps labels to set estimates drawn as markers at ``(x, u)``.
    """
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        period = None
        for label, fld in fields.items():
            period = fld.grid.period
            x, y = _periodic(fld.grid.nodes, fld.values, period)
            ax.plot(x, y, label=label)
        for label, est in (sets or {}).items():
            if len(est):
                ax.plot(est.x, est.u, linestyle="none", marker="o", markerfacecolor="none", label=label)
        if period is not None:
            ax.set_xlim(0, period)
        ax.set_xlabel("$x$")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title, fontsize=9)
        if len(fields) + len(sets or {}) > 1:
            ax.legend(loc="best")
        return _svg(fig)


def plot_orbits(orbits: dict, title: str = "") -> str:
    """``x(t)``, ``u(t)`` and ``p(t)`` of one or more orbits on stacked panels."""
    with plt.rc_context(params):
        fig, axes = plt.subplots(3, 1, sharex=True, figsize=[fig_width, fig_width * 0.9])
        for label, orb in orbits.items():
            o = orb.chronological()
            t = o.times
            # break the line where x wraps around the circle
            x = np.array(o.x, dtype=float)
            jumps = np.flatnonzero(np.abs(np.diff(x)) > 0.5 * o.period)
            x[jumps] = np.nan
            axes[0].plot(t, x, label=label)
            axes[1].plot(t, o.u, label=label)
            axes[2].plot(t, o.p, label=label)
        for ax, name in zip(axes, ("$x$", "$u$", "$p$")):
            ax.set_ylabel(name)
        axes[-1].set_xlabel("$t$")
        if title:
            axes[0].set_title(title, fontsize=9)
        if len(orbits) > 1:
            axes[0].legend(loc="best")
        fig.subplots_adjust(hspace=0.08, left=0.14, bottom=0.09, top=0.94)
        return _svg(fig)


def plot_series(x, series: dict, title: str = "", xlabel: str = "", ylabel: str = "", logx: bool = False,
                markers: bool = True) -> str:
    """Generic line chart of named series against a shared abscissa."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for label, y in series.items():
            ax.plot(x, y, marker="o" if markers else None, label=label)
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title, fontsize=9)
        if len(series) > 1:
            ax.legend(loc="best")
        return _svg(fig)
