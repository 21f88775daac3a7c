"""Figure generation from sweep CSVs: per-d error curves with analytic
overlays, horizontal max markers, and a deterministic byte stream."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import errmodel

__all__ = ["CurveBundle", "PlotDataError", "read_curve", "render"]

FIGSIZE = (6.4, 4.0)
DPI = 160


class PlotDataError(ValueError):
    """Missing column, empty CSV, or an empty bundle."""


@dataclass(frozen=True)
class CurveBundle:
    """What to draw: (label, csv path) pairs plus display toggles."""

    curves: tuple
    overlays: bool = True
    logscale: bool = False
    multibase: bool = False


def read_curve(path, x_column):
    """Parse one CLI-written CSV, skipping the # key=value header."""
    xs, ys = [], []
    with open(path) as fh:
        rows = csv.DictReader(
            line for line in fh if not line.startswith("#")
        )
        for row in rows:
            if x_column not in row or "p_err" not in row:
                raise PlotDataError(
                    f"{path}: need columns {x_column!r} and 'p_err'"
                )
            xs.append(float(row[x_column]))
            ys.append(float(row["p_err"]))
    if not xs:
        raise PlotDataError(f"{path}: no data rows")
    order = np.argsort(xs)
    return np.asarray(xs)[order], np.asarray(ys)[order]


def _overlay_for(label, thetas):
    if label == "d=1":
        return np.array([errmodel.pgm_p_err(t) for t in thetas])
    if label == "d=2":
        return np.array([errmodel.d2_piecewise_p_err(t) for t in thetas])
    return None


def _render_sweeps(bundle, ax):
    deviation = None
    for label, path in bundle.curves:
        thetas, values = read_curve(path, "theta")
        (line,) = ax.plot(thetas / math.pi, values, marker=".", ms=3,
                          lw=1.0, label=label)
        ax.axhline(values.max(), color=line.get_color(), lw=0.6, alpha=0.5)
        if not bundle.overlays:
            continue
        analytic = _overlay_for(label, thetas)
        if analytic is None:
            continue
        ax.plot(thetas / math.pi, analytic, ls="--", lw=1.0,
                color=line.get_color(), label=f"{label} analytic")
        dev = float(np.abs(values - analytic).max())
        if label == "d=1":
            deviation = dev
            ax.annotate(
                f"d=1 max dev {dev:.2e}",
                xy=(0.97, 0.03), xycoords="axes fraction",
                ha="right", va="bottom", fontsize=8,
            )
    ax.set_xlabel(r"$\theta/\pi$")
    return deviation


def _render_multibase(bundle, ax):
    deviation = None
    for label, path in bundle.curves:
        ns, values = read_curve(path, "n")
        (pts,) = ax.plot(ns, values, ls="", marker="o", ms=4, label=label)
        if bundle.overlays and label == "d=1":
            grid = np.arange(int(ns.min()), int(ns.max()) + 1)
            analytic = np.array([errmodel.multibase_d1_p_err(n) for n in grid])
            ax.plot(grid, analytic, ls="--", lw=1.0,
                    color=pts.get_color(), label="d=1 analytic")
            at_points = np.array(
                [errmodel.multibase_d1_p_err(int(n)) for n in ns]
            )
            deviation = float(np.abs(values - at_points).max())
            ax.annotate(
                f"d=1 max dev {deviation:.2e}",
                xy=(0.97, 0.03), xycoords="axes fraction",
                ha="right", va="bottom", fontsize=8,
            )
    ax.set_xlabel("number of bases n")
    return deviation


def render(bundle, out):
    """Draw the bundle into ``out`` (png/svg); returns the maximum d=1
    deviation from the analytic overlay, or None if not applicable."""
    if not bundle.curves:
        raise PlotDataError("nothing to plot: the bundle has no curves")
    with plt.rc_context({"svg.hashsalt": "qpvlab"}):
        fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
        try:
            if bundle.multibase:
                deviation = _render_multibase(bundle, ax)
            else:
                deviation = _render_sweeps(bundle, ax)
            ax.set_ylabel(r"$p_\mathrm{err}$")
            if bundle.logscale:
                ax.set_yscale("log")
            ax.legend(loc="upper left", fontsize=8)
            fig.savefig(out, metadata=_stable_metadata(out))
        finally:
            plt.close(fig)
    return deviation


def _stable_metadata(out):
    """Strip writer/date fields so identical inputs give identical bytes."""
    if str(out).lower().endswith(".svg"):
        return {"Date": None, "Creator": None}
    return {"Software": None}
