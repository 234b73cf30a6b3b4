"""Figure rendering for run reports.

Every CLI report path saves PNG figures next to its CSV output.  All
rendering is file-based (Agg backend); nothing opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def plot_diagnostics(records, path):
    """Time series of invariant drift from a list of DiagnosticsRecord."""
    t = np.array([r.t for r in records])
    fig, axes = plt.subplots(3, 1, figsize=(7.0, 8.0), sharex=True)
    for ax, name, scale in (
        (axes[0], "mass", "relative"),
        (axes[1], "energy", "absolute"),
        (axes[2], "tangential", "absolute"),
    ):
        vals = np.array([getattr(r, name) for r in records])
        ref = vals[0]
        drift = (vals - ref) / abs(ref) if scale == "relative" and ref != 0 else vals - ref
        ax.plot(t, drift, lw=1.0)
        ax.set_ylabel(f"{name} drift" + (" (rel)" if scale == "relative" else ""))
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("t")
    fig.suptitle("invariant drift")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_profiles(grid, profiles, path, title="depth profiles"):
    """Overlay (label, h-field) pairs over x."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for label, h in profiles:
        ax.plot(grid.x, h, lw=1.2, label=label)
    ax.set_xlabel("x")
    ax.set_ylabel("h")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_convergence(table, path):
    """Log-log error vs dx with the observed slopes in the legend."""
    rows = [r for r in table.rows if r.error is None]
    if not rows:
        return
    dx = np.array([r.dx for r in rows])
    l2 = np.array([r.err_l2 for r in rows])
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.loglog(dx, l2, "o-", label="L2(h) error")
    # order guide through the last point
    for p in (2, 4):
        ax.loglog(dx, l2[-1] * (dx / dx[-1]) ** p, "--", lw=0.8, label=f"order {p}")
    ax.set_xlabel("dx")
    ax.set_ylabel("error")
    ax.set_title(f"{table.scheme} on {table.scenario}")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_compare(series, path):
    """Energy-drift curves per scheme: series maps name -> (t, drift)."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for name, (t, drift) in series.items():
        ax.plot(t, drift, lw=1.2, label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("energy drift")
    ax.set_title("energy drift per scheme")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
