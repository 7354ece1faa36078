"""Matplotlib renderers for the report artifacts.

Every function draws one figure and writes it to a file next to the
delimited output; nothing is shown interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({
    "figure.figsize": (6.4, 4.0),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
})


def _finish(fig, path):
    fig.savefig(path)
    plt.close(fig)


def plot_ecdfs(series: dict, path, xlabel="Sum rate (bits/s/Hz)"):
    """Step-plot one ECDF per method."""
    fig, ax = plt.subplots()
    for label, pts in series.items():
        pts = np.asarray(pts)
        ax.step(pts[:, 0], pts[:, 1], where="post", label=label, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("Empirical CDF")
    ax.set_ylim(0.0, 1.02)
    ax.legend(loc="lower right")
    _finish(fig, path)


def plot_complexity_curve(curve: np.ndarray, K: int, path):
    """Update-vs-full cost ratio against perturbation rank, log y-axis
    with the break-even line marked."""
    curve = np.asarray(curve)
    fig, ax = plt.subplots()
    ax.semilogy(curve[:, 0], curve[:, 1], linewidth=1.4)
    ax.axhline(1.0, color="k", linestyle="--", linewidth=0.8)
    above = curve[curve[:, 1] > 1.0]
    if above.size:
        r_cross = int(above[0, 0])
        ax.axvline(r_cross, color="C3", linestyle=":", linewidth=0.8)
        ax.annotate(f"break-even r = {r_cross}", (r_cross, 1.0),
                    textcoords="offset points", xytext=(6, 8), fontsize=8)
    ax.set_xlabel("Perturbation rank r")
    ax.set_ylabel(f"Update cost / full inversion cost (K = {K})")
    _finish(fig, path)


def plot_trial_timeseries(records, path):
    """Sum rate over the pass for one trial, update paths marked."""
    t = np.array([rec.t_s for rec in records])
    rate = np.array([rec.sum_rate for rec in records])
    method = np.array([rec.method for rec in records])
    fig, ax = plt.subplots()
    ax.plot(t, rate, linewidth=0.9, color="C0", label="sum rate")
    fulls = method == "full"
    if fulls.any():
        ax.plot(t[fulls], rate[fulls], ".", color="C3", markersize=3,
                label="full inversion")
    ax.set_xlabel("Pass time (s)")
    ax.set_ylabel("Sum rate (bits/s/Hz)")
    ax.legend(loc="lower center")
    _finish(fig, path)


def plot_arsvd_bench(rows, path):
    """Estimated vs oracle truncation rank, jittered per eta."""
    fig, ax = plt.subplots()
    etas = sorted({row.eta for row in rows}, reverse=True)
    rng = np.random.default_rng(0)  # jitter only, cosmetic
    for i, eta in enumerate(etas):
        sub = [row for row in rows if row.eta == eta]
        x = np.array([row.oracle_rank for row in sub]) + rng.uniform(-0.15, 0.15, len(sub))
        y = np.array([row.k_est for row in sub]) + rng.uniform(-0.15, 0.15, len(sub))
        ax.plot(x, y, ".", markersize=4, alpha=0.5, label=f"eta = {eta:g}", color=f"C{i}")
    lim = max(max((row.k_est for row in rows), default=1),
              max((row.oracle_rank for row in rows), default=1)) + 1
    ax.plot([0, lim], [0, lim], "k--", linewidth=0.8)
    ax.set_xlabel("Full-SVD oracle rank")
    ax.set_ylabel("Adaptive estimate k_est")
    ax.legend(loc="upper left")
    _finish(fig, path)
