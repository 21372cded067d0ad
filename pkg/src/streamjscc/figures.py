"""Matplotlib rendering for the report path.

Figures are written next to the delimited output; the CSV stays the source
of truth and these are convenience views of the same rows.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .harness import AnytimeFit, AnytimeRow, ExperimentReport

_MODE_STYLE = {
    "inst-sed": dict(marker="o", color="tab:blue", label="instantaneous SED"),
    "inst-phase": dict(marker="s", color="tab:green", label="instantaneous phase + block SED"),
    "buffer": dict(marker="^", color="tab:red", label="buffer then transmit"),
}


def plot_rate_sweep(report: ExperimentReport, path: str) -> None:
    """Rate vs source length per mode, with the closed-form approximation."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    modes = sorted({r.mode for r in report.rows})
    for mode in modes:
        rows = sorted((r for r in report.rows if r.mode == mode), key=lambda r: r.k)
        ks = [r.k for r in rows]
        rates = [r.rate for r in rows]
        err = [r.rate_ci95 for r in rows]
        style = _MODE_STYLE.get(mode, dict(marker="x", label=mode))
        ax.errorbar(ks, rates, yerr=err, capsize=3, **style)
    rows = sorted(report.rows, key=lambda r: r.k)
    ks = sorted({r.k for r in rows})
    approx = {r.k: r.approx_rate for r in rows}
    ax.plot(ks, [approx[k] for k in ks], "k--", label="reliability approximation")
    ax.set_xlabel("source length k")
    ax.set_ylabel("rate (symbols per channel use)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_anytime(rows: list[AnytimeRow], fit: AnytimeFit | None, path: str) -> None:
    """Error probability vs decode time per prefix length, log scale, with
    the fitted exponential decay overlaid."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ks = sorted({r.k for r in rows})
    cmap = plt.get_cmap("viridis")
    for i, k in enumerate(ks):
        pts = sorted((r for r in rows if r.k == k and r.err_count > 0), key=lambda r: r.t)
        ax.semilogy([r.t for r in pts], [r.err_rate for r in pts],
                    marker=".", lw=1, color=cmap(i / max(1, len(ks) - 1)),
                    label=f"k = {k}")
        if fit is not None and k in fit.intercepts:
            ts = np.array([r.t for r in pts])
            t_k = pts[0].t_k if pts else k
            ax.semilogy(ts, np.exp(fit.intercepts[k] - fit.alpha * (ts - t_k)),
                        "--", lw=1, color="gray")
    title = f"fitted decay {fit.alpha:.3f} per channel use" if fit else ""
    ax.set_title(title, fontsize=9)
    ax.set_xlabel("decode time t")
    ax.set_ylabel("error probability")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_curves(grid, curves: dict[str, list[float]], path: str) -> None:
    """Reliability curves E(R) on an R grid."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, vals in curves.items():
        ax.plot(grid, vals, label=label)
    ax.set_xlabel("rate R (symbols per channel use)")
    ax.set_ylabel("reliability (nats)")
    ax.set_ylim(bottom=0)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
