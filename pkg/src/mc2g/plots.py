"""Figure rendering for sweep results (written next to the CSV output)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_sweep_figure(rows, path, title: str | None = None) -> None:
    """Success-rate and MAE curves for one sweep, saved as an image file."""
    ratios = [r["ratio"] for r in rows]
    ps = [r["p"] for r in rows]
    have_ratio = all(isinstance(r, float) and not math.isnan(r) for r in ratios)
    x = ratios if have_ratio else ps
    xlabel = "normalized sample complexity" if have_ratio else "sample probability p"

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(x, [r["success_rate"] for r in rows], "o-", color="tab:blue")
    ax1.set_xlabel(xlabel)
    ax1.set_ylabel("empirical success rate")
    ax1.set_ylim(-0.05, 1.05)
    ax1.axhline(1.0, color="gray", lw=0.5, ls=":")
    if have_ratio:
        ax1.axvline(1.0, color="gray", lw=0.8, ls="--")
    ax1.grid(alpha=0.3)

    ax2.plot(x, [r["mae_mean"] for r in rows], "s-", color="tab:red")
    stds = [r["mae_std"] for r in rows]
    if any(s > 0 for s in stds):
        ax2.errorbar(x, [r["mae_mean"] for r in rows], yerr=stds,
                     fmt="none", ecolor="tab:red", alpha=0.4)
    ax2.set_xlabel(xlabel)
    ax2.set_ylabel("mean absolute error")
    ax2.grid(alpha=0.3)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
