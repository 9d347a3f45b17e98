"""Figures for sweep results. Uses the non-interactive Agg backend."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_error_curves(stats, path, title: str | None = None) -> None:
    """Exact-set error and missed-detection rate against SNR, log scale."""
    snr = np.array([s.snr_db for s in stats])
    pe = np.array([s.pe for s in stats])
    lo = np.array([s.pe_low for s in stats])
    hi = np.array([s.pe_high for s in stats])
    miss = np.array([s.missed_rate for s in stats])
    # zeros have no place on a log axis; draw them at half a count
    floor = 0.5 / max(s.trials for s in stats)

    def lift(x):
        return np.where(x > 0, x, floor)

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    shown = lift(pe)
    ax.errorbar(snr, shown, yerr=[shown - lift(lo), lift(hi) - shown],
                marker="o", capsize=3, label="P_e (exact set)")
    ax.plot(snr, lift(miss), marker="s", linestyle="--", label="missed rate")
    ax.set_yscale("log")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", framealpha=0.8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
