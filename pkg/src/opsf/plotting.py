"""PNG figures for sweep results (solve times and risk/load trade-off)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

from .bench import SweepRecord  # noqa: E402
from .radiality import STRATEGIES  # noqa: E402

_LABELS = {"original_pc": "original P-C", "abstracted_pc": "abstracted P-C",
           "naive_loop": "naive loop", "iterative_loop": "iterative loop"}

_STYLE = {
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def _optimal(records: Sequence[SweepRecord]) -> list[SweepRecord]:
    return [r for r in records if r.status == "optimal"]


def plot_solve_times(records: Sequence[SweepRecord], path: str | Path) -> Path:
    """Median solve time per alpha with min-max whiskers, one series per strategy."""
    recs = _optimal(records)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        present = [s for s in STRATEGIES if any(r.strategy == s for r in recs)]
        for i, st in enumerate(present):
            alphas = sorted({r.alpha for r in recs if r.strategy == st})
            med, lo, hi = [], [], []
            for a in alphas:
                t = [r.solve_seconds for r in recs if r.strategy == st and r.alpha == a]
                med.append(np.median(t))
                lo.append(np.median(t) - min(t))
                hi.append(max(t) - np.median(t))
            # small horizontal offsets keep whiskers apart
            x = np.array(alphas) + (i - (len(present) - 1) / 2) * 0.012
            ax.errorbar(x, med, yerr=[lo, hi], marker="o", ms=3, capsize=2, lw=1,
                        label=_LABELS[st])
        ax.set_yscale("log")
        ax.set_xlabel(r"trade-off $\alpha$")
        ax.set_ylabel("solve time [s]")
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def _reference(recs: Sequence[SweepRecord]) -> list[SweepRecord]:
    # all strategies reach the same optimum; plot one of them
    for st in STRATEGIES:
        sel = [r for r in recs if r.strategy == st]
        if sel:
            return sel
    return []


def plot_tradeoff_vs_alpha(records: Sequence[SweepRecord], path: str | Path) -> Path:
    """Risk and load served against alpha, one thin line per seed plus the mean."""
    recs = _reference(_optimal(records))
    seeds = sorted({r.seed for r in recs})
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(7.5, 3.2), sharex=True)
        for ax, attr, label in ((axes[0], "risk_served", "risk of energized blocks"),
                                (axes[1], "load_served", "load served [p.u.]")):
            grid = sorted({r.alpha for r in recs})
            for seed in seeds:
                pts = sorted((r.alpha, getattr(r, attr)) for r in recs if r.seed == seed)
                if pts:
                    ax.plot(*zip(*pts), color="0.6", lw=0.7, alpha=0.7)
            mean = [np.mean([getattr(r, attr) for r in recs if r.alpha == a]) for a in grid]
            ax.plot(grid, mean, color="C3", lw=2, marker="o", ms=3, label="mean over seeds")
            ax.set_xlabel(r"trade-off $\alpha$")
            ax.set_ylabel(label)
        axes[0].legend(loc="upper left")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_tradeoff_vs_seed(records: Sequence[SweepRecord], path: str | Path) -> Path:
    """Risk and load served per risk profile (seed), one series per alpha."""
    recs = _reference(_optimal(records))
    alphas = sorted({r.alpha for r in recs})
    cmap = plt.get_cmap("viridis")
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(2, 1, figsize=(6.0, 4.8), sharex=True)
        for i, a in enumerate(alphas):
            pts = sorted((r.seed, r.risk_served, r.load_served) for r in recs if r.alpha == a)
            if not pts:
                continue
            seeds, risk, load = zip(*pts)
            color = cmap(i / max(len(alphas) - 1, 1))
            axes[0].plot(seeds, risk, marker=".", color=color, lw=0.8, label=f"{a:g}")
            axes[1].plot(seeds, load, marker=".", color=color, lw=0.8)
        axes[0].set_ylabel("risk of energized blocks")
        axes[1].set_ylabel("load served [p.u.]")
        axes[1].set_xlabel("risk profile seed")
        axes[1].xaxis.set_major_locator(MaxNLocator(integer=True))
        axes[0].legend(title=r"$\alpha$", ncol=6, loc="upper center",
                       bbox_to_anchor=(0.5, 1.35))
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def render_sweep_figures(records: Sequence[SweepRecord], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not _optimal(records):
        return []
    return [plot_solve_times(records, out / "solve_times.png"),
            plot_tradeoff_vs_alpha(records, out / "tradeoff_vs_alpha.png"),
            plot_tradeoff_vs_seed(records, out / "tradeoff_vs_seed.png")]
