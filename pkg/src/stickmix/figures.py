"""Figure rendering for the report paths.

Every comparison/report table has a matching figure written alongside
it.  All functions take already-computed arrays and a target path;
nothing here touches the sampler.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_mpp_traces",
    "plot_alpha_quantiles",
    "plot_cstar_traces",
    "plot_acceptance_blocks",
    "plot_alpha_densities",
    "plot_similarity",
]


def _save(fig, path: str):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_mpp_traces(mpp_traces: dict[str, tuple], path: str):
    """Log MPP against sweep, one line per chain."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name, (sweeps, mpp) in sorted(mpp_traces.items()):
        ok = ~np.isnan(mpp)
        ax.plot(sweeps[ok], mpp[ok], lw=0.8, label=name)
    ax.set_xlabel("sweep")
    ax.set_ylabel("log marginal partition posterior")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_alpha_quantiles(alpha_rows: list[list], path: str):
    """Boxplot-style summaries of posterior alpha per chain."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    labels = [str(r[0]) for r in alpha_rows]
    lo, q1, med, q3, hi = (np.array([r[2 + i] for r in alpha_rows]) for i in range(5))
    x = np.arange(len(labels))
    ax.vlines(x, lo, hi, color="0.6")
    ax.vlines(x, q1, q3, color="C0", lw=6, alpha=0.6)
    ax.plot(x, med, "k_", ms=12)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("posterior alpha (2.5/25/50/75/97.5%)")
    _save(fig, path)


def plot_cstar_traces(first_rows: list[list], path: str):
    """Cluster-count traces over the first sweeps, per chain."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    by_chain: dict[str, list] = {}
    for chain, sweep, cstar in first_rows:
        by_chain.setdefault(chain, []).append((sweep, cstar))
    for name, rows in sorted(by_chain.items()):
        rows = np.array(rows)
        ax.step(rows[:, 0], rows[:, 1], where="post", lw=0.8, label=name)
    ax.set_xlabel("sweep")
    ax.set_ylabel("non-empty clusters")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_acceptance_blocks(acc_rows: list[list], path: str):
    """Per-move acceptance rate over 500-sweep blocks, by arm."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 4), sharey=True)
    moves = ["ls1_rate", "ls2_rate", "ls3_rate"]
    for ax, move_idx, title in zip(axes, range(3), moves):
        for arm in sorted({r[1] for r in acc_rows}):
            pts: dict[int, list] = {}
            for r in acc_rows:
                if r[1] != arm and r[1] is not None:
                    continue
                if r[1] == arm and r[4 + move_idx] is not None:
                    pts.setdefault(r[2], []).append(r[4 + move_idx])
            if pts:
                xs = sorted(pts)
                ax.plot(xs, [np.mean(pts[x]) for x in xs], marker=".", label=arm)
        ax.set_title(title)
        ax.set_xlabel("sweep block start")
    axes[0].set_ylabel("acceptance rate")
    axes[0].legend(fontsize=7)
    _save(fig, path)


def plot_alpha_densities(alpha_samples: dict[str, list], path: str, reference=None):
    """Pooled post-burn-in alpha histograms per arm."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for arm, samples in sorted(alpha_samples.items()):
        pooled = np.concatenate(samples)
        ax.hist(pooled, bins=60, density=True, histtype="step", label=arm)
    if reference is not None:
        xs = np.linspace(0, max(np.concatenate(s) .max() for s in alpha_samples.values()), 200)
        ax.plot(xs, reference(xs), "k--", lw=1, label="generating density")
    ax.set_xlabel("alpha")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_similarity(S: np.ndarray, path: str, order: np.ndarray | None = None):
    """Posterior similarity matrix heatmap (optionally reordered)."""
    if order is not None:
        S = S[np.ix_(order, order)]
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(S, vmin=0, vmax=1, cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, label="co-clustering frequency")
    ax.set_xlabel("observation")
    ax.set_ylabel("observation")
    _save(fig, path)
