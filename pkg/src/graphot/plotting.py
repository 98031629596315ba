"""File-rendering helpers for experiment reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_scatter_svg(path, x, y, slope=None, xlabel="B2", ylabel="W2", title=None):
    """Render a pair scatter with an optional through-origin fit line."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.scatter(x, y, s=4, alpha=0.35, linewidths=0, color="#2b6cb0")
    if slope is not None and len(x) > 0:
        hi = float(max(x))
        ax.plot(
            [0.0, hi],
            [0.0, slope * hi],
            color="#c53030",
            linewidth=1.5,
            label=f"{ylabel} = {slope:.3f} {xlabel}",
        )
        ax.legend(loc="best", frameon=False)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.25, linewidth=0.5)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
