"""Static figures written next to the CSV/JSON outputs of the CLI."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .density import ConditionalTable, MaxEntDensity, evaluation_table
from .selection import DegreeSweepResult, ModelScore

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 11,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _new_figure(width: float = 5.0, height: Optional[float] = None) -> Figure:
    import matplotlib

    fig = Figure(figsize=(width, height or width * GOLDEN), dpi=120)
    FigureCanvasAgg(fig)
    with matplotlib.rc_context(STYLE):
        fig.add_subplot(111)
    return fig


def _save(fig: Figure, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path)
    return path


def plot_density(density: MaxEntDensity, path: str, data: Optional[np.ndarray] = None, points: int = 201) -> str:
    """Line plot (K=1) or filled contours (K=2) of the fitted density."""
    fig = _new_figure()
    ax = fig.axes[0]
    if density.dim == 1:
        pts, vals = evaluation_table(density, points)
        if data is not None:
            ax.hist(np.ravel(data), bins=50, density=True, color="0.8", label="data")
        ax.plot(pts[:, 0], vals, color="C0", lw=1.5, label="max-ent fit")
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.legend(frameon=False)
    elif density.dim == 2:
        n = min(points, 121)
        pts, vals = evaluation_table(density, n)
        xs = pts[:, 0].reshape(n, n)
        ys = pts[:, 1].reshape(n, n)
        cs = ax.contourf(xs, ys, vals.reshape(n, n), levels=20, cmap="viridis")
        fig.colorbar(cs, ax=ax, label="density")
        if data is not None:
            d = np.asarray(data)
            ax.plot(d[:, 0], d[:, 1], ",", color="w", alpha=0.5)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    else:
        raise ValueError("density plots are available for K = 1 or 2 only")
    return _save(fig, path)


def plot_conditional(table: ConditionalTable, path: str) -> str:
    fig = _new_figure()
    ax = fig.axes[0]
    ax.plot(table.y, table.values, color="C1", lw=1.5)
    ax.axvline(table.expectation(), color="0.4", ls="--", lw=1, label="E[Y | X = x]")
    ax.set_xlabel("y")
    ax.set_ylabel("conditional density")
    ax.set_title("given x = " + ", ".join(f"{v:g}" for v in table.given))
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_posteriors(scores: Sequence[ModelScore], path: str) -> str:
    fig = _new_figure()
    ax = fig.axes[0]
    labels = [s.model_id for s in scores]
    colors = ["C3" if s.model_id == "0" else "C0" for s in scores]
    ax.bar(range(len(scores)), [s.posterior for s in scores], color=colors)
    ax.set_xticks(range(len(scores)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("posterior probability")
    return _save(fig, path)


def plot_sweep(sweep: DegreeSweepResult, path: str) -> str:
    fig = _new_figure()
    ax = fig.axes[0]
    ok = [r for r in sweep.results if r.converged]
    ax.plot([r.degree for r in ok], [r.evidence for r in ok], "o-", color="C0")
    ax.axvline(sweep.selected_degree, color="0.4", ls="--", lw=1)
    ax.set_xlabel("maximum degree A")
    ax.set_ylabel("evidence")
    return _save(fig, path)
