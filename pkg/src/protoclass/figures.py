"""Matplotlib renderings written next to the delimited report outputs.

Import stays local to keep library use light; the Agg backend is forced
so rendering works headless. Figures are a convenience view of the JSON
reports; the byte-determinism guarantees apply to the JSON, not the PNG.
"""

from __future__ import annotations

from pathlib import Path

from .evaluate import Projection2D
from .report import EvalReport


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_report_figure(report: EvalReport, path) -> Path:
    """One line per direction over the config labels, plus the aggregate."""
    plt = _plt()
    labels = report.labels()
    x = range(len(labels))
    fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(labels)), 4.0))
    for direction in report.directions():
        ys = []
        for label in labels:
            try:
                r = report.row(label, direction)
                ys.append(r.accuracy if r.status == "ok" else None)
            except KeyError:
                ys.append(None)
        ax.plot(x, ys, marker="o", label=direction)
    if report.aggregates:
        agg = {a.label: a for a in report.aggregates}
        ys = [agg[l].mean if l in agg else None for l in labels]
        ax.plot(x, ys, marker="s", linestyle="--", color="black", label="average")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("top-1 accuracy (%)")
    ax.set_title(report.title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_projection_figure(projection: Projection2D, class_names, path) -> Path:
    """Scatter of the 2-D projection, class centroids marked by stars."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    cmap = plt.get_cmap("tab20")
    for slot, cid in enumerate(sorted(projection.centroids)):
        color = cmap(slot % 20)
        mask = [c == cid for c in projection.class_ids]
        xs = projection.coords[mask, 0]
        ys = projection.coords[mask, 1]
        name = class_names[cid] if cid < len(class_names) else str(cid)
        ax.scatter(xs, ys, s=8, alpha=0.5, color=color, label=name)
        cx, cy = projection.centroids[cid]
        ax.scatter([cx], [cy], marker="*", s=220, color=color, edgecolors="black", zorder=3)
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    ax.set_title("2-D embedding projection")
    if len(projection.centroids) <= 20:
        ax.legend(fontsize=7, markerscale=1.5, loc="best")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
