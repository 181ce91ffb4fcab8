"""Render chart specs (histogram/bar) to PNG files with matplotlib."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import ConfigError

# Fixed 8-token palette shared with the explorer UI.
PALETTE = (
    "#4c78a8",
    "#f58518",
    "#54a24b",
    "#e45756",
    "#72b7b2",
    "#eeca3b",
    "#b279a2",
    "#9d755d",
)


def render_chart(spec: dict, path, title: str = "") -> Path:
    """Write one chart spec to a PNG; returns the written path."""
    kind = spec.get("type")
    if kind == "histogram":
        fig = _histogram_figure(spec, title)
    elif kind == "bar":
        fig = _bar_figure(spec, title)
    else:
        raise ConfigError(f"unknown chart type {kind!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata={"Software": "predex"})
    plt.close(fig)
    return path


def _histogram_figure(spec: dict, title: str):
    edges = spec["edges"]
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, series in enumerate(spec["series"]):
        color = PALETTE[i % len(PALETTE)]
        counts = series["counts"]
        ax.stairs(counts, edges, fill=True, alpha=0.45, color=color, label=series["label"])
        ax.stairs(counts, edges, color=color, linewidth=1.2)
    ax.set_xlabel("anomaly score")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    if spec["series"]:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def _bar_figure(spec: dict, title: str):
    categories = spec["categories"]
    highlighted = set(spec.get("highlighted", ()))
    fig, ax = plt.subplots(figsize=(max(7, 0.35 * len(categories)), 4))
    x = range(len(categories))
    for series in spec["series"][:1]:
        colors = [PALETTE[0] if c in highlighted else "#b0b0b0" for c in categories]
        if not highlighted:
            colors = [PALETTE[0]] * len(categories)
        ax.bar(x, series["values"], color=colors)
        ax.set_ylabel(series["label"])
    ax.set_xticks(list(x))
    ax.set_xticklabels(categories, rotation=45, ha="right", fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def render_report_figures(sidecar: dict, out_dir) -> list[Path]:
    """Render every chart embedded in a report sidecar to figures/*.png."""
    out_dir = Path(out_dir)
    written = []
    items = [(c["title"], c["chart"]) for c in sidecar.get("charts", [])]
    items += [
        (f"evidence {i + 1}", bm["chart"])
        for i, bm in enumerate(sidecar.get("bookmarks", []))
        if bm.get("chart")
    ]
    for i, (title, chart) in enumerate(items, start=1):
        path = out_dir / "figures" / f"fig_{i:03d}.png"
        written.append(render_chart(chart, path, title))
    return written
