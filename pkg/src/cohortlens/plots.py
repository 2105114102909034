"""Matplotlib rendering of chart datasets to image files.

The CLI report path writes these figures next to the delimited/JSON output.
Colors come from one shared palette indexed by the canonical cluster label,
so every figure colors cluster i identically.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .clustering import ClusteringResult
from .insights import ChartData, centers_chart, distribution_data, scatter_data, sizes_chart
from .metrics import MetricId

PALETTE = plt.get_cmap("tab10").colors

_SAVE_OPTS = {"dpi": 120, "metadata": {"Software": None}}


def _color(index: int):
    return PALETTE[index % len(PALETTE)]


def render_centers(chart: ChartData, path: Path):
    metric_ids = chart.meta["metric_ids"]
    x = np.arange(len(metric_ids))
    k = len(chart.series)
    width = 0.8 / k
    fig, ax = plt.subplots(figsize=(max(6, len(metric_ids) * 1.2), 4))
    for entry, ci in zip(chart.series, chart.color_index):
        ax.bar(
            x + ci * width,
            entry["center"],
            width=width,
            color=_color(ci),
            label=f"cluster {entry['cluster']} (n={entry['size']})",
        )
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(metric_ids)
    ax.set_ylabel("center value (metric units)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def render_sizes(chart: ChartData, path: Path):
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [f"cluster {e['cluster']}" for e in chart.series]
    sizes = [e["size"] for e in chart.series]
    within = [e["withinss"] for e in chart.series]
    colors = [_color(ci) for ci in chart.color_index]
    ax.bar(labels, sizes, color=colors)
    for i, (s, w) in enumerate(zip(sizes, within)):
        ax.annotate(f"wss={w:.1f}", (i, s), ha="center", va="bottom", fontsize=8)
    ax.set_ylabel("cluster size")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def render_scatter(chart: ChartData, path: Path):
    fig, ax = plt.subplots(figsize=(5, 5))
    for entry, ci in zip(chart.series, chart.color_index):
        pts = np.array(entry["points"]).reshape(-1, 2)
        ax.scatter(pts[:, 0], pts[:, 1], s=12, color=_color(ci), alpha=0.6,
                   label=f"cluster {entry['cluster']}")
        cx, cy = entry["center"]
        ax.scatter([cx], [cy], marker="x", s=80, color=_color(ci))
    ax.set_xlabel(chart.meta["x"])
    ax.set_ylabel(chart.meta["y"])
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def render_distribution(chart: ChartData, path: Path):
    edges = chart.meta["edges"]
    centers = [(a + b) / 2 for a, b in zip(edges[:-1], edges[1:])]
    width = (edges[-1] - edges[0]) / max(len(centers), 1) * 0.9
    fig, ax = plt.subplots(figsize=(6, 4))
    bottom = np.zeros(len(centers))
    for entry, ci in zip(chart.series, chart.color_index):
        counts = np.array(entry["counts"], dtype=float)
        ax.bar(centers, counts, width=width, bottom=bottom, color=_color(ci),
               label=f"cluster {entry['cluster']}")
        bottom += counts
    ax.set_xlabel(chart.meta["metric"])
    ax.set_ylabel("users")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def render_effect_report(report_dict: dict, path: Path):
    metric_ids = report_dict["metric_ids"]
    x = np.arange(len(metric_ids))
    fig, ax = plt.subplots(figsize=(max(6, len(metric_ids) * 1.2), 4))
    arms = report_dict["arms"]
    width = 0.8 / max(len(arms), 1)
    for i, (arm, data) in enumerate(sorted(arms.items())):
        ax.bar(x + i * width, data["delta"], width=width, label=f"{arm} (n={data['size']})",
               color=_color(i))
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(metric_ids)
    ax.set_ylabel("after - before (arm mean)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def render_result_figures(result: ClusteringResult, out_dir: Path) -> list[Path]:
    """Write the standard figure set for one clustering result; returns paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def _save(render, chart, name):
        path = out_dir / name
        render(chart, path)
        written.append(path)

    _save(render_centers, centers_chart(result), "centers.png")
    _save(render_sizes, sizes_chart(result), "sizes.png")
    metric_ids = list(result.metric_ids)
    pairs = [
        (a, b) for i, a in enumerate(metric_ids) for b in metric_ids[i + 1:]
    ]
    if len(pairs) > 6:  # cap the scatter matrix for wide metric sets
        pairs = pairs[:6]
    for mx, my in pairs:
        _save(
            render_scatter,
            scatter_data(result, mx, my),
            f"scatter_{mx.value}_{my.value}.png",
        )
    for metric in metric_ids:
        _save(
            render_distribution,
            distribution_data(result, metric),
            f"distribution_{metric.value}.png",
        )
    return written
