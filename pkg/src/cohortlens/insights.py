"""Visualization-ready datasets and saved student groups.

Chart builders are pure projections of a ClusteringResult; the color index of
a cluster is its canonical label, so every chart kind colors cluster i the
same way.  Groups snapshot a cluster's members and provenance at save time.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from .clustering import ClusteringRequest, ClusteringResult
from .metrics import MetricId, UnknownMetric


class InsightsError(Exception):
    pass


class UnknownCluster(InsightsError):
    pass


class EmptyName(InsightsError):
    pass


class UnknownGroup(InsightsError):
    pass


@dataclass(frozen=True)
class ChartData:
    kind: str  # CENTERS | SCATTER | DISTRIBUTION | SIZES
    series: tuple[dict, ...]  # one entry per cluster
    color_index: tuple[int, ...]
    meta: dict

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "series": list(self.series),
            "color_index": list(self.color_index),
            "meta": self.meta,
        }


def _metric_column(result: ClusteringResult, metric: MetricId) -> int:
    try:
        return result.metric_ids.index(metric)
    except ValueError:
        raise UnknownMetric(f"{metric.value} was not part of the clustered metrics") from None


def centers_chart(result: ClusteringResult) -> ChartData:
    """Denormalized center value per metric, plus size and withinss per cluster."""
    series = tuple(
        {
            "cluster": j,
            "center": [float(v) for v in result.centers[j]],
            "size": result.quality.sizes[j],
            "withinss": result.quality.withinss[j],
        }
        for j in range(result.k)
    )
    return ChartData(
        kind="CENTERS",
        series=series,
        color_index=tuple(range(result.k)),
        meta={"metric_ids": [m.value for m in result.metric_ids]},
    )


def sizes_chart(result: ClusteringResult) -> ChartData:
    series = tuple(
        {
            "cluster": j,
            "size": result.quality.sizes[j],
            "withinss": result.quality.withinss[j],
        }
        for j in range(result.k)
    )
    return ChartData(
        kind="SIZES",
        series=series,
        color_index=tuple(range(result.k)),
        meta={
            "tot_withinss": result.quality.tot_withinss,
            "betweenss": result.quality.betweenss,
            "totss": result.quality.totss,
        },
    )


def scatter_data(result: ClusteringResult, metric_x: MetricId, metric_y: MetricId) -> ChartData:
    """Per-cluster (x, y) point lists in original metric units plus the center."""
    cx = _metric_column(result, metric_x)
    cy = _metric_column(result, metric_y)
    series = []
    for j in range(result.k):
        mask = result.assignments == j
        pts = result.values[mask][:, (cx, cy)]
        series.append(
            {
                "cluster": j,
                "points": [[float(x), float(y)] for x, y in pts],
                "center": [float(result.centers[j][cx]), float(result.centers[j][cy])],
            }
        )
    return ChartData(
        kind="SCATTER",
        series=tuple(series),
        color_index=tuple(range(result.k)),
        meta={"x": metric_x.value, "y": metric_y.value},
    )


def distribution_data(
    result: ClusteringResult, metric: MetricId, bin_count: int = 20
) -> ChartData:
    """Per-cluster histogram over shared equal-width bins spanning the metric range."""
    if bin_count < 1:
        raise InsightsError("bin_count must be >= 1")
    col = _metric_column(result, metric)
    values = result.values[:, col]
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        edges = [lo, lo + 1.0]  # zero range: one bin holds everything
    else:
        step = (hi - lo) / bin_count
        edges = [lo + i * step for i in range(bin_count)] + [hi]
    series = []
    for j in range(result.k):
        vals = values[result.assignments == j]
        counts = [0] * (len(edges) - 1)
        for v in vals:
            idx = min(int((v - edges[0]) / (edges[-1] - edges[0]) * (len(edges) - 1)), len(edges) - 2)
            counts[idx] += 1
        series.append({"cluster": j, "counts": counts})
    return ChartData(
        kind="DISTRIBUTION",
        series=tuple(series),
        color_index=tuple(range(result.k)),
        meta={"metric": metric.value, "edges": edges},
    )


def suggested_clusterings() -> list[dict]:
    """Named preset clustering requests instructors commonly start from."""
    return [
        {"name": "quiz performance", "metric_ids": ["GQP", "UQP", "MQP", "BQP"]},
        {"name": "engagement", "metric_ids": ["S", "TSD", "ASD", "FA"]},
        {"name": "content usage", "metric_ids": ["VPA", "DA", "ID"]},
        {"name": "forum involvement", "metric_ids": ["TFC", "FO", "FA"]},
    ]


@dataclass(frozen=True)
class StudentGroup:
    group_id: str
    course_id: str
    name: str
    user_ids: tuple[str, ...]
    metric_ids: tuple[MetricId, ...]
    snapshot: dict[str, tuple[float, ...]]  # user_id -> metric values at save time
    cluster_label: int
    created_at: datetime
    provenance: dict  # the originating request, seed included

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "course_id": self.course_id,
            "name": self.name,
            "user_ids": list(self.user_ids),
            "metric_ids": [m.value for m in self.metric_ids],
            "snapshot": {uid: list(vals) for uid, vals in self.snapshot.items()},
            "cluster_label": self.cluster_label,
            "created_at": self.created_at.isoformat(),
            "provenance": self.provenance,
        }

    @staticmethod
    def from_dict(raw: dict) -> "StudentGroup":
        return StudentGroup(
            group_id=raw["group_id"],
            course_id=raw["course_id"],
            name=raw["name"],
            user_ids=tuple(raw["user_ids"]),
            metric_ids=tuple(MetricId(m) for m in raw["metric_ids"]),
            snapshot={uid: tuple(vals) for uid, vals in raw["snapshot"].items()},
            cluster_label=raw["cluster_label"],
            created_at=datetime.fromisoformat(raw["created_at"]),
            provenance=raw["provenance"],
        )


def request_provenance(request: ClusteringRequest) -> dict:
    return {
        "course_id": request.course_id,
        "metric_ids": [m.value for m in request.metric_ids],
        "k": request.k,
        "seed": request.seed,
        "sample_size": request.sample_size,
        "k_range": list(request.k_range),
    }


def provenance_request(raw: dict) -> ClusteringRequest:
    return ClusteringRequest(
        course_id=raw["course_id"],
        metric_ids=tuple(MetricId(m) for m in raw["metric_ids"]),
        k=raw.get("k"),
        seed=raw["seed"],
        sample_size=raw.get("sample_size", 2000),
        k_range=tuple(raw.get("k_range", (2, 10))),
    )


class GroupStore:
    """Single-file document store for saved groups, keyed by group_id."""

    def __init__(self, path: Optional[str | Path] = None):
        self._lock = threading.RLock()
        self._groups: dict[str, StudentGroup] = {}
        self._path = Path(path) if path is not None else None
        if self._path is not None and self._path.exists():
            raw = json.loads(self._path.read_text())
            for doc in raw.values():
                group = StudentGroup.from_dict(doc)
                self._groups[group.group_id] = group

    def _flush(self):
        if self._path is not None:
            payload = {gid: g.to_dict() for gid, g in self._groups.items()}
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._path.write_text(json.dumps(payload))

    def save_group(
        self, result: ClusteringResult, cluster_label: int, name: str
    ) -> StudentGroup:
        if not name or not name.strip():
            raise EmptyName("group name must be non-empty")
        if not 0 <= cluster_label < result.k:
            raise UnknownCluster(f"cluster {cluster_label} outside [0, {result.k})")
        mask = result.assignments == cluster_label
        user_ids = tuple(uid for uid, hit in zip(result.user_ids, mask) if hit)
        snapshot = {
            uid: tuple(float(v) for v in result.values[i])
            for i, uid in enumerate(result.user_ids)
            if mask[i]
        }
        group = StudentGroup(
            group_id=uuid.uuid4().hex[:12],
            course_id=result.course_id,
            name=name.strip(),
            user_ids=user_ids,
            metric_ids=result.metric_ids,
            snapshot=snapshot,
            cluster_label=cluster_label,
            created_at=datetime.now(timezone.utc),
            provenance=request_provenance(result.request),
        )
        with self._lock:
            self._groups[group.group_id] = group
            self._flush()
        return group

    def list_groups(self, course_id: Optional[str] = None) -> list[StudentGroup]:
        with self._lock:
            groups = sorted(self._groups.values(), key=lambda g: g.created_at)
            if course_id is not None:
                groups = [g for g in groups if g.course_id == course_id]
            return groups

    def get_group(self, group_id: str) -> StudentGroup:
        with self._lock:
            try:
                return self._groups[group_id]
            except KeyError:
                raise UnknownGroup(group_id) from None
