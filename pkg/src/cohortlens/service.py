"""HTTP/JSON API over the analytics pipeline.

Mirrors the web-service / analytics-service boundary: the client only ever
sees JSON; clustering runs in-process and responses are deterministic given
the store snapshot and the request (seed included), so a clustering id is a
content hash of its request.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import actions, clustering, events, insights, metrics
from .actions import CampaignStore, FileOutbox, SmtpMailer, create_campaign, effect_report
from .clustering import ClusteringRequest, ClusteringResult, run_clustering
from .events import EventStore
from .insights import (
    GroupStore,
    centers_chart,
    distribution_data,
    scatter_data,
    sizes_chart,
    suggested_clusterings,
)
from .metrics import METRIC_DESCRIPTIONS, MetricId, build_matrix, parse_metric_ids

# every module error maps to exactly one (status, kind) pair
ERROR_TABLE: dict[type, tuple[int, str]] = {
    events.MalformedLine: (400, "malformed_line"),
    events.MissingField: (400, "missing_field"),
    events.UnknownVerb: (400, "unknown_verb"),
    events.InvalidScore: (400, "invalid_score"),
    events.UnknownCourse: (404, "unknown_course"),
    events.StorageFailure: (500, "storage_failure"),
    metrics.UnsortedInput: (400, "unsorted_input"),
    metrics.MissingCatalog: (400, "missing_catalog"),
    metrics.UnknownMetric: (400, "unknown_metric"),
    clustering.TooFewRows: (400, "too_few_rows"),
    clustering.BadK: (400, "bad_k"),
    clustering.SingleCluster: (400, "single_cluster"),
    insights.UnknownCluster: (400, "unknown_cluster"),
    insights.EmptyName: (400, "empty_name"),
    insights.UnknownGroup: (404, "unknown_group"),
    actions.EmptyGroup: (400, "empty_group"),
    actions.AlreadyDispatched: (409, "already_dispatched"),
    actions.MailerUnavailable: (503, "mailer_unavailable"),
    actions.NotDispatched: (400, "not_dispatched"),
    actions.BadWindows: (400, "bad_windows"),
    actions.UnknownCampaign: (404, "unknown_campaign"),
}


class NotFound(Exception):
    pass


class ClusterBody(BaseModel):
    metric_ids: list[str]
    k: Optional[int] = None
    seed: int = 0
    sample_size: int = 2000
    k_range: tuple[int, int] = (2, 10)


class GroupBody(BaseModel):
    clustering_id: str
    cluster_label: int
    name: str


class CampaignBody(BaseModel):
    subject: str
    body: str
    ab_test: bool = False
    seed: int = 0


def clustering_id_for(course_id: str, request: ClusteringRequest) -> str:
    canonical = json.dumps(
        {
            "course_id": course_id,
            "metric_ids": [m.value for m in request.metric_ids],
            "k": request.k,
            "seed": request.seed,
            "sample_size": request.sample_size,
            "k_range": list(request.k_range),
        },
        sort_keys=True,
    )
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def result_payload(clustering_id: str, result: ClusteringResult) -> dict:
    metric_ids = list(result.metric_ids)
    scatter = {}
    for i, mx in enumerate(metric_ids):
        for my in metric_ids[i + 1:]:
            scatter[f"{mx.value}|{my.value}"] = scatter_data(result, mx, my).to_dict()
    distributions = {
        m.value: distribution_data(result, m).to_dict() for m in metric_ids
    }
    return {
        "clustering_id": clustering_id,
        "course_id": result.course_id,
        "metric_ids": [m.value for m in metric_ids],
        "k": result.k,
        "k_estimated": result.k_estimated,
        "seed": result.seed,
        "iterations": result.iterations,
        "assignments": {
            uid: int(lab) for uid, lab in zip(result.user_ids, result.assignments)
        },
        "centers": [[float(v) for v in row] for row in result.centers],
        "centers_normalized": [
            [float(v) for v in row] for row in result.centers_normalized
        ],
        "quality": {
            "withinss": list(result.quality.withinss),
            "tot_withinss": result.quality.tot_withinss,
            "betweenss": result.quality.betweenss,
            "totss": result.quality.totss,
            "sizes": list(result.quality.sizes),
        },
        "charts": {
            "centers": centers_chart(result).to_dict(),
            "sizes": sizes_chart(result).to_dict(),
            "scatter": scatter,
            "distributions": distributions,
        },
    }


def _parse_window(raw: str) -> tuple[datetime, datetime]:
    try:
        start_s, end_s = raw.split("/", 1)
        start = datetime.fromisoformat(start_s.replace("Z", "+00:00"))
        end = datetime.fromisoformat(end_s.replace("Z", "+00:00"))
    except ValueError as exc:
        raise actions.BadWindows(f"bad interval {raw!r}: {exc}") from None
    return start, end


def create_app(
    store: EventStore,
    group_store: GroupStore,
    campaign_store: CampaignStore,
    mailer,
) -> FastAPI:
    app = FastAPI(title="cohortlens", version="0.1.0")
    results: dict[str, ClusteringResult] = {}

    def error_handler(request: Request, exc: Exception) -> JSONResponse:
        status, kind = ERROR_TABLE.get(type(exc), (500, "internal"))
        return JSONResponse(
            status_code=status, content={"error": kind, "message": str(exc)}
        )

    for exc_type in ERROR_TABLE:
        app.add_exception_handler(exc_type, error_handler)

    @app.get("/courses")
    def list_courses():
        out = []
        for course_id in store.courses():
            evs = store.events_for(course_id)
            out.append(
                {
                    "course_id": course_id,
                    "events": len(evs),
                    "users": len({ev.user_id for ev in evs}),
                    "has_catalog": store.catalog_for(course_id) is not None,
                }
            )
        return out

    @app.get("/courses/{course_id}/metrics")
    def list_metrics(course_id: str):
        if course_id not in store.courses():
            raise events.UnknownCourse(course_id)
        return [
            {"id": m.value, "description": METRIC_DESCRIPTIONS[m]}
            for m in metrics.ALL_METRICS
        ]

    @app.get("/suggestions")
    def suggestions():
        return suggested_clusterings()

    @app.post("/courses/{course_id}/clusterings")
    def cluster_course(course_id: str, body: ClusterBody):
        metric_ids = parse_metric_ids(body.metric_ids)
        request = ClusteringRequest(
            course_id=course_id,
            metric_ids=metric_ids,
            k=body.k,
            seed=body.seed,
            sample_size=body.sample_size,
            k_range=tuple(body.k_range),
        )
        matrix = build_matrix(store, course_id, metric_ids)
        result = run_clustering(request, matrix)
        cid = clustering_id_for(course_id, request)
        results[cid] = result
        return result_payload(cid, result)

    def _result(clustering_id: str) -> ClusteringResult:
        if clustering_id not in results:
            raise NotFound(f"no clustering {clustering_id}")
        return results[clustering_id]

    @app.get("/clusterings/{clustering_id}/charts/{kind}")
    def chart(
        clustering_id: str,
        kind: str,
        x: Optional[str] = None,
        y: Optional[str] = None,
        metric: Optional[str] = None,
        bins: int = 20,
    ):
        result = _result(clustering_id)
        kind = kind.upper()
        if kind == "CENTERS":
            return centers_chart(result).to_dict()
        if kind == "SIZES":
            return sizes_chart(result).to_dict()
        if kind == "SCATTER":
            if not x or not y:
                raise metrics.UnknownMetric("scatter needs x and y metric ids")
            (mx, my) = parse_metric_ids([x, y])
            return scatter_data(result, mx, my).to_dict()
        if kind == "DISTRIBUTION":
            if not metric:
                raise metrics.UnknownMetric("distribution needs a metric id")
            (m,) = parse_metric_ids([metric])
            return distribution_data(result, m, bin_count=bins).to_dict()
        raise NotFound(f"unknown chart kind {kind}")

    @app.post("/groups")
    def save_group(body: GroupBody):
        result = _result(body.clustering_id)
        group = group_store.save_group(result, body.cluster_label, body.name)
        return group.to_dict()

    @app.get("/groups")
    def list_groups(course_id: Optional[str] = None):
        return [g.to_dict() for g in group_store.list_groups(course_id)]

    @app.get("/groups/{group_id}")
    def get_group(group_id: str):
        return group_store.get_group(group_id).to_dict()

    @app.post("/groups/{group_id}/campaigns")
    def create_group_campaign(group_id: str, body: CampaignBody):
        group = group_store.get_group(group_id)
        campaign = create_campaign(
            group, body.subject, body.body, ab_test=body.ab_test, seed=body.seed
        )
        campaign_store.add(campaign)
        return campaign.to_dict()

    @app.post("/campaigns/{campaign_id}/dispatch")
    def dispatch(campaign_id: str):
        record = campaign_store.dispatch(campaign_id, mailer)
        return record.to_dict()

    @app.get("/groups/{group_id}/effect-report")
    def group_effect_report(
        group_id: str,
        before: str,
        after: str,
        metric_ids: Optional[str] = None,
        campaign_id: Optional[str] = None,
    ):
        group = group_store.get_group(group_id)
        if campaign_id is not None:
            campaign = campaign_store.get(campaign_id)
        else:
            dispatched = [
                c for c in campaign_store.for_group(group_id) if c.dispatched_at
            ]
            if not dispatched:
                raise actions.NotDispatched(f"group {group_id} has no dispatched campaign")
            campaign = max(dispatched, key=lambda c: c.dispatched_at)
        if metric_ids:
            ids = parse_metric_ids(metric_ids.split(","))
        else:
            ids = group.metric_ids
        report = effect_report(
            store, group, campaign, ids, _parse_window(before), _parse_window(after)
        )
        return report.to_dict()

    @app.exception_handler(NotFound)
    def not_found_handler(request: Request, exc: NotFound):
        return JSONResponse(status_code=404, content={"error": "not_found", "message": str(exc)})

    return app


def load_config(path: str | Path) -> dict:
    config = json.loads(Path(path).read_text())
    config.setdefault("store", "./store")
    config.setdefault("host", "127.0.0.1")
    config.setdefault("port", 8000)
    config.setdefault("mailer", {"kind": "outbox", "path": "./outbox.jsonl"})
    return config


def build_mailer(config: dict):
    mailer_cfg = config.get("mailer", {})
    kind = mailer_cfg.get("kind", "outbox")
    if kind == "outbox":
        return FileOutbox(mailer_cfg.get("path", "./outbox.jsonl"))
    if kind == "smtp":
        return SmtpMailer(
            host=mailer_cfg["host"],
            port=int(mailer_cfg.get("port", 25)),
            sender=mailer_cfg["sender"],
        )
    raise ValueError(f"unknown mailer kind {kind!r}")


def app_from_config(config: dict) -> FastAPI:
    store_dir = Path(config["store"])
    store = EventStore(store_dir)
    group_store = GroupStore(store_dir / "groups.json")
    campaign_store = CampaignStore(store_dir / "campaigns.json")
    return create_app(store, group_store, campaign_store, build_mailer(config))
