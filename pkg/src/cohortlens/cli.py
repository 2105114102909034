"""Offline command line for the analytics pipeline.

ingest   load a JSON-Lines event file and a catalog into a store
synth    generate a labeled synthetic cohort to disk
cluster  run the metric -> normalize -> k -> K-Means pipeline; writes JSON,
         CSV and rendered figures into an output directory
report   before/after effect report for a saved group's campaign
serve    run the HTTP service from a JSON config file
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .actions import FileOutbox, effect_report
from .clustering import ClusteringRequest, run_clustering
from .events import EventStore, parse_catalog, parse_event
from .insights import GroupStore, centers_chart, distribution_data, scatter_data, sizes_chart
from .metrics import build_matrix, parse_metric_ids
from .service import _parse_window, app_from_config, load_config, result_payload, clustering_id_for
from .synth import Archetype, ArchetypeSpec, Cohort, CohortSpec, generate_cohort
from .actions import CampaignStore
from .events import serialize_catalog, serialize_event


@click.group()
def main():
    """Learner-analytics engine: metrics, clustering, groups, campaigns."""


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@main.command()
@click.argument("events_file", type=click.Path(exists=True, path_type=Path))
@click.argument("catalog_file", type=click.Path(exists=True, path_type=Path))
@click.option("--store", "store_dir", type=click.Path(path_type=Path), default="./store")
def ingest(events_file: Path, catalog_file: Path, store_dir: Path):
    """Validate and append EVENTS_FILE (JSON lines) plus CATALOG_FILE to a store."""
    try:
        store = EventStore(store_dir)
        store.add_catalog(parse_catalog(catalog_file.read_text()))
        events = []
        for lineno, line in enumerate(events_file.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                events.append(parse_event(line))
            except Exception as exc:
                _fail(f"{events_file}:{lineno}: {exc}")
        count = store.append_events(events)
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"appended {count} events to {store_dir}")


@main.command()
@click.argument("spec_file", type=click.Path(exists=True, path_type=Path))
@click.argument("out_dir", type=click.Path(path_type=Path))
def synth(spec_file: Path, out_dir: Path):
    """Generate a synthetic cohort from SPEC_FILE into OUT_DIR.

    Spec format: {"course_id": ..., "duration_days": ..., "seed": ...,
    "archetypes": [{"archetype": "observer", "count": 50}, ...]}.
    """
    try:
        raw = json.loads(spec_file.read_text())
        spec = CohortSpec(
            course_id=raw["course_id"],
            duration_days=raw.get("duration_days", 28),
            archetypes=tuple(
                ArchetypeSpec(
                    archetype=Archetype(a["archetype"]),
                    count=a["count"],
                    overrides=a.get("overrides"),
                )
                for a in raw["archetypes"]
            ),
            seed=raw.get("seed", 0),
        )
        cohort = generate_cohort(spec)
    except Exception as exc:
        _fail(str(exc))
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "events.jsonl").open("w") as fh:
        for ev in cohort.events:
            fh.write(serialize_event(ev) + "\n")
    (out_dir / "catalog.json").write_text(serialize_catalog(cohort.catalog))
    (out_dir / "truth.json").write_text(
        json.dumps({uid: arch.value for uid, arch in cohort.truth.items()}, indent=2)
    )
    click.echo(
        f"wrote {len(cohort.events)} events for {len(cohort.truth)} users to {out_dir}"
    )


@main.command()
@click.option("--store", "store_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--course", required=True)
@click.option("--metrics", "metric_csv", required=True, help="comma-separated metric ids")
@click.option("--k", default="auto", help="cluster count or 'auto'")
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--figures/--no-figures", default=True, help="render PNG figures")
def cluster(store_dir, course, metric_csv, k, seed, out_dir, figures):
    """Cluster a course and write result.json, centers.json, matrix.csv and figures."""
    try:
        metric_ids = parse_metric_ids(metric_csv.split(","))
        k_value = None if k == "auto" else int(k)
        store = EventStore(store_dir)
        matrix = build_matrix(store, course, metric_ids)
        request = ClusteringRequest(
            course_id=course, metric_ids=metric_ids, k=k_value, seed=seed
        )
        result = run_clustering(request, matrix)
    except Exception as exc:
        _fail(str(exc))
    out_dir.mkdir(parents=True, exist_ok=True)
    cid = clustering_id_for(course, request)
    payload = result_payload(cid, result)
    _write_json(out_dir / "result.json", payload)
    _write_json(out_dir / "centers.json", centers_chart(result).to_dict())
    _write_json(out_dir / "sizes.json", sizes_chart(result).to_dict())
    (out_dir / "matrix.csv").write_text(matrix.to_csv())
    if figures:
        from .plots import render_result_figures

        render_result_figures(result, out_dir)
    click.echo(
        f"clustered {matrix.n} users into k={result.k} "
        f"(tot_withinss={result.quality.tot_withinss:.3f}); output in {out_dir}"
    )


@main.command()
@click.option("--store", "store_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--group", "group_id", required=True)
@click.option("--before", required=True, help="ISO interval start/end")
@click.option("--after", required=True, help="ISO interval start/end")
@click.option("--metrics", "metric_csv", default=None)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
def report(store_dir, group_id, before, after, metric_csv, out_dir):
    """Effect report (per-arm before/after metric means) for a saved group."""
    try:
        store = EventStore(store_dir)
        group_store = GroupStore(Path(store_dir) / "groups.json")
        campaign_store = CampaignStore(Path(store_dir) / "campaigns.json")
        group = group_store.get_group(group_id)
        dispatched = [c for c in campaign_store.for_group(group_id) if c.dispatched_at]
        if not dispatched:
            _fail(f"group {group_id} has no dispatched campaign")
        campaign = max(dispatched, key=lambda c: c.dispatched_at)
        ids = parse_metric_ids(metric_csv.split(",")) if metric_csv else group.metric_ids
        rep = effect_report(
            store, group, campaign, ids, _parse_window(before), _parse_window(after)
        )
    except SystemExit:
        raise
    except Exception as exc:
        _fail(str(exc))
    payload = rep.to_dict()
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "report.json", payload)
        from .plots import render_effect_report

        render_effect_report(payload, out_dir / "deltas.png")
    header = "arm".ljust(12) + "".join(m.value.rjust(12) for m in rep.metric_ids)
    click.echo(header)
    for arm, data in sorted(payload["arms"].items()):
        click.echo(
            f"{arm:<12}" + "".join(f"{d:>12.4f}" for d in data["delta"])
        )


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path), required=True)
def serve(config_file: Path):
    """Run the HTTP service described by a JSON config file."""
    import uvicorn

    config = load_config(config_file)
    app = app_from_config(config)
    uvicorn.run(app, host=config["host"], port=int(config["port"]))


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
