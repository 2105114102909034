import json
from datetime import timedelta
from pathlib import Path

import pytest
from click.testing import CliRunner

from cohortlens.actions import CampaignStore, create_campaign
from cohortlens.cli import main
from cohortlens.clustering import ClusteringRequest, run_clustering
from cohortlens.events import EventStore
from cohortlens.insights import GroupStore
from cohortlens.metrics import build_matrix, parse_metric_ids
from conftest import T0


SPEC = {
    "course_id": "c1",
    "duration_days": 21,
    "seed": 9,
    "archetypes": [
        {"archetype": "active_participant", "count": 20},
        {"archetype": "observer", "count": 20},
    ],
}


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def store_dir(runner, tmp_path):
    """synth -> ingest round trip; returns the populated store directory."""
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps(SPEC))
    synth_dir = tmp_path / "synth"
    result = runner.invoke(main, ["synth", str(spec_file), str(synth_dir)])
    assert result.exit_code == 0, result.output

    store = tmp_path / "store"
    result = runner.invoke(
        main,
        [
            "ingest",
            str(synth_dir / "events.jsonl"),
            str(synth_dir / "catalog.json"),
            "--store",
            str(store),
        ],
    )
    assert result.exit_code == 0, result.output
    return store


class TestSynth:
    def test_writes_three_artifacts(self, runner, tmp_path):
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps(SPEC))
        out = tmp_path / "out"
        result = runner.invoke(main, ["synth", str(spec_file), str(out)])
        assert result.exit_code == 0
        assert (out / "events.jsonl").exists()
        assert (out / "catalog.json").exists()
        truth = json.loads((out / "truth.json").read_text())
        assert len(truth) == 40

    def test_bad_archetype_fails(self, runner, tmp_path):
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(
            json.dumps({"course_id": "c", "archetypes": [{"archetype": "ninja", "count": 1}]})
        )
        result = runner.invoke(main, ["synth", str(spec_file), str(tmp_path / "o")])
        assert result.exit_code == 1


class TestIngest:
    def test_round_trip_count(self, store_dir):
        store = EventStore(store_dir)
        assert len(store.events_for("c1")) > 0
        assert store.catalog_for("c1") is not None

    def test_malformed_line_names_location(self, runner, tmp_path):
        events = tmp_path / "bad.jsonl"
        events.write_text('{"not": "an event"}\n')
        catalog = tmp_path / "catalog.json"
        catalog.write_text(json.dumps({"course_id": "c1", "items": []}))
        result = runner.invoke(
            main, ["ingest", str(events), str(catalog), "--store", str(tmp_path / "s")]
        )
        assert result.exit_code == 1
        assert "bad.jsonl:1" in result.output


class TestCluster:
    def test_artifacts_written(self, runner, store_dir, tmp_path):
        out = tmp_path / "run"
        result = runner.invoke(
            main,
            [
                "cluster",
                "--store", str(store_dir),
                "--course", "c1",
                "--metrics", "S,GQP,VPA",
                "--k", "2",
                "--seed", "5",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "k=2" in result.output
        payload = json.loads((out / "result.json").read_text())
        assert payload["k"] == 2
        assert len(payload["assignments"]) == 40
        assert (out / "centers.json").exists()
        assert (out / "sizes.json").exists()
        header = (out / "matrix.csv").read_text().splitlines()[0]
        assert header == "user_id,S,GQP,VPA"
        for figure in ("centers.png", "sizes.png"):
            assert (out / figure).stat().st_size > 0
        assert list(out.glob("scatter_*.png"))
        assert list(out.glob("distribution_*.png"))

    def test_json_outputs_deterministic(self, runner, store_dir, tmp_path):
        args = [
            "cluster",
            "--store", str(store_dir),
            "--course", "c1",
            "--metrics", "GQP,FA",
            "--k", "2",
            "--seed", "1",
            "--no-figures",
        ]
        for out in ("a", "b"):
            result = runner.invoke(main, args + ["--out", str(tmp_path / out)])
            assert result.exit_code == 0, result.output
        for name in ("result.json", "centers.json", "matrix.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_unknown_metric_named_in_error(self, runner, store_dir, tmp_path):
        result = runner.invoke(
            main,
            [
                "cluster",
                "--store", str(store_dir),
                "--course", "c1",
                "--metrics", "GQP,BOGUS",
                "--out", str(tmp_path / "o"),
            ],
        )
        assert result.exit_code == 1
        assert "BOGUS" in result.output

    def test_unknown_course_fails(self, runner, store_dir, tmp_path):
        result = runner.invoke(
            main,
            [
                "cluster",
                "--store", str(store_dir),
                "--course", "ghost",
                "--metrics", "GQP",
                "--out", str(tmp_path / "o"),
            ],
        )
        assert result.exit_code == 1
        assert "ghost" in result.output


class TestReport:
    def _prepare(self, store_dir):
        """Save a group and a dispatched campaign into the store directory."""
        store = EventStore(store_dir)
        metric_ids = parse_metric_ids(["GQP", "FA", "VPA"])
        matrix = build_matrix(store, "c1", metric_ids)
        result = run_clustering(
            ClusteringRequest("c1", metric_ids, k=2, seed=5), matrix
        )
        group = GroupStore(store_dir / "groups.json").save_group(result, 0, "cohort A")
        campaign = create_campaign(group, "s", "b", ab_test=True, seed=1)
        campaigns = CampaignStore(store_dir / "campaigns.json")
        campaigns.add(campaign)

        class _Null:
            def check(self):
                pass

            def send(self, *a):
                pass

        campaigns.dispatch(campaign.campaign_id, _Null())
        # rewind the dispatch so historical windows qualify as "after"
        campaign = campaigns.get(campaign.campaign_id)
        object.__setattr__(campaign, "dispatched_at", T0 - timedelta(days=1))
        campaigns.add(campaign)
        return group

    def test_report_prints_arm_deltas_and_writes_files(self, runner, store_dir, tmp_path):
        group = self._prepare(store_dir)
        week = timedelta(days=7)
        fmt = "%Y-%m-%dT%H:%M:%SZ"
        out = tmp_path / "report"
        result = runner.invoke(
            main,
            [
                "report",
                "--store", str(store_dir),
                "--group", group.group_id,
                "--before", f"{T0.strftime(fmt)}/{(T0 + week).strftime(fmt)}",
                "--after", f"{(T0 + week).strftime(fmt)}/{(T0 + 2 * week).strftime(fmt)}",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "treatment" in result.output and "control" in result.output
        payload = json.loads((out / "report.json").read_text())
        assert set(payload["arms"]) == {"treatment", "control"}
        assert (out / "deltas.png").stat().st_size > 0

    def test_unknown_group_fails(self, runner, store_dir):
        result = runner.invoke(
            main,
            [
                "report",
                "--store", str(store_dir),
                "--group", "nope",
                "--before", "2024-01-01T00:00:00Z/2024-01-02T00:00:00Z",
                "--after", "2024-01-03T00:00:00Z/2024-01-04T00:00:00Z",
            ],
        )
        assert result.exit_code == 1
        assert "nope" in result.output

    def test_undispatched_group_fails(self, runner, store_dir):
        store = EventStore(store_dir)
        metric_ids = parse_metric_ids(["GQP"])
        matrix = build_matrix(store, "c1", metric_ids)
        result = run_clustering(ClusteringRequest("c1", metric_ids, k=2, seed=0), matrix)
        group = GroupStore(store_dir / "groups.json").save_group(result, 0, "quiet")
        outcome = CliRunner().invoke(
            main,
            [
                "report",
                "--store", str(store_dir),
                "--group", group.group_id,
                "--before", "2024-01-01T00:00:00Z/2024-01-02T00:00:00Z",
                "--after", "2024-01-03T00:00:00Z/2024-01-04T00:00:00Z",
            ],
        )
        assert outcome.exit_code == 1
        assert "no dispatched campaign" in outcome.output
