"""HTTP endpoints: corpus, runs, records, reports, and label submission."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from gesturelab.gateway import ModelConfig, ProviderKind, make_gateway
from gesturelab.prompts import SpecLevel
from gesturelab.runner import ExperimentSpec, run_experiment
from gesturelab.service import create_app

MODEL = "mock-chat"


@pytest.fixture
def served(tmp_path, mini_corpus):
    """A small recorded experiment behind a test client."""
    gw = make_gateway(ProviderKind.MOCK, ModelConfig(model_name=MODEL), tmp_path / "cache")
    spec = ExperimentSpec(
        corpus=mini_corpus,
        model_name=MODEL,
        levels=(SpecLevel.CATEGORY,),
        plans=("k1", "zeroshot"),
    )
    results = run_experiment(spec, tmp_path / "exp", gateway=gw)
    app = create_app(tmp_path / "exp", mini_corpus)
    client = TestClient(app)
    return client, [r.run_id for r in results], tmp_path / "exp"


def label_payload(**overrides) -> dict:
    payload = {"target_id": "tour-001", "value": "similar", "rater": "rater-a"}
    payload.update(overrides)
    return payload


def test_corpus_endpoint_serves_annotations(served, mini_corpus):
    client, _, _ = served
    resp = client.get("/api/corpus")
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["name"] == mini_corpus.name
    assert len(doc["annotations"]) == 6
    assert doc["annotations"][0]["id"] == "tour-001"


def test_runs_endpoint_lists_manifests(served):
    client, run_ids, _ = served
    doc = client.get("/api/runs").json()
    assert [m["run_id"] for m in doc["runs"]] == sorted(run_ids)
    for manifest in doc["runs"]:
        assert manifest["level"] == "category"
        assert manifest["n_labels"] == 0


def test_records_join_truth_and_match(served, mini_corpus):
    client, run_ids, _ = served
    run_id = run_ids[0]
    doc = client.get(f"/api/runs/{run_id}/records").json()
    assert doc["run_id"] == run_id
    assert doc["level"] == "category"
    assert len(doc["records"]) == 6
    by_id = {r["target_id"]: r for r in doc["records"]}
    row = by_id["tour-003"]
    truth = row["truth"]
    assert truth["trigger_phrase"] == "Forget the old theory"
    assert truth["labels"]["category"] == "sweep"
    assert truth["labels"]["physical"] == "sweep with palm facing down"
    assert truth["labels"]["semantic-gesture"] == "negative sweep"
    assert truth["labels"]["semantic-only"] == "negative"
    assert row["match"] is not None
    assert set(row["match"]) == {"matched", "kind", "predicted_category"}
    assert row["label"] is None


def test_unknown_run_and_target_are_404(served):
    client, run_ids, _ = served
    assert client.get("/api/runs/ghost/records").status_code == 404
    assert client.get("/api/runs/ghost/report").status_code == 404
    resp = client.post(f"/api/runs/{run_ids[0]}/labels", json=label_payload(target_id="ghost"))
    assert resp.status_code == 404
    assert resp.json()["error"]["code"] == "unknown-target"
    resp = client.post("/api/runs/ghost/labels", json=label_payload())
    assert resp.status_code == 404
    assert resp.json()["error"]["code"] == "unknown-run"


def test_label_round_trip_appears_in_records_and_report(served):
    client, run_ids, _ = served
    run_id = run_ids[0]
    resp = client.post(f"/api/runs/{run_id}/labels", json=label_payload())
    assert resp.status_code == 200
    entry = resp.json()["label"]
    assert entry["value"] == "similar"
    assert entry["rater"] == "rater-a"
    assert entry["history"] == []

    records = client.get(f"/api/runs/{run_id}/records").json()["records"]
    row = next(r for r in records if r["target_id"] == "tour-001")
    assert row["label"]["value"] == "similar"

    report = client.get(f"/api/runs/{run_id}/report").json()
    assert report["appropriateness"]["counts"]["similar"] == 1
    assert report["appropriateness"]["total"] == 1

    runs = client.get("/api/runs").json()["runs"]
    manifest = next(m for m in runs if m["run_id"] == run_id)
    assert manifest["n_labels"] == 1


def test_second_label_conflicts_unless_adjudicated(served):
    client, run_ids, _ = served
    run_id = run_ids[0]
    assert client.post(f"/api/runs/{run_id}/labels", json=label_payload()).status_code == 200
    dup = client.post(
        f"/api/runs/{run_id}/labels",
        json=label_payload(value="no-gesture", rater="rater-b"),
    )
    assert dup.status_code == 409
    assert dup.json()["error"]["code"] == "label-conflict"

    fixed = client.post(
        f"/api/runs/{run_id}/labels",
        json=label_payload(value="no-gesture", rater="rater-b", adjudicated=True),
    )
    assert fixed.status_code == 200
    entry = fixed.json()["label"]
    assert entry["value"] == "no-gesture"
    assert len(entry["history"]) == 1
    assert entry["history"][0]["value"] == "similar"


def test_bad_label_value_is_400(served):
    client, run_ids, _ = served
    resp = client.post(
        f"/api/runs/{run_ids[0]}/labels", json=label_payload(value="meh")
    )
    assert resp.status_code == 400
    assert resp.json()["error"]["code"] == "bad-value"


def test_labels_are_per_run(served):
    client, run_ids, _ = served
    first, second = run_ids[0], run_ids[1]
    client.post(f"/api/runs/{first}/labels", json=label_payload())
    records = client.get(f"/api/runs/{second}/records").json()["records"]
    row = next(r for r in records if r["target_id"] == "tour-001")
    assert row["label"] is None
    # and the same target can be labeled independently in the other run
    resp = client.post(f"/api/runs/{second}/labels", json=label_payload())
    assert resp.status_code == 200


def test_report_carries_both_policies_and_chance(served):
    client, run_ids, _ = served
    report = client.get(f"/api/runs/{run_ids[0]}/report").json()
    policies = [e["policy"] for e in report["evaluations"]]
    assert policies == ["first-only", "any-candidate"]
    for evaluation in report["evaluations"]:
        assert evaluation["chance"]["fraction"] == "1/3"
        assert "confusion" in evaluation


def test_label_store_file_is_human_readable(served):
    client, run_ids, out_dir = served
    client.post(f"/api/runs/{run_ids[0]}/labels", json=label_payload(note="close call"))
    path = out_dir / "runs" / run_ids[0] / "labels.json"
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc["labels"]["tour-001"]["note"] == "close call"
