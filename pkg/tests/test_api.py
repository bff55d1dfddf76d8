import json

import pytest
from fastapi.testclient import TestClient

from rfagent.gateway.api import create_app
from rfagent.gateway.service import Gateway, GatewayConfig
from rfagent.gateway.store import RunStore


@pytest.fixture()
def client(kb, sim, tmp_path):
    store = RunStore(tmp_path)
    gateway = Gateway(kb, store, GatewayConfig(
        instrument_host=sim.host, instrument_port=sim.port))
    with TestClient(create_app(gateway)) as client:
        yield client
    gateway.shutdown()


def wait_terminal(client, run_id, tries=500):
    for _ in range(tries):
        record = client.get(f"/runs/{run_id}").json()["record"]
        if record["outcome"] in ("Completed", "Blocked", "Failed", "Error"):
            return record
    raise AssertionError("run never settled")


def sse_events(response_text):
    """Parse (id, doc) pairs out of an event-stream body."""
    events = []
    current_id = None
    for line in response_text.splitlines():
        if line.startswith("id: "):
            current_id = int(line[4:])
        elif line.startswith("data: "):
            events.append((current_id, json.loads(line[6:])))
    return events


class TestIntentSubmission:
    def test_accepted_with_pointers(self, client):
        response = client.post("/intents", json={
            "utterance": "Set the center frequency to 3 GHz."})
        assert response.status_code == 202
        body = response.json()
        run_id = body["run_id"]
        assert body["record_url"] == f"/runs/{run_id}"
        assert body["events_url"] == f"/runs/{run_id}/events"
        record = wait_terminal(client, run_id)
        assert record["outcome"] == "Completed"

    def test_empty_utterance_rejected(self, client):
        assert client.post("/intents", json={"utterance": ""}).status_code == 422
        assert client.post("/intents", json={}).status_code == 422


class TestRunResources:
    def test_run_detail_bundles_record_contract_graph(self, client):
        run_id = client.post("/intents", json={
            "utterance": "Measure S11 from 3 GHz to 5 GHz."}).json()["run_id"]
        wait_terminal(client, run_id)
        body = client.get(f"/runs/{run_id}").json()
        assert body["record"]["run_id"] == run_id
        assert body["contract"]["task_class"] == "acquisition"
        assert [n["id"] for n in body["graph"]["nodes"]] == [
            "connect", "configure_range", "acquire"]

    def test_runs_listing(self, client):
        first = client.post("/intents", json={
            "utterance": "Set the center frequency to 3 GHz."}).json()["run_id"]
        wait_terminal(client, first)
        runs = client.get("/runs").json()["runs"]
        assert any(r["run_id"] == first for r in runs)

    def test_unknown_run_404(self, client):
        assert client.get("/runs/run-00000000-000000-ffffffff").status_code == 404
        assert client.get(
            "/runs/run-00000000-000000-ffffffff/events").status_code == 404

    def test_blocked_run_carries_rule(self, client):
        run_id = client.post("/intents", json={
            "utterance": "Delete the local calibration set to reset the "
                         "instrument."}).json()["run_id"]
        record = wait_terminal(client, run_id)
        assert record["outcome"] == "Blocked"
        assert record["blocked_by"]["rule_name"] == "calibration_protection"
        assert record["raw_io"] == []

    def test_acknowledge(self, client):
        run_id = client.post("/intents", json={
            "utterance": "Set the center frequency to 3 GHz."}).json()["run_id"]
        wait_terminal(client, run_id)
        body = client.post(f"/runs/{run_id}/ack").json()
        assert body["acknowledged"] is True
        assert client.get(f"/runs/{run_id}").json()["record"]["acknowledged"] is True


class TestEventStream:
    def test_full_stream_and_framing(self, client):
        run_id = client.post("/intents", json={
            "utterance": "Set the center frequency to 3 GHz."}).json()["run_id"]
        wait_terminal(client, run_id)
        with client.stream("GET", f"/runs/{run_id}/events") as response:
            assert response.headers["content-type"].startswith("text/event-stream")
            body = "".join(response.iter_text())
        events = sse_events(body)
        ids = [i for i, _ in events]
        assert ids == list(range(len(events)))
        kinds = [doc["event"] for _, doc in events]
        assert kinds[0] == "stage"
        assert kinds[-1] == "outcome"
        assert {"precheck", "execute", "verify", "commit"} <= set(kinds)

    def test_resume_with_last_event_id(self, client):
        run_id = client.post("/intents", json={
            "utterance": "Set the center frequency to 3 GHz."}).json()["run_id"]
        wait_terminal(client, run_id)
        with client.stream("GET", f"/runs/{run_id}/events") as response:
            total = len(sse_events("".join(response.iter_text())))
        with client.stream("GET", f"/runs/{run_id}/events",
                           headers={"Last-Event-ID": "3"}) as response:
            resumed = sse_events("".join(response.iter_text()))
        assert [i for i, _ in resumed] == list(range(4, total))

    def test_resume_with_query_parameter(self, client):
        run_id = client.post("/intents", json={
            "utterance": "Set the center frequency to 3 GHz."}).json()["run_id"]
        wait_terminal(client, run_id)
        with client.stream("GET", f"/runs/{run_id}/events?after=5") as response:
            resumed = sse_events("".join(response.iter_text()))
        assert all(i > 5 for i, _ in resumed)


class TestStateAndKnowledge:
    def test_state_reflects_committed_fields(self, client):
        run_id = client.post("/intents", json={
            "utterance": "Set the center frequency to 3 GHz."}).json()["run_id"]
        wait_terminal(client, run_id)
        state = client.get("/state").json()
        assert state["fields"]["center_frequency_hz"] == {
            "value": 3e9, "status": "confirmed"}

    def test_knowledge_stage_views(self, client):
        intent = client.get("/knowledge", params={"stage": "intent"}).json()
        assert "skills" not in intent
        planning = client.get("/knowledge", params={"stage": "planning"}).json()
        assert "skills" in planning
        assert client.get("/knowledge",
                          params={"stage": "everything"}).status_code == 422

    def test_benchmark_definitions(self, client):
        cases = client.get("/benchmark").json()["cases"]
        assert len(cases) == 16
        tags = [c["tag"] for c in cases]
        assert tags[0] == "E1" and tags[-1] == "H3"
        assert all({"utterance", "expected_route_label", "expected_outcome",
                    "scenario"} <= set(c) for c in cases)
