"""HTTP surface for the operator console.

Endpoints:

    POST /intents               queue an utterance, returns the run id
    GET  /runs                  list run records, oldest first
    GET  /runs/{id}             record plus stored contract and graph
    GET  /runs/{id}/events      server-sent event stream with resume support
    POST /runs/{id}/ack         operator acknowledgement (blocked runs etc.)
    GET  /state                 session state snapshot
    GET  /knowledge?stage=      staged knowledge disclosure view
    GET  /benchmark             benchmark case definitions

The event stream frames every entry as an `id: N` line (N is the absolute
line index in events.jsonl) followed by one single-line `data:` payload, so
a client can resume after disconnect via Last-Event-ID or ?after=N.
"""

from __future__ import annotations

import asyncio
import json
from typing import Any, AsyncIterator

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from ..knowledge.types import DisclosureStage
from .bench import BENCHMARK_CASES
from .service import Gateway

_TERMINAL = {"Completed", "Blocked", "Failed", "Error"}
_POLL_S = 0.02
_STREAM_BUDGET_S = 120.0


class IntentRequest(BaseModel):
    utterance: str


def create_app(gateway: Gateway) -> FastAPI:
    app = FastAPI(title="rf instrument agent gateway")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.gateway = gateway

    def _record_or_404(run_id: str) -> dict[str, Any]:
        if not gateway.store.exists(run_id):
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        record = gateway.store.read_record(run_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"run {run_id!r} has no record")
        return record

    @app.post("/intents", status_code=202)
    def submit_intent(body: IntentRequest) -> dict[str, str]:
        text = body.utterance.strip()
        if not text:
            raise HTTPException(status_code=422, detail="utterance is empty")
        run_id = gateway.submit(text)
        return {
            "run_id": run_id,
            "record_url": f"/runs/{run_id}",
            "events_url": f"/runs/{run_id}/events",
        }

    @app.get("/runs")
    def list_runs() -> dict[str, Any]:
        records = []
        for run_id in gateway.store.list_runs():
            record = gateway.store.read_record(run_id)
            if record is not None:
                records.append(record)
        return {"runs": records}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict[str, Any]:
        record = _record_or_404(run_id)
        return {
            "record": record,
            "contract": gateway.store.read_contract(run_id),
            "graph": gateway.store.read_graph(run_id),
        }

    @app.post("/runs/{run_id}/ack")
    def ack_run(run_id: str) -> dict[str, Any]:
        _record_or_404(run_id)
        return gateway.acknowledge(run_id)

    @app.get("/runs/{run_id}/events")
    async def stream_events(run_id: str, request: Request, after: int = -1) -> StreamingResponse:
        _record_or_404(run_id)
        last_event_id = request.headers.get("last-event-id")
        if last_event_id is not None:
            try:
                after = int(last_event_id)
            except ValueError:
                pass
        return StreamingResponse(
            _event_stream(gateway, run_id, after),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.get("/state")
    def get_state() -> dict[str, Any]:
        return gateway.state.snapshot().to_dict()

    @app.get("/knowledge")
    def get_knowledge(stage: str = "intent") -> dict[str, Any]:
        try:
            view = gateway.kb.disclose(DisclosureStage(stage))
        except ValueError as err:
            raise HTTPException(status_code=422, detail=str(err)) from err
        return view.payload

    @app.get("/benchmark")
    def get_benchmark() -> dict[str, Any]:
        return {"cases": [case.to_dict() for case in BENCHMARK_CASES]}

    return app


async def _event_stream(gateway: Gateway, run_id: str, after: int) -> AsyncIterator[str]:
    loop = asyncio.get_running_loop()
    deadline = loop.time() + _STREAM_BUDGET_S
    cursor = after
    while True:
        entries = gateway.store.read_events(run_id, cursor)
        for index, doc in entries:
            cursor = index
            yield f"id: {index}\ndata: {json.dumps(doc, sort_keys=True)}\n\n"
        record = gateway.store.read_record(run_id) or {}
        if record.get("outcome") in _TERMINAL:
            # flush anything that landed between the read and the check
            for index, doc in gateway.store.read_events(run_id, cursor):
                cursor = index
                yield f"id: {index}\ndata: {json.dumps(doc, sort_keys=True)}\n\n"
            return
        if loop.time() > deadline:
            return
        await asyncio.sleep(_POLL_S)
