"""Operator gateway: one utterance in, one auditable run out.

Stages run in a fixed order (understand, plan, execute, summarize) and each
is timed into the run record. Submitted intents execute strictly FIFO on a
single worker so instrument access is never interleaved; session state
carries across runs within one gateway.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Any

from ..contracts import ContractValidationError
from ..intent import GroundingError, IntentProvider, IntentService, ProviderError
from ..knowledge.registry import KnowledgeBase
from ..planner import (
    PlanError,
    Route,
    compile_contract,
    route_label,
    validate_structure,
)
from ..runtime import Executor
from ..state import StateManager
from .store import RunStore
from .summarize import summarize

_IO_PREVIEW_CHARS = 200


@dataclass
class GatewayConfig:
    instrument_host: str = "127.0.0.1"
    instrument_port: int = 5025
    node_timeout_s: float = 10.0
    io_timeout_s: float | None = None
    session_name: str = "default"
    extra: dict[str, Any] = field(default_factory=dict)


def _trim_io(raw_io: list[dict[str, Any]]) -> list[dict[str, Any]]:
    """Sent lines stay verbatim (they are audited); long responses get cut."""
    trimmed = []
    for entry in raw_io:
        received = entry.get("received")
        if received is not None and len(received) > _IO_PREVIEW_CHARS:
            received = received[:_IO_PREVIEW_CHARS] + f"...(+{len(received) - _IO_PREVIEW_CHARS} chars)"
        trimmed.append({"sent": entry["sent"], "received": received})
    return trimmed


class Gateway:
    def __init__(
        self,
        kb: KnowledgeBase,
        store: RunStore,
        config: GatewayConfig | None = None,
        provider: IntentProvider | None = None,
        state: StateManager | None = None,
    ):
        self.kb = kb
        self.store = store
        self.config = config or GatewayConfig()
        self.intent = IntentService(provider)
        self.state = state or StateManager()
        self._queue: queue.Queue[tuple[str, str] | None] = queue.Queue()
        self._worker: threading.Thread | None = None
        self._lock = threading.Lock()

    # -- synchronous core ---------------------------------------------------

    def run_intent(self, utterance: str, run_id: str | None = None) -> dict[str, Any]:
        run_id = self.store.create_run(run_id)
        return self._execute_run(run_id, utterance)

    def _emit(self, run_id: str, event: str, payload: dict[str, Any]) -> None:
        self.store.append_event(
            run_id,
            {"event": event, "node_id": "", "timestamp": time.time(), "payload": payload},
        )

    def _execute_run(self, run_id: str, utterance: str) -> dict[str, Any]:
        record: dict[str, Any] = {
            "run_id": run_id,
            "utterance": utterance,
            "created_at": time.time(),
            "outcome": "Running",
            "acknowledged": False,
            "stage_timings_s": {},
            "session": self.config.session_name,
        }
        self.store.write_record(run_id, record)
        timings = record["stage_timings_s"]

        def finish(**updates: Any) -> dict[str, Any]:
            record.update(updates)
            record["completed_at"] = time.time()
            self.store.write_record(run_id, record)
            self._emit(
                run_id,
                "outcome",
                {"outcome": record["outcome"], "summary": record.get("summary", "")},
            )
            return record

        # understand
        t0 = time.perf_counter()
        try:
            contract = self.intent.understand(utterance)
        except (GroundingError, ContractValidationError, ProviderError) as err:
            timings["understand"] = time.perf_counter() - t0
            return finish(
                outcome="Error",
                stage_failed="understand",
                error=str(err),
                summary=f"Could not derive a task contract: {err}",
            )
        timings["understand"] = time.perf_counter() - t0
        self.store.write_contract(run_id, contract.to_dict())
        self._emit(
            run_id,
            "stage",
            {
                "stage": "understand",
                "task_class": contract.task_class.value,
                "provenance": contract.provenance.value,
                "safety_flags": [f.kind.value for f in contract.safety_flags],
            },
        )

        # plan
        t0 = time.perf_counter()
        try:
            graph = compile_contract(contract, self.kb)
            graph = validate_structure(graph, contract, self.kb, self.state.snapshot())
        except PlanError as err:
            timings["plan"] = time.perf_counter() - t0
            return finish(
                outcome="Error",
                stage_failed="plan",
                error=str(err),
                summary=f"Could not compile an executable plan: {err}",
            )
        timings["plan"] = time.perf_counter() - t0
        self.store.write_graph(run_id, graph.to_dict())
        label = route_label(graph)
        record.update(
            route=graph.route.value,
            route_label=label,
            template=graph.template_name,
            node_count=len(graph.nodes),
            safety_annotations=graph.safety_annotations,
        )
        self._emit(
            run_id,
            "stage",
            {"stage": "plan", "route": graph.route.value, "route_label": label,
             "nodes": [n.id for n in graph.nodes]},
        )

        if graph.veto is not None:
            summary = summarize(contract, graph, None, self.state.snapshot())
            self._emit(run_id, "veto", graph.veto.to_dict())
            return finish(
                outcome="Blocked",
                blocked_by=graph.veto.to_dict(),
                summary=summary,
                raw_io=[],
            )

        if graph.route is Route.RESPONSE_ONLY:
            t0 = time.perf_counter()
            summary = summarize(contract, graph, None, self.state.snapshot())
            timings["summarize"] = time.perf_counter() - t0
            return finish(outcome="Completed", summary=summary, raw_io=[])

        # execute
        t0 = time.perf_counter()
        sink = lambda entry: self.store.append_journal(run_id, entry)  # noqa: E731
        self.state.add_sink(sink)
        try:
            executor = Executor(
                self.kb,
                self.state,
                self.config.instrument_host,
                self.config.instrument_port,
                node_timeout_s=self.config.node_timeout_s,
                io_timeout_s=self.config.io_timeout_s,
                event_sink=lambda doc: self.store.append_event(run_id, doc),
                run_id=run_id,
                tool_overrides={
                    "store_segment_records": self.store.segment_store_tool(run_id)
                },
            )
            result = executor.run(graph)
        finally:
            self.state.remove_sink(sink)
        timings["execute"] = time.perf_counter() - t0

        # summarize
        t0 = time.perf_counter()
        summary = summarize(contract, graph, result, self.state.snapshot())
        timings["summarize"] = time.perf_counter() - t0

        updates: dict[str, Any] = {
            "outcome": "Completed" if result.status == "completed" else "Failed",
            "summary": summary,
            "raw_io": _trim_io(result.raw_io),
            "iterations": result.iterations,
            "node_sequence": result.node_sequence,
        }
        if result.failure is not None:
            updates["failure"] = result.failure.to_dict()
        return finish(**updates)

    # -- queued submission -------------------------------------------------

    def submit(self, utterance: str) -> str:
        """Queue an utterance; returns its run id immediately."""
        run_id = self.store.create_run()
        self.store.write_record(
            run_id,
            {
                "run_id": run_id,
                "utterance": utterance,
                "created_at": time.time(),
                "outcome": "Queued",
                "acknowledged": False,
                "session": self.config.session_name,
            },
        )
        with self._lock:
            if self._worker is None or not self._worker.is_alive():
                self._worker = threading.Thread(
                    target=self._drain, name="gateway-worker", daemon=True
                )
                self._worker.start()
        self._queue.put((run_id, utterance))
        return run_id

    def _drain(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                return
            run_id, utterance = item
            try:
                self._execute_run(run_id, utterance)
            except Exception as err:  # noqa: BLE001 - worker must survive
                record = self.store.read_record(run_id) or {"run_id": run_id}
                record.update(outcome="Error", error=str(err), stage_failed="internal")
                self.store.write_record(run_id, record)
            finally:
                self._queue.task_done()

    def shutdown(self) -> None:
        if self._worker is not None and self._worker.is_alive():
            self._queue.put(None)
            self._worker.join(timeout=5)

    # -- record access -----------------------------------------------------

    def acknowledge(self, run_id: str) -> dict[str, Any]:
        record = self.store.read_record(run_id)
        if record is None:
            raise KeyError(run_id)
        record["acknowledged"] = True
        record["acknowledged_at"] = time.time()
        self.store.write_record(run_id, record)
        return record
