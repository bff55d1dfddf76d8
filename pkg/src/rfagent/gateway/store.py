"""Per-run artifact store.

Each run owns a directory:

    runs/<run_id>/
        record.json     run outcome and timings
        contract.json   the task contract as planned
        graph.json      the executable graph (post-validation)
        events.jsonl    runtime event stream, one JSON object per line
        journal.jsonl   state commits and invalidations
        traces/*.csv    stored sweep data

Line numbers in the jsonl files double as resume cursors for the event
stream API, so appends are strictly ordered and never rewritten.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ..knowledge.toolimpl import ToolError
from ..rftools.traces import ComplexTrace, FrequencyAxis, save_trace_csv


class RunStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "runs").mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    # -- run directories ---------------------------------------------------

    def new_run_id(self) -> str:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        return f"run-{stamp}-{uuid.uuid4().hex[:8]}"

    def run_dir(self, run_id: str) -> Path:
        path = (self.root / "runs" / run_id).resolve()
        if self.root.resolve() not in path.parents:
            raise ValueError(f"run id {run_id!r} escapes the store")
        return path

    def create_run(self, run_id: str | None = None) -> str:
        run_id = run_id or self.new_run_id()
        path = self.run_dir(run_id)
        path.mkdir(parents=True, exist_ok=False)
        (path / "traces").mkdir()
        return run_id

    def list_runs(self) -> list[str]:
        runs = self.root / "runs"
        return sorted(p.name for p in runs.iterdir() if p.is_dir())

    def exists(self, run_id: str) -> bool:
        try:
            return self.run_dir(run_id).is_dir()
        except ValueError:
            return False

    # -- documents -----------------------------------------------------------

    def _write_json(self, run_id: str, name: str, doc: dict[str, Any]) -> None:
        path = self.run_dir(run_id) / name
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, path)

    def _read_json(self, run_id: str, name: str) -> dict[str, Any] | None:
        path = self.run_dir(run_id) / name
        if not path.exists():
            return None
        return json.loads(path.read_text())

    def write_record(self, run_id: str, doc: dict[str, Any]) -> None:
        self._write_json(run_id, "record.json", doc)

    def read_record(self, run_id: str) -> dict[str, Any] | None:
        return self._read_json(run_id, "record.json")

    def write_contract(self, run_id: str, doc: dict[str, Any]) -> None:
        self._write_json(run_id, "contract.json", doc)

    def read_contract(self, run_id: str) -> dict[str, Any] | None:
        return self._read_json(run_id, "contract.json")

    def write_graph(self, run_id: str, doc: dict[str, Any]) -> None:
        self._write_json(run_id, "graph.json", doc)

    def read_graph(self, run_id: str) -> dict[str, Any] | None:
        return self._read_json(run_id, "graph.json")

    # -- append-only streams ---------------------------------------------

    def _append_line(self, run_id: str, name: str, doc: dict[str, Any]) -> int:
        """Append one JSON line; returns its zero-based line index."""
        path = self.run_dir(run_id) / name
        line = json.dumps(doc, sort_keys=True)
        with self._lock:
            index = 0
            if path.exists():
                with open(path, "rb") as fh:
                    index = sum(1 for _ in fh)
            with open(path, "a") as fh:
                fh.write(line + "\n")
        return index

    def append_event(self, run_id: str, doc: dict[str, Any]) -> int:
        return self._append_line(run_id, "events.jsonl", doc)

    def append_journal(self, run_id: str, doc: dict[str, Any]) -> int:
        return self._append_line(run_id, "journal.jsonl", doc)

    def _read_lines(
        self, run_id: str, name: str, after: int = -1
    ) -> list[tuple[int, dict[str, Any]]]:
        path = self.run_dir(run_id) / name
        if not path.exists():
            return []
        out = []
        with open(path) as fh:
            for index, line in enumerate(fh):
                if index > after and line.strip():
                    out.append((index, json.loads(line)))
        return out

    def read_events(self, run_id: str, after: int = -1) -> list[tuple[int, dict[str, Any]]]:
        return self._read_lines(run_id, "events.jsonl", after)

    def read_journal(self, run_id: str, after: int = -1) -> list[tuple[int, dict[str, Any]]]:
        return self._read_lines(run_id, "journal.jsonl", after)

    # -- trace storage ----------------------------------------------------

    def store_trace(
        self, run_id: str, record_id: str, frequency_axis_hz: list[float], trace_data: list[float]
    ) -> str:
        """Write one sweep as CSV; refuses to overwrite an existing record."""
        path = self.run_dir(run_id) / "traces" / f"{record_id}.csv"
        if path.exists():
            raise ToolError(f"record {record_id!r} already stored; refusing to overwrite")
        values = np.asarray(trace_data, dtype=float)
        if values.size == 0 or values.size % 2 != 0:
            raise ToolError(f"record {record_id!r} has malformed trace data")
        trace = ComplexTrace(
            axis=FrequencyAxis.from_grid(np.asarray(frequency_axis_hz, dtype=float)),
            values=values[0::2] + 1j * values[1::2],
        )
        save_trace_csv(path, trace)
        return str(path.relative_to(self.root))

    def segment_store_tool(self, run_id: str) -> Callable[[dict[str, Any]], dict[str, Any]]:
        """Tool implementation bound to this run; replaces the in-memory
        fallback so stored segments land in the run directory."""

        def store(inputs: dict[str, Any]) -> dict[str, Any]:
            records = inputs.get("records") or []
            if not records:
                raise ToolError("no segment records to store")
            ids = []
            locations = []
            for k, record in enumerate(records):
                if "trace_data" not in record or "frequency_axis_hz" not in record:
                    raise ToolError(f"segment record {k} is missing trace data")
                record_id = f"segment-{k + 1}"
                location = self.store_trace(
                    run_id, record_id, record["frequency_axis_hz"], record["trace_data"]
                )
                ids.append(record_id)
                locations.append(location)
            return {"record_ids": ids, "count": len(ids), "locations": locations}

        return store
