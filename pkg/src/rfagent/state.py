"""Instrument state plane.

Holds the runtime's memory of what the instrument is verifiably configured
to. Every field carries a status: Confirmed means the last transition came
through commit() with a passing verification, Invalid means a verification
failed or a coupled field was silently changed by the instrument, Unknown
means never observed. Commits append to a journal; replaying the journal
reproduces the field state exactly.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Iterable

from .knowledge.types import Precondition


class FieldStatus(str, Enum):
    CONFIRMED = "confirmed"
    INVALID = "invalid"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class FieldState:
    value: Any = None
    status: FieldStatus = FieldStatus.UNKNOWN


CONFIGURATION_FIELDS = (
    "center_frequency_hz",
    "span_hz",
    "start_frequency_hz",
    "stop_frequency_hz",
    "sweep_points",
    "if_bandwidth_hz",
    "output_power_dbm",
    "active_measurement",
    "rf_output_on",
    "calibration_present",
)

_FREQ_TOL_HZ = 0.5  # slack for center/span vs start/stop cross-checks


@dataclass(frozen=True)
class DataRef:
    id: str
    kind: str  # complex_trace | frequency_axis | tool_output | stored_record
    location: str
    created_at: float


@dataclass
class ExecutionContext:
    active_run_id: str | None = None
    active_node: str | None = None
    data_refs: list[DataRef] = field(default_factory=list)


@dataclass(frozen=True)
class StateSnapshot:
    fields: dict[str, FieldState]
    active_run_id: str | None
    active_node: str | None
    data_refs: tuple[DataRef, ...]
    unresolved_failures: tuple[str, ...]

    def value_of(self, name: str) -> Any:
        return self.fields[name].value

    def status_of(self, name: str) -> FieldStatus:
        return self.fields[name].status

    def confirmed(self, name: str) -> bool:
        return self.fields[name].status is FieldStatus.CONFIRMED

    def satisfies(self, pre: Precondition) -> bool:
        fs = self.fields.get(pre.field)
        if fs is None or fs.status is not FieldStatus.CONFIRMED:
            return False
        if pre.op == "defined":
            return fs.value is not None
        if pre.op == "eq":
            return fs.value == pre.value
        if pre.op == "le":
            return fs.value is not None and fs.value <= pre.value
        if pre.op == "ge":
            return fs.value is not None and fs.value >= pre.value
        raise ValueError(f"unknown precondition op {pre.op!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "fields": {
                name: {"value": fs.value, "status": fs.status.value}
                for name, fs in self.fields.items()
            },
            "active_run_id": self.active_run_id,
            "active_node": self.active_node,
            "data_refs": [
                {"id": r.id, "kind": r.kind, "location": r.location, "created_at": r.created_at}
                for r in self.data_refs
            ],
            "unresolved_failures": list(self.unresolved_failures),
        }


JournalSink = Callable[[dict[str, Any]], None]


class StateManager:
    """Verify-then-commit state store with derived frequency consistency."""

    def __init__(self, on_entry: JournalSink | None = None) -> None:
        self._fields: dict[str, FieldState] = {name: FieldState() for name in CONFIGURATION_FIELDS}
        self._context = ExecutionContext()
        self._failures: list[str] = []
        self._seq = 0
        self._lock = threading.Lock()
        self._sinks: list[JournalSink] = [on_entry] if on_entry else []
        self.journal: list[dict[str, Any]] = []

    # -- sinks ---------------------------------------------------------------

    def add_sink(self, sink: JournalSink) -> None:
        with self._lock:
            self._sinks.append(sink)

    def remove_sink(self, sink: JournalSink) -> None:
        with self._lock:
            if sink in self._sinks:
                self._sinks.remove(sink)

    # -- reads ----------------------------------------------------------------

    def snapshot(self) -> StateSnapshot:
        with self._lock:
            return StateSnapshot(
                fields=dict(self._fields),
                active_run_id=self._context.active_run_id,
                active_node=self._context.active_node,
                data_refs=tuple(self._context.data_refs),
                unresolved_failures=tuple(self._failures),
            )

    # -- transitions ------------------------------------------------------------

    def commit(
        self,
        node_id: str,
        observations: dict[str, Any],
        verification: dict[str, Any] | None = None,
    ) -> dict[str, Any]:
        """Record verified observations and reconcile coupled frequency fields."""
        unknown = [k for k in observations if k not in self._fields]
        if unknown:
            raise KeyError(f"not configuration fields: {unknown}")
        with self._lock:
            for name, value in observations.items():
                self._fields[name] = FieldState(value, FieldStatus.CONFIRMED)
            derived, invalidated = self._reconcile(set(observations))
            entry = self._append(
                {
                    "kind": "commit",
                    "node_id": node_id,
                    "values": dict(observations),
                    "derived": derived,
                    "invalidated": invalidated,
                    "verification": verification or {},
                }
            )
        return entry

    def mark_invalid(self, node_id: str, fields: Iterable[str], reason: str) -> dict[str, Any]:
        with self._lock:
            touched = []
            for name in fields:
                if name in self._fields:
                    self._fields[name] = replace(self._fields[name], status=FieldStatus.INVALID)
                    touched.append(name)
            self._failures.append(f"{node_id}: {reason}")
            return self._append(
                {"kind": "invalidate", "node_id": node_id, "fields": touched, "reason": reason}
            )

    def resolve_failures(self) -> None:
        with self._lock:
            self._failures.clear()

    def set_active(self, run_id: str | None, node_id: str | None = None) -> None:
        with self._lock:
            self._context.active_run_id = run_id
            self._context.active_node = node_id

    def add_data_ref(self, ref_id: str, kind: str, location: str) -> DataRef:
        ref = DataRef(id=ref_id, kind=kind, location=location, created_at=time.time())
        with self._lock:
            self._context.data_refs.append(ref)
        return ref

    # -- internals ----------------------------------------------------------

    def _confirmed_value(self, name: str) -> Any | None:
        fs = self._fields[name]
        return fs.value if fs.status is FieldStatus.CONFIRMED else None

    def _reconcile(self, updated: set[str]) -> tuple[dict[str, Any], list[str]]:
        """Keep center/span and start/stop mutually consistent.

        Derivations only ever use Confirmed partners. A lone start or stop
        commit that crosses its confirmed partner means the instrument
        dragged that partner; its stored value is now wrong, so it goes
        Invalid rather than silently stale.
        """
        derived: dict[str, Any] = {}
        invalidated: dict[str, str] = {}

        def put(name: str, value: Any) -> None:
            self._fields[name] = FieldState(value, FieldStatus.CONFIRMED)
            derived[name] = value

        def drop(name: str, status: FieldStatus) -> None:
            self._fields[name] = replace(self._fields[name], status=status)
            invalidated[name] = status.value

        start = self._confirmed_value("start_frequency_hz")
        stop = self._confirmed_value("stop_frequency_hz")
        center = self._confirmed_value("center_frequency_hz")
        span = self._confirmed_value("span_hz")

        if updated & {"start_frequency_hz", "stop_frequency_hz"}:
            if "start_frequency_hz" in updated and "stop_frequency_hz" not in updated:
                if stop is not None and start is not None and start > stop + _FREQ_TOL_HZ:
                    drop("stop_frequency_hz", FieldStatus.INVALID)
                    stop = None
            if "stop_frequency_hz" in updated and "start_frequency_hz" not in updated:
                if start is not None and stop is not None and stop < start - _FREQ_TOL_HZ:
                    drop("start_frequency_hz", FieldStatus.INVALID)
                    start = None
            if start is not None and stop is not None:
                put("center_frequency_hz", (start + stop) / 2.0)
                put("span_hz", stop - start)
            else:
                for name in ("center_frequency_hz", "span_hz"):
                    if self._fields[name].status is FieldStatus.CONFIRMED:
                        drop(name, FieldStatus.UNKNOWN)
        elif updated & {"center_frequency_hz", "span_hz"}:
            if center is not None and span is not None:
                put("start_frequency_hz", center - span / 2.0)
                put("stop_frequency_hz", center + span / 2.0)
            else:
                for name in ("start_frequency_hz", "stop_frequency_hz"):
                    if self._fields[name].status is FieldStatus.CONFIRMED:
                        drop(name, FieldStatus.UNKNOWN)
        return derived, invalidated

    def _append(self, body: dict[str, Any]) -> dict[str, Any]:
        self._seq += 1
        entry = {"seq": self._seq, "timestamp": time.time(), **body}
        self.journal.append(entry)
        for sink in self._sinks:
            sink(entry)
        return entry

    # -- replay ----------------------------------------------------------------

    @classmethod
    def replay(cls, entries: Iterable[dict[str, Any]]) -> "StateManager":
        """Rebuild field state from a journal; field values and statuses match
        the manager that wrote it."""
        manager = cls()
        for entry in entries:
            if entry["kind"] == "commit":
                with manager._lock:
                    for name, value in entry["values"].items():
                        manager._fields[name] = FieldState(value, FieldStatus.CONFIRMED)
                    for name, value in entry.get("derived", {}).items():
                        manager._fields[name] = FieldState(value, FieldStatus.CONFIRMED)
                    for name, status in entry.get("invalidated", {}).items():
                        manager._fields[name] = replace(
                            manager._fields[name], status=FieldStatus(status)
                        )
                    manager._seq = entry["seq"]
            elif entry["kind"] == "invalidate":
                with manager._lock:
                    for name in entry["fields"]:
                        manager._fields[name] = replace(
                            manager._fields[name], status=FieldStatus.INVALID
                        )
                    manager._failures.append(f"{entry['node_id']}: {entry['reason']}")
                    manager._seq = entry["seq"]
        return manager
