"""Deterministic result summaries.

The closing response to the operator is composed from committed state and
tool outputs, never from model text, so the record stays reproducible. A
remote-LLM rephraser can be layered on by the gateway; when it fails, these
strings are what the operator sees.
"""

from __future__ import annotations

import json
from typing import Any

from ..contracts import TaskClass, TaskContract
from ..knowledge.registry import builtin_assets_dir
from ..planner import ExecutableTaskGraph, Route
from ..runtime import ExecutionResult
from ..state import StateSnapshot

_FIELD_LABEL = {
    "center_frequency_hz": "Center frequency",
    "span_hz": "Span",
    "start_frequency_hz": "Start frequency",
    "stop_frequency_hz": "Stop frequency",
    "sweep_points": "Sweep points",
    "if_bandwidth_hz": "IF bandwidth",
    "output_power_dbm": "Output power",
    "requested_action": "Requested action",
}


def format_hz(value: float) -> str:
    value = float(value)
    for scale, unit in ((1e9, "GHz"), (1e6, "MHz"), (1e3, "kHz")):
        if abs(value) >= scale:
            return f"{value / scale:g} {unit}"
    return f"{value:g} Hz"


def _format_field(field_name: str, value: Any) -> str:
    if field_name.endswith("_hz"):
        return format_hz(value)
    if field_name == "output_power_dbm":
        return f"{float(value):g} dBm"
    return f"{value}"


def load_profile() -> dict[str, Any]:
    return json.loads((builtin_assets_dir() / "instrument_profile.json").read_text())


def conversational_answer(snapshot: StateSnapshot) -> str:
    profile = load_profile()
    lo, hi = profile["frequency_range_hz"]
    parts = [
        f"This console operates a {profile['model']} {profile['kind']} over SCPI, "
        f"covering {format_hz(lo)} to {format_hz(hi)}.",
        "You can ask it to configure sweeps, query instrument state, run "
        "S-parameter measurements, analyze traces, or search for resonances.",
    ]
    confirmed = {
        name: fs.value
        for name, fs in snapshot.fields.items()
        if fs.status.value == "confirmed" and name in _FIELD_LABEL
    }
    if confirmed:
        rendered = ", ".join(
            f"{_FIELD_LABEL[k].lower()} {_format_field(k, v)}" for k, v in sorted(confirmed.items())
        )
        parts.append(f"Confirmed settings this session: {rendered}.")
    return " ".join(parts)


def blocked_summary(graph: ExecutableTaskGraph) -> str:
    assert graph.veto is not None
    v = graph.veto
    return f"Blocked by rule {v.rule_name!r} at step {v.node_id!r}: {v.reason}."


def failure_summary(result: ExecutionResult) -> str:
    assert result.failure is not None
    f = result.failure
    return (
        f"Run stopped at step {f.node_id!r} with outcome {f.outcome.value}: {f.detail}. "
        f"Recommended recovery: {f.recommended_recovery.value.replace('_', ' ')}."
    )


def _clamp_notes(graph: ExecutableTaskGraph) -> list[str]:
    notes = []
    for a in graph.safety_annotations:
        if a.get("kind") == "clamp":
            notes.append(
                f"Requested {_FIELD_LABEL.get(a['field'], a['field'])} "
                f"{_format_field(a['field'], a['requested'])} exceeded policy; "
                f"applied {_format_field(a['field'], a['applied'])} instead."
            )
    return notes


def _direct_skill_summary(graph: ExecutableTaskGraph, result: ExecutionResult) -> str:
    for node in reversed(graph.nodes):
        if node.resource == "connect_instrument":
            continue
        for name, doc in node.bind.items():
            if doc.get("source") == "const" and name in _FIELD_LABEL:
                committed = result.outputs.get(node.id, {}).get(name, doc["value"])
                return (
                    f"{_FIELD_LABEL[name]} set to {_format_field(name, committed)} "
                    "and confirmed by readback."
                )
        return f"Completed {node.resource.replace('_', ' ')}."
    return "Completed."


def _acquisition_summary(contract: TaskContract, result: ExecutionResult) -> str:
    p = contract.parameters
    sp = p.s_parameter or "S11"
    points = None
    for outputs in result.outputs.values():
        if "trace_data" in outputs:
            points = len(outputs["trace_data"]) // 2
    window = ""
    if p.start_frequency_hz is not None and p.stop_frequency_hz is not None:
        window = f" from {format_hz(p.start_frequency_hz)} to {format_hz(p.stop_frequency_hz)}"
    suffix = f" ({points} points)" if points else ""
    return f"Acquired {sp}{window}{suffix}."


def _hybrid_summary(result: ExecutionResult, snapshot: StateSnapshot) -> str:
    detect = result.outputs.get("detect", {})
    f_min = detect.get("f_min_hz")
    min_db = detect.get("min_db")
    span = snapshot.value_of("span_hz")
    if f_min is None:
        return "Refinement loop completed."
    parts = [
        f"Resonance located at {float(f_min) / 1e9:.6f} GHz "
        f"(return loss {float(min_db):.2f} dB)"
    ]
    parts.append(f"after {result.iterations} refinement iterations")
    if span is not None:
        parts.append(f"with a final span of {format_hz(span)}")
    return " ".join(parts) + "."


def _last_text(result: ExecutionResult) -> str | None:
    for node_id in reversed(result.node_sequence):
        outputs = result.outputs.get(node_id, {})
        text = outputs.get("text")
        if text:
            return str(text)
    return None


def summarize(
    contract: TaskContract,
    graph: ExecutableTaskGraph,
    result: ExecutionResult | None,
    snapshot: StateSnapshot,
) -> str:
    if graph.veto is not None:
        return blocked_summary(graph)
    if graph.route is Route.RESPONSE_ONLY:
        return conversational_answer(snapshot)
    assert result is not None
    if result.failure is not None:
        return failure_summary(result)

    notes = _clamp_notes(graph)
    if graph.route is Route.DIRECT_SKILL and contract.task_class is TaskClass.CONFIGURATION:
        body = _direct_skill_summary(graph, result)
    elif graph.route is Route.HYBRID_EXECUTION_GRAPH:
        body = _hybrid_summary(result, snapshot)
    else:
        body = _last_text(result)
        if body is None:
            if contract.task_class is TaskClass.ACQUISITION:
                body = _acquisition_summary(contract, result)
            else:
                body = "Task completed."
        elif contract.task_class is TaskClass.ACQUISITION and "segment" not in body:
            # analyses attached to an acquisition lead with what was measured
            body = f"{_acquisition_summary(contract, result)} {body}"
    stored = result.outputs.get("store")
    if stored and "count" in stored:
        notes.append(f"Stored {stored['count']} trace record(s).")
    return " ".join([*notes, body]) if notes else body
