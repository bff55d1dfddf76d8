"""Built-in tool implementations.

Tools exchange plain JSON-able values (lists and scalars) so every node
boundary stays journalable. Complex traces are rebuilt from the interleaved
wire format on the way in.
"""

from __future__ import annotations

from typing import Any

from ..rftools import (
    FrequencyAxis,
    NoPathFoundError,
    detect_minimum,
    detect_peak,
    magnitude_range,
    sic_multipath,
    trace_from_interleaved,
)
from ..rftools.multipath import DEFAULT_MAX_PATHS, DEFAULT_STOP_RESIDUAL_DB


class ToolError(RuntimeError):
    """A tool could not produce its contracted output."""


def _trace(inputs: dict[str, Any]):
    try:
        axis = FrequencyAxis.from_grid(inputs["frequency_axis_hz"])
        return trace_from_interleaved(axis, inputs["trace_data"])
    except (KeyError, ValueError) as err:
        raise ToolError(f"bad trace inputs: {err}") from err


def _ghz(f_hz: float) -> str:
    return f"{f_hz / 1e9:.6f} GHz"


def magnitude_range_tool(inputs: dict[str, Any]) -> dict[str, Any]:
    r = magnitude_range(_trace(inputs))
    return {
        "min_db": r.min_db,
        "max_db": r.max_db,
        "f_at_min_hz": r.f_at_min_hz,
        "f_at_max_hz": r.f_at_max_hz,
        "text": (
            f"magnitude ranges from {r.min_db:.2f} dB at {_ghz(r.f_at_min_hz)} "
            f"to {r.max_db:.2f} dB at {_ghz(r.f_at_max_hz)}"
        ),
    }


def detect_peak_tool(inputs: dict[str, Any]) -> dict[str, Any]:
    r = detect_peak(_trace(inputs))
    return {
        "f_peak_hz": r.f_peak_hz,
        "peak_db": r.peak_db,
        "prominence_db": r.prominence_db,
        "text": (
            f"dominant peak of {r.peak_db:.2f} dB at {_ghz(r.f_peak_hz)} "
            f"({r.prominence_db:.1f} dB above the trace median)"
        ),
    }


def detect_minimum_tool(inputs: dict[str, Any]) -> dict[str, Any]:
    r = detect_minimum(_trace(inputs))
    return {
        "f_min_hz": r.f_min_hz,
        "min_db": r.min_db,
        "text": f"minimum magnitude of {r.min_db:.2f} dB at {_ghz(r.f_min_hz)}",
    }


def multipath_estimator_tool(inputs: dict[str, Any]) -> dict[str, Any]:
    trace = _trace(inputs)
    try:
        est = sic_multipath(
            trace,
            max_paths=int(inputs.get("max_paths") or DEFAULT_MAX_PATHS),
            stop_residual_db=float(inputs.get("stop_residual_db") or DEFAULT_STOP_RESIDUAL_DB),
        )
    except NoPathFoundError as err:
        raise ToolError(str(err)) from err
    delays = ", ".join(f"{p.rel_delay_ns:.3f}" for p in est.paths)
    powers = ", ".join(f"{p.rel_power_db:.2f}" for p in est.paths)
    verdict = "reliable" if est.reliable else "not reliable"
    return {
        "fixed_delay_ns": est.fixed_delay_ns,
        "paths": [
            {"rel_delay_ns": p.rel_delay_ns, "rel_power_db": p.rel_power_db} for p in est.paths
        ],
        "path_count": len(est.paths),
        "residual_db": est.residual_db,
        "explained_energy_ratio": est.explained_energy_ratio,
        "reliable": est.reliable,
        "text": (
            f"{len(est.paths)} paths; fixed delay {est.fixed_delay_ns:.3f} ns; "
            f"relative delays {delays} ns; relative powers {powers} dB; "
            f"fitting residual {est.residual_db:.2f} dB "
            f"(explained energy {est.explained_energy_ratio:.3f}, {verdict})"
        ),
    }


def store_segments_fallback(inputs: dict[str, Any]) -> dict[str, Any]:
    """In-memory stand-in; the gateway rebinds this tool to its run store."""
    records = inputs.get("records") or []
    if not records:
        raise ToolError("no segment records to store")
    ids = []
    for k, record in enumerate(records):
        if "trace_data" not in record or "frequency_axis_hz" not in record:
            raise ToolError(f"segment record {k} is missing trace data")
        ids.append(f"segment-{k}")
    if len(set(ids)) != len(ids):
        raise ToolError("duplicate segment record ids")
    return {"record_ids": ids, "count": len(ids), "locations": []}


def segment_report_tool(inputs: dict[str, Any]) -> dict[str, Any]:
    records = inputs.get("records") or []
    if not records:
        raise ToolError("no segment records to report on")
    lines = []
    summaries = []
    for k, record in enumerate(records):
        r = magnitude_range(_trace(record))
        summaries.append(
            {
                "segment_index": k,
                "start_hz": record.get("start_hz"),
                "stop_hz": record.get("stop_hz"),
                "sweep_points": record.get("sweep_points"),
                "min_db": r.min_db,
                "max_db": r.max_db,
            }
        )
        lines.append(
            f"segment {k + 1}: {record.get('start_hz', 0) / 1e9:.3f}-"
            f"{record.get('stop_hz', 0) / 1e9:.3f} GHz, {record.get('sweep_points')} points, "
            f"magnitude {r.min_db:.2f} to {r.max_db:.2f} dB"
        )
    return {"segments": summaries, "text": "\n".join(lines)}


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def compose_report_tool(inputs: dict[str, Any]) -> dict[str, Any]:
    if inputs.get("text"):
        return {"text": str(inputs["text"])}
    label = inputs.get("label")
    if label is not None and "value" in inputs:
        unit = inputs.get("unit") or ""
        rendered = _format_value(inputs["value"])
        return {"text": f"{label}: {rendered} {unit}".rstrip()}
    if not inputs:
        raise ToolError("nothing to report")
    lines = [f"{key} = {_format_value(inputs[key])}" for key in sorted(inputs)]
    return {"text": "\n".join(lines)}


def bind_builtin_tools(base) -> None:
    for name, impl in (
        ("magnitude_range", magnitude_range_tool),
        ("detect_peak", detect_peak_tool),
        ("detect_minimum", detect_minimum_tool),
        ("multipath_estimator", multipath_estimator_tool),
        ("store_segment_records", store_segments_fallback),
        ("segment_report", segment_report_tool),
        ("compose_report", compose_report_tool),
    ):
        if name in base.tools:
            base.register_tool_impl(name, impl)
