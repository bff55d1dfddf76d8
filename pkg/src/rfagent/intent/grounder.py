"""Deterministic utterance grounder.

Maps operator phrasing onto task contracts with regular expressions. This is
the no-model reference path: the benchmark runs on it, and the remote LLM
provider must produce contracts that validate identically. Unknown phrasing
raises instead of guessing.
"""

from __future__ import annotations

import re
from typing import Any

from ..contracts import TaskContract, validate_contract

_NUM = r"(-?\d+(?:\.\d+)?)"
_FUNIT = r"(ghz|mhz|khz|hz)"
_MULT = {"ghz": 1e9, "mhz": 1e6, "khz": 1e3, "hz": 1.0}


class GroundingError(ValueError):
    """The utterance matched no known task family."""


def _hz(num: str, unit: str) -> float:
    return float(num) * _MULT[unit.lower()]


_SET_VERB = r"(?:set|change|tune|adjust|move)"
_THE = r"(?:the\s+)?"

_SET_PATTERNS: dict[str, re.Pattern[str]] = {
    "center_frequency_hz": re.compile(
        rf"{_SET_VERB}\s+{_THE}cent(?:er|re)\s+frequency\s+to\s+{_NUM}\s*{_FUNIT}"
    ),
    "span_hz": re.compile(rf"{_SET_VERB}\s+{_THE}span(?:\s+bandwidth)?\s+to\s+{_NUM}\s*{_FUNIT}"),
    "start_frequency_hz": re.compile(
        rf"{_SET_VERB}\s+{_THE}start\s+frequency\s+to\s+{_NUM}\s*{_FUNIT}"
    ),
    "stop_frequency_hz": re.compile(
        rf"{_SET_VERB}\s+{_THE}stop\s+frequency\s+to\s+{_NUM}\s*{_FUNIT}"
    ),
    "if_bandwidth_hz": re.compile(rf"{_SET_VERB}\s+{_THE}if\s+bandwidth\s+to\s+{_NUM}\s*{_FUNIT}"),
}
_SET_POINTS = re.compile(rf"{_SET_VERB}\s+{_THE}(?:number\s+of\s+)?sweep\s+points\s+to\s+(\d+)")
_SET_POWER = re.compile(rf"{_SET_VERB}\s+{_THE}output\s+power\s+to\s+{_NUM}\s*dbm")

_QUERY = re.compile(
    r"(?:query|what\s+is|what's|show|report|read\s+back)\s+(?:me\s+)?(?:the\s+)?(?:current\s+)?"
    r"([a-z ]+?)\s*[.?!]?$"
)
_QUERY_TARGETS = {
    "center frequency": "center_frequency_hz",
    "span": "span_hz",
    "span bandwidth": "span_hz",
    "start frequency": "start_frequency_hz",
    "stop frequency": "stop_frequency_hz",
    "number of sweep points": "sweep_points",
    "sweep points": "sweep_points",
    "if bandwidth": "if_bandwidth_hz",
    "output power": "output_power_dbm",
}

_MEASURE = re.compile(
    rf"(?:measure|sweep)\s+(s(?:11|21|12|22))\s+from\s+{_NUM}\s*{_FUNIT}?\s*(?:to|-|–|—)\s*"
    rf"{_NUM}\s*{_FUNIT}"
)
_SEGMENTED_SPARAM = re.compile(r"segmented\s+(s(?:11|21|12|22))\s+measurements")
_SEGMENT = re.compile(
    rf"(\d+)\s+points?\s+over\s+{_NUM}\s*{_FUNIT}?\s*(?:to|-|–|—|through)\s*{_NUM}\s*{_FUNIT}"
)
_CENTER_OF = re.compile(rf"cent(?:er|re)\s+frequency\s+of\s+{_NUM}\s*{_FUNIT}")
_BANDWIDTH_OF = re.compile(rf"(?<!if\s)bandwidth\s+of\s+{_NUM}\s*{_FUNIT}")
_RANGE_OVER = re.compile(rf"over\s+{_NUM}\s*{_FUNIT}?\s*(?:to|-|–|—)\s*{_NUM}\s*{_FUNIT}")
_PORT_PAIR = re.compile(r"between\s+ports?\s+(\d)\s+and\s+(\d)")
_SINGLE_PORT = re.compile(r"(?:to|on|at)\s+port\s+(\d)")

_ANALYSIS_SUFFIXES = (
    ("magnitude_range", ("magnitude range",)),
    ("peak", ("dominant peak", "report the peak", "largest peak")),
    ("minimum", ("minimum magnitude", "report the minimum", "deepest dip")),
)

_CONVERSATIONAL = re.compile(
    r"^(?:hi|hello|hey|good\s+(?:morning|afternoon|evening)|thanks|thank\s+you)\b"
    r"|what\s+can\s+you\s+do|which\s+instrument|what\s+instrument|who\s+are\s+you"
    r"|are\s+you\s+there|^help\b"
)


def _pair_to_hz(n1: str, u1: str | None, n2: str, u2: str) -> tuple[float, float]:
    # "1-3 GHz" style ranges leave the first unit implicit
    return _hz(n1, u1 or u2), _hz(n2, u2)


def ground(utterance: str) -> TaskContract:
    """Ground one utterance; raises GroundingError when nothing matches."""
    text = " ".join(utterance.lower().split())
    params: dict[str, Any] = {}

    doc: dict[str, Any] = {
        "task_class": None,
        "utterance": utterance,
        "parameters": params,
        "safety_flags": [],
        "missing_fields": [],
    }

    # destructive maintenance requests first: they must never fall through
    # to a configuration parse
    if "calibration" in text and re.search(r"\b(delete|remove|erase|clear)\b", text):
        doc["task_class"] = "configuration"
        params["requested_action"] = "delete_calibration"
        return _finish(doc)

    if "resonance" in text and re.search(r"\b(refine|adaptive\w*|search|find|determine)\b", text):
        doc["task_class"] = "feedback_control"
        m = _RANGE_OVER.search(text)
        if m:
            lo, hi = _pair_to_hz(*m.groups())
            params["center_frequency_hz"] = (lo + hi) / 2.0
            params["span_hz"] = hi - lo
        m = _SINGLE_PORT.search(text)
        if m:
            params["ports"] = [int(m.group(1))]
        return _finish(doc)

    if "channel response" in text or ("channel" in text and "multipath" in text):
        doc["task_class"] = "analysis"
        params["analysis_kind"] = "multipath"
        m = _CENTER_OF.search(text)
        if m:
            params["center_frequency_hz"] = _hz(*m.groups())
        m = _BANDWIDTH_OF.search(text)
        if m:
            params["span_hz"] = _hz(*m.groups())
        m = re.search(rf"(\d+)\s+sweep\s+points", text)
        if m:
            params["sweep_points"] = int(m.group(1))
        m = _PORT_PAIR.search(text)
        if m:
            a, b = int(m.group(1)), int(m.group(2))
            params["ports"] = sorted({a, b})
            params["s_parameter"] = f"S{b}{a}"
        else:
            params["s_parameter"] = "S21"
        return _finish(doc)

    measured = _MEASURE.search(text)
    segment_sparam = _SEGMENTED_SPARAM.search(text)
    segments = _SEGMENT.findall(text) if segment_sparam or "segment" in text else []

    if measured:
        params["s_parameter"] = measured.group(1).upper()
        start, stop = _pair_to_hz(*measured.groups()[1:])
        params["start_frequency_hz"] = start
        params["stop_frequency_hz"] = stop
    elif segment_sparam and segments:
        params["s_parameter"] = segment_sparam.group(1).upper()
        specs = []
        for points, n1, u1, n2, u2 in segments:
            start, stop = _pair_to_hz(n1, u1 or None, n2, u2)
            specs.append({"start_hz": start, "stop_hz": stop, "sweep_points": int(points)})
        params["segments"] = specs

    if "s_parameter" in params:
        kind = next(
            (k for k, needles in _ANALYSIS_SUFFIXES if any(n in text for n in needles)), None
        )
        if kind:
            doc["task_class"] = "analysis"
            params["analysis_kind"] = kind
        else:
            doc["task_class"] = "acquisition"
        if _SET_POWER.search(text):
            params["output_power_dbm"] = float(_SET_POWER.search(text).group(1))
        if "store" in text and "database" in text:
            params["output_format"] = "database_record"
        return _finish(doc)

    for field, pattern in _SET_PATTERNS.items():
        m = pattern.search(text)
        if m:
            params[field] = _hz(*m.groups())
    m = _SET_POINTS.search(text)
    if m:
        params["sweep_points"] = int(m.group(1))
    m = _SET_POWER.search(text)
    if m:
        params["output_power_dbm"] = float(m.group(1))
    if params:
        doc["task_class"] = "configuration"
        return _finish(doc)

    m = _QUERY.search(text)
    if m:
        target = _QUERY_TARGETS.get(m.group(1).strip())
        if target:
            doc["task_class"] = "state_query"
            params["query_target"] = target
            return _finish(doc)

    if _CONVERSATIONAL.search(text):
        doc["task_class"] = "conversational"
        return _finish(doc)

    raise GroundingError(f"no task family matches: {utterance!r}")


def _finish(doc: dict[str, Any]) -> TaskContract:
    return validate_contract(doc)
