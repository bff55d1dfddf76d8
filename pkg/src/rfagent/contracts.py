"""Task contracts: the typed boundary between language and instrument work.

A contract states what the operator asked for in canonical fields. It never
carries instrument syntax; the validator explicitly rejects any string value
that parses as a command of the instrument grammar, so nothing downstream
has to trust the language side.

Wire format is UTF-8 JSON with snake_case keys. validate_contract is the
single entry point: it either returns a normalized TaskContract or raises
ContractValidationError with one entry per violation.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

from .scpi.grammar import is_scpi_text


class TaskClass(str, Enum):
    CONVERSATIONAL = "conversational"
    STATE_QUERY = "state_query"
    CONFIGURATION = "configuration"
    ACQUISITION = "acquisition"
    ANALYSIS = "analysis"
    FEEDBACK_CONTROL = "feedback_control"


class ExpectedOutput(str, Enum):
    NATURAL_LANGUAGE_RESPONSE = "natural_language_response"
    CURRENT_STATE_REPORT = "current_state_report"
    VERIFIED_STATE_UPDATE = "verified_state_update"
    MEASUREMENT_DATA = "measurement_data"
    ANALYSIS_REPORT = "analysis_report"
    REFINED_RESULT = "refined_result"


DEFAULT_OUTPUT: dict[TaskClass, ExpectedOutput] = {
    TaskClass.CONVERSATIONAL: ExpectedOutput.NATURAL_LANGUAGE_RESPONSE,
    TaskClass.STATE_QUERY: ExpectedOutput.CURRENT_STATE_REPORT,
    TaskClass.CONFIGURATION: ExpectedOutput.VERIFIED_STATE_UPDATE,
    TaskClass.ACQUISITION: ExpectedOutput.MEASUREMENT_DATA,
    TaskClass.ANALYSIS: ExpectedOutput.ANALYSIS_REPORT,
    TaskClass.FEEDBACK_CONTROL: ExpectedOutput.REFINED_RESULT,
}


class SParameter(str, Enum):
    S11 = "S11"
    S21 = "S21"
    S12 = "S12"
    S22 = "S22"


class OutputFormat(str, Enum):
    TEXT_SUMMARY = "text_summary"
    TRACE_FILE = "trace_file"
    DATABASE_RECORD = "database_record"


class AnalysisKind(str, Enum):
    MAGNITUDE_RANGE = "magnitude_range"
    PEAK = "peak"
    MINIMUM = "minimum"
    MULTIPATH = "multipath"


class RequestedAction(str, Enum):
    DELETE_CALIBRATION = "delete_calibration"


class QueryTarget(str, Enum):
    CENTER_FREQUENCY_HZ = "center_frequency_hz"
    SPAN_HZ = "span_hz"
    START_FREQUENCY_HZ = "start_frequency_hz"
    STOP_FREQUENCY_HZ = "stop_frequency_hz"
    SWEEP_POINTS = "sweep_points"
    IF_BANDWIDTH_HZ = "if_bandwidth_hz"
    OUTPUT_POWER_DBM = "output_power_dbm"


class SafetyFlagKind(str, Enum):
    POWER_LIMIT_CHECK = "power_limit_check"
    RF_OUTPUT_CHECK = "rf_output_check"
    CALIBRATION_PROTECTION = "calibration_protection"
    FILE_OVERWRITE_PROTECTION = "file_overwrite_protection"
    WIDEBAND_SWEEP_CHECK = "wideband_sweep_check"


class Provenance(str, Enum):
    DETERMINISTIC_GROUNDER = "deterministic_grounder"
    LLM_PROVIDER = "llm_provider"


@dataclass(frozen=True)
class SegmentSpec:
    start_hz: float
    stop_hz: float
    sweep_points: int


@dataclass
class CanonicalParameters:
    center_frequency_hz: float | None = None
    span_hz: float | None = None
    start_frequency_hz: float | None = None
    stop_frequency_hz: float | None = None
    sweep_points: int | None = None
    if_bandwidth_hz: float | None = None
    output_power_dbm: float | None = None
    s_parameter: SParameter | None = None
    ports: list[int] | None = None
    output_format: OutputFormat | None = None
    segments: list[SegmentSpec] | None = None
    analysis_kind: AnalysisKind | None = None
    query_target: QueryTarget | None = None
    requested_action: RequestedAction | None = None

    def populated(self) -> list[str]:
        return [k for k, v in asdict(self).items() if v is not None]


@dataclass(frozen=True)
class SafetyFlag:
    kind: SafetyFlagKind
    detail: str = ""


@dataclass
class TaskContract:
    task_class: TaskClass
    utterance: str = ""
    parameters: CanonicalParameters = field(default_factory=CanonicalParameters)
    safety_flags: list[SafetyFlag] = field(default_factory=list)
    missing_fields: list[str] = field(default_factory=list)
    expected_output: ExpectedOutput | None = None
    provenance: Provenance = Provenance.DETERMINISTIC_GROUNDER

    def to_dict(self) -> dict[str, Any]:
        params: dict[str, Any] = {}
        for key, value in asdict(self.parameters).items():
            if value is None:
                continue
            params[key] = value
        return {
            "task_class": self.task_class.value,
            "utterance": self.utterance,
            "parameters": params,
            "safety_flags": [{"kind": f.kind.value, "detail": f.detail} for f in self.safety_flags],
            "missing_fields": list(self.missing_fields),
            "expected_output": self.expected_output.value if self.expected_output else None,
            "provenance": self.provenance.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class SchemaError:
    kind: str
    path: str
    detail: str


class ContractValidationError(ValueError):
    def __init__(self, errors: list[SchemaError]):
        self.errors = sorted(errors, key=lambda e: (e.path, e.kind, e.detail))
        lines = "; ".join(f"{e.path}: {e.kind} ({e.detail})" for e in self.errors)
        super().__init__(lines or "invalid contract")


_TOP_KEYS = {
    "task_class",
    "utterance",
    "parameters",
    "safety_flags",
    "missing_fields",
    "expected_output",
    "provenance",
}

_SETTABLE_FIELDS = (
    "center_frequency_hz",
    "span_hz",
    "start_frequency_hz",
    "stop_frequency_hz",
    "sweep_points",
    "if_bandwidth_hz",
    "output_power_dbm",
)

_FREQ_FIELDS = {
    "center_frequency_hz",
    "span_hz",
    "start_frequency_hz",
    "stop_frequency_hz",
    "if_bandwidth_hz",
}


def _scan_for_scpi(value: Any, path: str, errors: list[SchemaError]) -> None:
    if isinstance(value, str):
        if is_scpi_text(value):
            errors.append(SchemaError("scpi_contamination", path, f"instrument syntax in value: {value!r}"))
    elif isinstance(value, dict):
        for k, v in value.items():
            _scan_for_scpi(v, f"{path}.{k}", errors)
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _scan_for_scpi(v, f"{path}[{i}]", errors)


def _parse_enum(enum_cls, raw: Any, path: str, errors: list[SchemaError]):
    if not isinstance(raw, str):
        errors.append(SchemaError("type_mismatch", path, f"expected string, got {type(raw).__name__}"))
        return None
    for member in enum_cls:
        if member.value.lower() == raw.lower():
            return member
    allowed = ", ".join(m.value for m in enum_cls)
    errors.append(SchemaError("invalid_enum", path, f"{raw!r} not one of: {allowed}"))
    return None


def _as_float(raw: Any, path: str, errors: list[SchemaError]) -> float | None:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        errors.append(SchemaError("type_mismatch", path, f"expected number, got {type(raw).__name__}"))
        return None
    return float(raw)


def _as_int(raw: Any, path: str, errors: list[SchemaError]) -> int | None:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)) or raw != int(raw):
        errors.append(SchemaError("type_mismatch", path, f"expected integer, got {raw!r}"))
        return None
    return int(raw)


def _parse_segments(raw: Any, errors: list[SchemaError]) -> list[SegmentSpec] | None:
    if not isinstance(raw, list) or not raw:
        errors.append(SchemaError("type_mismatch", "parameters.segments", "expected non-empty list"))
        return None
    before = len(errors)
    out: list[SegmentSpec] = []
    for i, item in enumerate(raw):
        path = f"parameters.segments[{i}]"
        if not isinstance(item, dict):
            errors.append(SchemaError("type_mismatch", path, "expected object"))
            continue
        for key in sorted(set(item) - {"start_hz", "stop_hz", "sweep_points"}):
            errors.append(SchemaError("unknown_key", f"{path}.{key}", "not a segment field"))
        start = _as_float(item.get("start_hz"), f"{path}.start_hz", errors)
        stop = _as_float(item.get("stop_hz"), f"{path}.stop_hz", errors)
        points = _as_int(item.get("sweep_points"), f"{path}.sweep_points", errors)
        if start is None or stop is None or points is None:
            continue
        if stop <= start:
            errors.append(SchemaError("constraint_violation", path, "stop_hz must exceed start_hz"))
        elif points < 2:
            errors.append(SchemaError("constraint_violation", f"{path}.sweep_points", "needs at least 2 points"))
        else:
            out.append(SegmentSpec(start_hz=start, stop_hz=stop, sweep_points=points))
    return out if out and len(errors) == before else None


def _parse_parameters(raw: Any, errors: list[SchemaError]) -> CanonicalParameters:
    params = CanonicalParameters()
    if raw is None:
        return params
    if not isinstance(raw, dict):
        errors.append(SchemaError("type_mismatch", "parameters", "expected object"))
        return params
    known = set(CanonicalParameters.__dataclass_fields__)
    for key in sorted(set(raw) - known):
        errors.append(SchemaError("unknown_key", f"parameters.{key}", "not a canonical parameter"))
    for key in _FREQ_FIELDS:
        if key in raw:
            value = _as_float(raw[key], f"parameters.{key}", errors)
            if value is not None and value <= 0:
                errors.append(SchemaError("constraint_violation", f"parameters.{key}", "must be positive"))
            else:
                setattr(params, key, value)
    if "output_power_dbm" in raw:
        params.output_power_dbm = _as_float(raw["output_power_dbm"], "parameters.output_power_dbm", errors)
    if "sweep_points" in raw:
        points = _as_int(raw["sweep_points"], "parameters.sweep_points", errors)
        if points is not None and points < 2:
            errors.append(SchemaError("constraint_violation", "parameters.sweep_points", "needs at least 2 points"))
        else:
            params.sweep_points = points
    if "s_parameter" in raw:
        params.s_parameter = _parse_enum(SParameter, raw["s_parameter"], "parameters.s_parameter", errors)
    if "output_format" in raw:
        params.output_format = _parse_enum(OutputFormat, raw["output_format"], "parameters.output_format", errors)
    if "analysis_kind" in raw:
        params.analysis_kind = _parse_enum(AnalysisKind, raw["analysis_kind"], "parameters.analysis_kind", errors)
    if "query_target" in raw:
        params.query_target = _parse_enum(QueryTarget, raw["query_target"], "parameters.query_target", errors)
    if "requested_action" in raw:
        params.requested_action = _parse_enum(
            RequestedAction, raw["requested_action"], "parameters.requested_action", errors
        )
    if "ports" in raw:
        ports = raw["ports"]
        if not isinstance(ports, list) or not all(isinstance(p, int) and not isinstance(p, bool) for p in ports):
            errors.append(SchemaError("type_mismatch", "parameters.ports", "expected list of integers"))
        elif not all(p in (1, 2) for p in ports):
            errors.append(SchemaError("constraint_violation", "parameters.ports", "instrument has ports 1 and 2"))
        else:
            params.ports = list(ports)
    if "segments" in raw:
        params.segments = _parse_segments(raw["segments"], errors)
    return params


def _required_slots(task_class: TaskClass, params: CanonicalParameters) -> list[str]:
    """Slot names still unbound for the class; used to fill missing_fields."""
    populated = set(params.populated())
    if task_class is TaskClass.CONFIGURATION:
        if populated & ({*_SETTABLE_FIELDS} | {"requested_action"}):
            return []
        return [*_SETTABLE_FIELDS]
    if task_class is TaskClass.STATE_QUERY:
        return [] if "query_target" in populated else ["query_target"]
    if task_class in (TaskClass.ACQUISITION, TaskClass.ANALYSIS):
        missing = []
        if "s_parameter" not in populated:
            missing.append("s_parameter")
        has_range = (
            {"start_frequency_hz", "stop_frequency_hz"} <= populated
            or {"center_frequency_hz", "span_hz"} <= populated
            or "segments" in populated
        )
        if not has_range:
            missing.extend(["start_frequency_hz", "stop_frequency_hz"])
        if task_class is TaskClass.ANALYSIS and "analysis_kind" not in populated:
            missing.append("analysis_kind")
        return missing
    return []


def validate_contract(document: dict[str, Any] | str) -> TaskContract:
    """Normalize and check one contract document; all violations are collected."""
    errors: list[SchemaError] = []
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as err:
            raise ContractValidationError(
                [SchemaError("malformed_json", "$", str(err))]
            ) from err
    if not isinstance(document, dict):
        raise ContractValidationError([SchemaError("type_mismatch", "$", "expected JSON object")])

    for key, value in document.items():
        if key != "utterance":  # free text from the operator is allowed to mention anything
            _scan_for_scpi(value, key, errors)

    for key in sorted(set(document) - _TOP_KEYS):
        errors.append(SchemaError("unknown_key", key, "not a contract field"))

    if "task_class" not in document:
        errors.append(SchemaError("missing_task_class", "task_class", "required"))
        raise ContractValidationError(errors)
    task_class = _parse_enum(TaskClass, document["task_class"], "task_class", errors)
    if task_class is None:
        raise ContractValidationError(errors)

    utterance = document.get("utterance", "")
    if not isinstance(utterance, str):
        errors.append(SchemaError("type_mismatch", "utterance", "expected string"))
        utterance = ""

    params = _parse_parameters(document.get("parameters"), errors)

    flags: list[SafetyFlag] = []
    raw_flags = document.get("safety_flags", [])
    if not isinstance(raw_flags, list):
        errors.append(SchemaError("type_mismatch", "safety_flags", "expected list"))
    else:
        for i, item in enumerate(raw_flags):
            if not isinstance(item, dict):
                errors.append(SchemaError("type_mismatch", f"safety_flags[{i}]", "expected object"))
                continue
            for key in sorted(set(item) - {"kind", "detail"}):
                errors.append(SchemaError("unknown_key", f"safety_flags[{i}].{key}", "not a flag field"))
            kind = _parse_enum(SafetyFlagKind, item.get("kind"), f"safety_flags[{i}].kind", errors)
            detail = item.get("detail", "")
            if not isinstance(detail, str):
                errors.append(SchemaError("type_mismatch", f"safety_flags[{i}].detail", "expected string"))
                detail = ""
            if kind is not None:
                flag = SafetyFlag(kind=kind, detail=detail)
                if flag not in flags:
                    flags.append(flag)

    raw_missing = document.get("missing_fields", [])
    missing: list[str] = []
    if not isinstance(raw_missing, list) or not all(isinstance(m, str) for m in raw_missing):
        errors.append(SchemaError("type_mismatch", "missing_fields", "expected list of field names"))
    else:
        known_fields = set(CanonicalParameters.__dataclass_fields__)
        populated = set(params.populated())
        for name in raw_missing:
            if name not in known_fields:
                errors.append(SchemaError("unknown_key", f"missing_fields:{name}", "not a canonical parameter"))
            elif name in populated:
                errors.append(
                    SchemaError("constraint_violation", f"missing_fields:{name}", "field is populated")
                )
            elif name not in missing:
                missing.append(name)

    expected = None
    if document.get("expected_output") is not None:
        expected = _parse_enum(ExpectedOutput, document["expected_output"], "expected_output", errors)

    provenance = Provenance.DETERMINISTIC_GROUNDER
    if "provenance" in document:
        parsed = _parse_enum(Provenance, document["provenance"], "provenance", errors)
        if parsed is not None:
            provenance = parsed

    if errors:
        raise ContractValidationError(errors)

    if not missing:
        missing = sorted(_required_slots(task_class, params))
    if expected is None:
        expected = DEFAULT_OUTPUT[task_class]

    return TaskContract(
        task_class=task_class,
        utterance=utterance,
        parameters=params,
        safety_flags=flags,
        missing_fields=missing,
        expected_output=expected,
        provenance=provenance,
    )
