"""Typed resources of the knowledge plane.

Skills wrap instrument command sequences behind declared inputs, verification
and state effects; templates assemble skills and tools into task graphs;
rules constrain what plans may do; doc entries feed retrieval. Everything
here is declarative data, loadable from JSON manifests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..contracts import SafetyFlagKind


class ExecutionType(str, Enum):
    SET = "set"
    QUERY = "query"
    MEASURE = "measure"


class NodeKind(str, Enum):
    SKILL = "skill"
    ACQUISITION = "acquisition"
    TOOL = "tool"
    VERIFICATION = "verification"
    CONDITION = "condition"
    REFINEMENT = "refinement"


class VerificationKind(str, Enum):
    READBACK_EQUALS = "readback_equals"
    READBACK_WITHIN_TOLERANCE = "readback_within_tolerance"
    ERROR_QUEUE_EMPTY = "error_queue_empty"
    RESPONSE_NON_EMPTY = "response_non_empty"


@dataclass(frozen=True)
class VerificationRule:
    """One check in a skill's verification list.

    query overrides the skill's readback_query; param names the bound input
    the readback is compared against; expected is a literal expectation for
    readback_equals when no param applies.
    """

    kind: VerificationKind
    tolerance: float | None = None
    query: str | None = None
    param: str | None = None
    expected: str | None = None


@dataclass(frozen=True)
class Precondition:
    field: str
    op: str = "defined"  # defined | eq | le | ge
    value: Any = None


@dataclass(frozen=True)
class ParamSpec:
    type: str = "float"  # float | int | str
    required: bool = True
    unit: str = ""
    description: str = ""


@dataclass(frozen=True)
class StateUpdate:
    """Where a committed field value comes from: a bound parameter, the
    verified readback, or a constant."""

    source: str  # param | readback | const
    param: str | None = None
    value: Any = None


@dataclass
class SkillDefinition:
    name: str
    description: str
    execution_type: ExecutionType
    instrument_model: str = "VNA-3671C-EMU"
    input_schema: dict[str, ParamSpec] = field(default_factory=dict)
    preconditions: list[Precondition] = field(default_factory=list)
    scpi_sequence: list[str] = field(default_factory=list)
    readback_query: str | None = None
    verification_rule: list[VerificationRule] = field(default_factory=list)
    data_queries: dict[str, str] = field(default_factory=dict)
    state_updates: dict[str, StateUpdate] = field(default_factory=dict)
    safety_tags: list[SafetyFlagKind] = field(default_factory=list)

    def command_templates(self) -> list[str]:
        out = list(self.scpi_sequence)
        if self.readback_query:
            out.append(self.readback_query)
        for rule in self.verification_rule:
            if rule.query:
                out.append(rule.query)
        out.extend(self.data_queries.values())
        return out


@dataclass(frozen=True)
class Binding:
    """Where a node input value comes from at compile or run time."""

    source: str  # contract | const | output | state | segment
    field: str | None = None
    node: str | None = None
    output: str | None = None
    value: Any = None
    default: Any = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"source": self.source}
        for key in ("field", "node", "output", "value", "default"):
            v = getattr(self, key)
            if v is not None:
                out[key] = v
        return out


@dataclass
class NodeTemplate:
    id: str
    kind: NodeKind
    resource: str
    bind: dict[str, Binding] = field(default_factory=dict)
    repeat_per: str | None = None  # "segments" expands the node per contract segment


@dataclass
class TemplateCriteria:
    """Declarative match against a contract's task family."""

    task_classes: list[str] = field(default_factory=list)
    analysis_kind: str | None = None
    requires_segments: bool | None = None
    requires_power: bool | None = None

    def specificity(self) -> int:
        n = len(self.task_classes) > 0
        return int(n) + sum(
            v is not None for v in (self.analysis_kind, self.requires_segments, self.requires_power)
        )


@dataclass
class WorkflowTemplate:
    name: str
    description: str
    criteria: TemplateCriteria
    nodes: list[NodeTemplate] = field(default_factory=list)
    instrument_model: str = "VNA-3671C-EMU"
    # Single policy today; kept explicit so graphs record what the runtime
    # will do when a node fails.
    failure_policy: str = "abort_on_first_failure"


@dataclass
class LoopSpec:
    members: list[str]  # node template ids forming the loop body, in order
    max_iterations: int
    condition_node: str  # member that decides exit


@dataclass
class HybridGraphTemplate(WorkflowTemplate):
    loop: LoopSpec | None = None


@dataclass
class ToolDefinition:
    name: str
    description: str
    input_schema: dict[str, ParamSpec] = field(default_factory=dict)
    output_schema: dict[str, ParamSpec] = field(default_factory=dict)


class RuleKind(str, Enum):
    PARAMETER_RANGE = "parameter_range"
    MAX_OUTPUT_POWER = "max_output_power"
    CALIBRATION_PROTECTION = "calibration_protection"
    FILE_OVERWRITE_PROTECTION = "file_overwrite_protection"
    ORDERING_CONSTRAINT = "ordering_constraint"
    READBACK_REQUIRED = "readback_required"


class Enforcement(str, Enum):
    CLAMP_AND_WARN = "clamp_and_warn"
    BLOCK = "block"
    INJECT_VERIFICATION = "inject_verification"


# Which contract safety-flag kinds each rule kind is answerable for.
RULE_FLAG_COVERAGE: dict[RuleKind, tuple[SafetyFlagKind, ...]] = {
    RuleKind.MAX_OUTPUT_POWER: (SafetyFlagKind.POWER_LIMIT_CHECK,),
    RuleKind.CALIBRATION_PROTECTION: (SafetyFlagKind.CALIBRATION_PROTECTION,),
    RuleKind.FILE_OVERWRITE_PROTECTION: (SafetyFlagKind.FILE_OVERWRITE_PROTECTION,),
    RuleKind.PARAMETER_RANGE: (SafetyFlagKind.WIDEBAND_SWEEP_CHECK,),
    RuleKind.READBACK_REQUIRED: (SafetyFlagKind.RF_OUTPUT_CHECK,),
    RuleKind.ORDERING_CONSTRAINT: (),
}


@dataclass
class InstrumentRule:
    name: str
    kind: RuleKind
    enforcement: Enforcement
    description: str = ""
    # interpretation depends on kind:
    #   parameter_range: field, min_value, max_value
    #   max_output_power: limit_dbm
    #   readback_required: field
    #   ordering_constraint: before (skill name), after (skill name)
    field_name: str | None = None
    min_value: float | None = None
    max_value: float | None = None
    limit_dbm: float | None = None
    before: str | None = None
    after: str | None = None

    def covered_flags(self) -> tuple[SafetyFlagKind, ...]:
        return RULE_FLAG_COVERAGE[self.kind]


@dataclass
class ScpiDocEntry:
    command_path: str
    syntax: str
    description: str
    parameter_notes: str = ""
    category: str = ""


class DisclosureStage(str, Enum):
    INTENT = "intent"
    PLANNING = "planning"
    EXECUTION = "execution"
    RETRIEVAL_ON_DEMAND = "retrieval_on_demand"


@dataclass
class KnowledgeView:
    """Read-only stage-scoped projection of the knowledge base."""

    stage: DisclosureStage
    payload: dict[str, Any]

    def resource_names(self) -> set[str]:
        names: set[str] = set()
        for group in ("rules", "skills", "templates", "tools", "docs"):
            for item in self.payload.get(group, []):
                key = "name" if "name" in item else "command_path"
                names.add(item[key])
        return names
