"""Knowledge base: registration, manifest loading, disclosure, retrieval.

Resources are validated at registration time so a bad manifest fails loudly
at startup, not in the middle of a run. Disclosure is staged: the language
side of the system only ever sees views, and no view below execution stage
carries command bodies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from ..contracts import SafetyFlagKind, TaskClass
from ..scpi.grammar import ScpiParseError, parse
from .retrieval import LexicalIndex, RetrievalHit
from .templates import TemplateError, placeholders, render_command
from .types import (
    Binding,
    DisclosureStage,
    Enforcement,
    ExecutionType,
    HybridGraphTemplate,
    InstrumentRule,
    KnowledgeView,
    LoopSpec,
    NodeKind,
    NodeTemplate,
    ParamSpec,
    Precondition,
    RuleKind,
    ScpiDocEntry,
    SkillDefinition,
    StateUpdate,
    TemplateCriteria,
    ToolDefinition,
    VerificationKind,
    VerificationRule,
    WorkflowTemplate,
)

# Route policy by task class; single-parameter configuration collapses to a
# direct skill call, everything else fans out per this table.
ROUTE_POLICY: dict[str, str] = {
    TaskClass.CONVERSATIONAL.value: "response_only",
    TaskClass.STATE_QUERY.value: "direct_skill",
    TaskClass.CONFIGURATION.value: "direct_skill_or_linear",
    TaskClass.ACQUISITION.value: "linear_workflow",
    TaskClass.ANALYSIS.value: "tool_augmented_workflow",
    TaskClass.FEEDBACK_CONTROL.value: "hybrid_execution_graph",
}

_DUMMY_BY_TYPE = {"float": 1.0, "int": 1, "str": "X"}


class KnowledgeError(ValueError):
    pass


ToolImpl = Callable[[dict[str, Any]], dict[str, Any]]


@dataclass
class KnowledgeBase:
    skills: dict[str, SkillDefinition] = field(default_factory=dict)
    templates: dict[str, WorkflowTemplate] = field(default_factory=dict)
    tools: dict[str, ToolDefinition] = field(default_factory=dict)
    rules: dict[str, InstrumentRule] = field(default_factory=dict)
    docs: list[ScpiDocEntry] = field(default_factory=list)
    tool_impls: dict[str, ToolImpl] = field(default_factory=dict)
    _index: LexicalIndex | None = None

    # -- registration ------------------------------------------------------

    def register_skill(self, skill: SkillDefinition) -> None:
        if skill.name in self.skills:
            raise KnowledgeError(f"duplicate skill {skill.name!r}")
        dummy = {
            name: _DUMMY_BY_TYPE.get(spec.type, "X") for name, spec in skill.input_schema.items()
        }
        for template in skill.command_templates():
            for ph in placeholders(template):
                if ph not in skill.input_schema:
                    raise KnowledgeError(
                        f"skill {skill.name!r}: placeholder {{{ph}}} is not a declared input"
                    )
            try:
                parse(render_command(template, dummy))
            except (ScpiParseError, TemplateError) as err:
                raise KnowledgeError(f"skill {skill.name!r}: bad template {template!r}: {err}") from err
        if skill.execution_type is ExecutionType.SET:
            if not skill.verification_rule:
                raise KnowledgeError(f"set skill {skill.name!r} declares no verification")
            if not skill.state_updates:
                raise KnowledgeError(f"set skill {skill.name!r} declares no state update")
        for update in skill.state_updates.values():
            if update.source == "param" and update.param not in skill.input_schema:
                raise KnowledgeError(
                    f"skill {skill.name!r}: state update sourced from unknown param {update.param!r}"
                )
        self.skills[skill.name] = skill

    def register_template(self, template: WorkflowTemplate) -> None:
        if template.name in self.templates:
            raise KnowledgeError(f"duplicate template {template.name!r}")
        seen: set[str] = set()
        for node in template.nodes:
            if node.id in seen:
                raise KnowledgeError(f"template {template.name!r}: duplicate node id {node.id!r}")
            seen.add(node.id)
            if node.kind in (NodeKind.SKILL, NodeKind.ACQUISITION, NodeKind.VERIFICATION):
                if node.resource not in self.skills:
                    raise KnowledgeError(
                        f"template {template.name!r}: unknown skill {node.resource!r}"
                    )
            elif node.kind is NodeKind.TOOL:
                if node.resource not in self.tools:
                    raise KnowledgeError(
                        f"template {template.name!r}: unknown tool {node.resource!r}"
                    )
            for name, binding in node.bind.items():
                if binding.source in ("output", "gather") and (
                    binding.node == node.id or binding.node not in seen
                ):
                    raise KnowledgeError(
                        f"template {template.name!r}: node {node.id!r} input {name!r} "
                        f"references {binding.node!r} which is not an earlier node"
                    )
                if binding.source == "segment" and node.repeat_per != "segments":
                    raise KnowledgeError(
                        f"template {template.name!r}: node {node.id!r} input {name!r} "
                        "uses a segment binding outside a repeated node"
                    )
        if isinstance(template, HybridGraphTemplate) and template.loop is not None:
            loop = template.loop
            ids = [n.id for n in template.nodes]
            for member in loop.members:
                if member not in ids:
                    raise KnowledgeError(f"template {template.name!r}: loop member {member!r} unknown")
            if loop.condition_node not in loop.members:
                raise KnowledgeError(
                    f"template {template.name!r}: condition node must be a loop member"
                )
            if loop.max_iterations < 1:
                raise KnowledgeError(f"template {template.name!r}: max_iterations must be >= 1")
        self.templates[template.name] = template

    def register_tool(self, tool: ToolDefinition, impl: ToolImpl | None = None) -> None:
        if tool.name in self.tools:
            raise KnowledgeError(f"duplicate tool {tool.name!r}")
        self.tools[tool.name] = tool
        if impl is not None:
            self.tool_impls[tool.name] = impl

    def register_tool_impl(self, name: str, impl: ToolImpl) -> None:
        if name not in self.tools:
            raise KnowledgeError(f"no tool definition for impl {name!r}")
        self.tool_impls[name] = impl

    def register_rule(self, rule: InstrumentRule) -> None:
        if rule.name in self.rules:
            raise KnowledgeError(f"duplicate rule {rule.name!r}")
        needs = {
            RuleKind.PARAMETER_RANGE: ("field_name", "min_value", "max_value"),
            RuleKind.MAX_OUTPUT_POWER: ("limit_dbm",),
            RuleKind.READBACK_REQUIRED: ("field_name",),
            RuleKind.ORDERING_CONSTRAINT: ("before", "after"),
            RuleKind.CALIBRATION_PROTECTION: (),
            RuleKind.FILE_OVERWRITE_PROTECTION: (),
        }[rule.kind]
        for attr in needs:
            if getattr(rule, attr) is None:
                raise KnowledgeError(f"rule {rule.name!r} ({rule.kind.value}) needs {attr}")
        self.rules[rule.name] = rule

    def register_doc(self, entry: ScpiDocEntry) -> None:
        if any(d.command_path == entry.command_path for d in self.docs):
            raise KnowledgeError(f"duplicate doc entry {entry.command_path!r}")
        self.docs.append(entry)
        self._index = None

    # -- retrieval ---------------------------------------------------------

    def retrieve(self, query: str, k: int = 3) -> list[RetrievalHit]:
        if self._index is None:
            self._index = LexicalIndex(self.docs)
        return self._index.retrieve(query, k)

    # -- validation --------------------------------------------------------

    def flag_coverage_gaps(self) -> list[SafetyFlagKind]:
        covered: set[SafetyFlagKind] = set()
        for rule in self.rules.values():
            covered.update(rule.covered_flags())
        return [kind for kind in SafetyFlagKind if kind not in covered]

    def lint(self) -> list[str]:
        findings: list[str] = []
        for kind in self.flag_coverage_gaps():
            findings.append(f"safety flag {kind.value} has no registered rule")
        for tool in self.tools.values():
            if tool.name not in self.tool_impls:
                findings.append(f"tool {tool.name!r} has no bound implementation")
        for template in self.templates.values():
            for node in template.nodes:
                if node.kind is NodeKind.CONDITION and node.resource not in _PREDICATES:
                    findings.append(
                        f"template {template.name!r}: unknown predicate {node.resource!r}"
                    )
                if node.kind is NodeKind.REFINEMENT and node.resource not in _REFINERS:
                    findings.append(
                        f"template {template.name!r}: unknown refiner {node.resource!r}"
                    )
        if len(self.docs) < 50:
            findings.append(f"doc corpus has {len(self.docs)} entries; expected at least 50")
        return findings

    # -- disclosure ---------------------------------------------------------

    def disclose(self, stage: DisclosureStage) -> KnowledgeView:
        payload: dict[str, Any] = {
            "stage": stage.value,
            "task_classes": [
                {"task_class": cls, "route": route} for cls, route in sorted(ROUTE_POLICY.items())
            ],
            "safety_flag_kinds": [k.value for k in SafetyFlagKind],
            "rules": [
                {
                    "name": r.name,
                    "kind": r.kind.value,
                    "enforcement": r.enforcement.value,
                    "description": r.description,
                }
                for r in sorted(self.rules.values(), key=lambda r: r.name)
            ],
        }
        if stage is DisclosureStage.INTENT:
            return KnowledgeView(stage=stage, payload=payload)

        include_bodies = stage in (DisclosureStage.EXECUTION, DisclosureStage.RETRIEVAL_ON_DEMAND)
        payload["skills"] = [
            self._skill_view(s, include_bodies)
            for s in sorted(self.skills.values(), key=lambda s: s.name)
        ]
        payload["templates"] = [
            self._template_view(t, include_bodies)
            for t in sorted(self.templates.values(), key=lambda t: t.name)
        ]
        payload["tools"] = [
            {
                "name": t.name,
                "description": t.description,
                "input_schema": _schema_dict(t.input_schema),
                "output_schema": _schema_dict(t.output_schema),
            }
            for t in sorted(self.tools.values(), key=lambda t: t.name)
        ]
        if stage is DisclosureStage.RETRIEVAL_ON_DEMAND:
            payload["docs"] = [
                {"command_path": d.command_path, "category": d.category} for d in self.docs
            ]
        return KnowledgeView(stage=stage, payload=payload)

    def _skill_view(self, skill: SkillDefinition, include_bodies: bool) -> dict[str, Any]:
        view: dict[str, Any] = {
            "name": skill.name,
            "description": skill.description,
            "execution_type": skill.execution_type.value,
            "instrument_model": skill.instrument_model,
            "input_schema": _schema_dict(skill.input_schema),
            "preconditions": [
                {"field": p.field, "op": p.op, "value": p.value} for p in skill.preconditions
            ],
            "state_fields": sorted(skill.state_updates),
            "safety_tags": [t.value for t in skill.safety_tags],
        }
        if include_bodies:
            view["scpi_sequence"] = list(skill.scpi_sequence)
            view["readback_query"] = skill.readback_query
            view["data_queries"] = dict(skill.data_queries)
            view["verification_rule"] = [
                {
                    "kind": r.kind.value,
                    "tolerance": r.tolerance,
                    "query": r.query,
                    "param": r.param,
                    "expected": r.expected,
                }
                for r in skill.verification_rule
            ]
        return view

    def _template_view(self, template: WorkflowTemplate, include_bodies: bool) -> dict[str, Any]:
        view: dict[str, Any] = {
            "name": template.name,
            "description": template.description,
            "criteria": {
                "task_classes": template.criteria.task_classes,
                "analysis_kind": template.criteria.analysis_kind,
                "requires_segments": template.criteria.requires_segments,
                "requires_power": template.criteria.requires_power,
            },
            "nodes": [
                {"id": n.id, "kind": n.kind.value, "resource": n.resource} for n in template.nodes
            ],
        }
        if include_bodies:
            for node_view, node in zip(view["nodes"], template.nodes):
                node_view["bind"] = {k: b.to_dict() for k, b in node.bind.items()}
                if node.repeat_per:
                    node_view["repeat_per"] = node.repeat_per
        if isinstance(template, HybridGraphTemplate) and template.loop:
            view["loop"] = {
                "members": template.loop.members,
                "max_iterations": template.loop.max_iterations,
                "condition_node": template.loop.condition_node,
            }
        return view


def _schema_dict(schema: dict[str, ParamSpec]) -> dict[str, Any]:
    return {
        name: {
            "type": spec.type,
            "required": spec.required,
            "unit": spec.unit,
            "description": spec.description,
        }
        for name, spec in sorted(schema.items())
    }


# Predicates and refiners the runtime knows how to evaluate; referenced by
# name from condition/refinement nodes and checked by lint.
_PREDICATES = {"resonance_converged"}
_REFINERS = {"refine_step"}


def known_predicates() -> set[str]:
    return set(_PREDICATES)


def known_refiners() -> set[str]:
    return set(_REFINERS)


# -- manifest parsing -------------------------------------------------------


def _parse_schema(raw: dict[str, Any]) -> dict[str, ParamSpec]:
    return {
        name: ParamSpec(
            type=spec.get("type", "float"),
            required=spec.get("required", True),
            unit=spec.get("unit", ""),
            description=spec.get("description", ""),
        )
        for name, spec in raw.items()
    }


def parse_skill(doc: dict[str, Any]) -> SkillDefinition:
    return SkillDefinition(
        name=doc["name"],
        description=doc.get("description", ""),
        execution_type=ExecutionType(doc["execution_type"]),
        instrument_model=doc.get("instrument_model", "VNA-3671C-EMU"),
        input_schema=_parse_schema(doc.get("input_schema", {})),
        preconditions=[
            Precondition(field=p["field"], op=p.get("op", "defined"), value=p.get("value"))
            for p in doc.get("preconditions", [])
        ],
        scpi_sequence=list(doc.get("scpi_sequence", [])),
        readback_query=doc.get("readback_query"),
        verification_rule=[
            VerificationRule(
                kind=VerificationKind(r["kind"]),
                tolerance=r.get("tolerance"),
                query=r.get("query"),
                param=r.get("param"),
                expected=r.get("expected"),
            )
            for r in doc.get("verification_rule", [])
        ],
        data_queries=dict(doc.get("data_queries", {})),
        state_updates={
            fieldname: StateUpdate(
                source=u["source"], param=u.get("param"), value=u.get("value")
            )
            for fieldname, u in doc.get("state_updates", {}).items()
        },
        safety_tags=[SafetyFlagKind(t) for t in doc.get("safety_tags", [])],
    )


def _parse_binding(raw: dict[str, Any]) -> Binding:
    return Binding(
        source=raw["source"],
        field=raw.get("field"),
        node=raw.get("node"),
        output=raw.get("output"),
        value=raw.get("value"),
        default=raw.get("default"),
    )


def _parse_nodes(raw_nodes: list[dict[str, Any]]) -> list[NodeTemplate]:
    return [
        NodeTemplate(
            id=n["id"],
            kind=NodeKind(n["kind"]),
            resource=n["resource"],
            bind={name: _parse_binding(b) for name, b in n.get("bind", {}).items()},
            repeat_per=n.get("repeat_per"),
        )
        for n in raw_nodes
    ]


def parse_template(doc: dict[str, Any]) -> WorkflowTemplate:
    criteria = TemplateCriteria(
        task_classes=list(doc.get("criteria", {}).get("task_classes", [])),
        analysis_kind=doc.get("criteria", {}).get("analysis_kind"),
        requires_segments=doc.get("criteria", {}).get("requires_segments"),
        requires_power=doc.get("criteria", {}).get("requires_power"),
    )
    nodes = _parse_nodes(doc.get("nodes", []))
    if "loop" in doc:
        loop = LoopSpec(
            members=list(doc["loop"]["members"]),
            max_iterations=int(doc["loop"]["max_iterations"]),
            condition_node=doc["loop"]["condition_node"],
        )
        return HybridGraphTemplate(
            name=doc["name"],
            description=doc.get("description", ""),
            criteria=criteria,
            nodes=nodes,
            loop=loop,
        )
    return WorkflowTemplate(
        name=doc["name"], description=doc.get("description", ""), criteria=criteria, nodes=nodes
    )


def parse_tool(doc: dict[str, Any]) -> ToolDefinition:
    return ToolDefinition(
        name=doc["name"],
        description=doc.get("description", ""),
        input_schema=_parse_schema(doc.get("input_schema", {})),
        output_schema=_parse_schema(doc.get("output_schema", {})),
    )


def parse_rule(doc: dict[str, Any]) -> InstrumentRule:
    return InstrumentRule(
        name=doc["name"],
        kind=RuleKind(doc["kind"]),
        enforcement=Enforcement(doc["enforcement"]),
        description=doc.get("description", ""),
        field_name=doc.get("field_name"),
        min_value=doc.get("min_value"),
        max_value=doc.get("max_value"),
        limit_dbm=doc.get("limit_dbm"),
        before=doc.get("before"),
        after=doc.get("after"),
    )


def parse_doc_entry(doc: dict[str, Any]) -> ScpiDocEntry:
    return ScpiDocEntry(
        command_path=doc["command_path"],
        syntax=doc.get("syntax", ""),
        description=doc.get("description", ""),
        parameter_notes=doc.get("parameter_notes", ""),
        category=doc.get("category", ""),
    )


def _read_json_docs(directory: Path) -> list[dict[str, Any]]:
    docs = []
    for path in sorted(directory.glob("*.json")):
        with open(path, encoding="utf-8") as fh:
            docs.append(json.load(fh))
    return docs


def load_manifest_dir(base: KnowledgeBase, manifest_dir: Path) -> None:
    """Load one manifest tree: skills/, tools/, rules/, workflows/, graphs/."""
    for doc in _read_json_docs(manifest_dir / "skills"):
        base.register_skill(parse_skill(doc))
    for doc in _read_json_docs(manifest_dir / "tools"):
        base.register_tool(parse_tool(doc))
    for doc in _read_json_docs(manifest_dir / "rules"):
        base.register_rule(parse_rule(doc))
    for doc in _read_json_docs(manifest_dir / "workflows"):
        base.register_template(parse_template(doc))
    for doc in _read_json_docs(manifest_dir / "graphs"):
        base.register_template(parse_template(doc))


def load_corpus_dir(base: KnowledgeBase, corpus_dir: Path) -> None:
    for doc in _read_json_docs(corpus_dir):
        base.register_doc(parse_doc_entry(doc))


def builtin_assets_dir() -> Path:
    return Path(__file__).resolve().parent.parent / "assets"


def builtin(
    manifest_dir: Path | None = None, corpus_dir: Path | None = None
) -> KnowledgeBase:
    """Knowledge base with the packaged manifests, corpus, and tool impls."""
    from . import toolimpl

    assets = builtin_assets_dir()
    base = KnowledgeBase()
    load_manifest_dir(base, manifest_dir or assets / "manifests")
    load_corpus_dir(base, corpus_dir or assets / "scpi_corpus")
    toolimpl.bind_builtin_tools(base)
    gaps = base.flag_coverage_gaps()
    if gaps:
        raise KnowledgeError(f"uncovered safety flags: {[g.value for g in gaps]}")
    return base
