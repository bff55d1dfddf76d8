"""Deterministic execution runtime.

Every instrument-facing node runs the same four-phase discipline:
pre-check the state preconditions, execute registered command templates,
verify the result against the skill's verification rules, and only then
commit the observed values to session state. Any non-ok verification marks
the touched fields Invalid and aborts the run (fail-stop); recovery is a
recommendation in the failure report, never an automatic retry.

No free-form command text exists here: the only strings sent to the
instrument are rendered skill templates plus the fixed error-queue drain.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .knowledge.registry import KnowledgeBase
from .knowledge.templates import render_command
from .knowledge.types import (
    ExecutionType,
    NodeKind,
    SkillDefinition,
    VerificationKind,
)
from .planner import ExecutableTaskGraph, GraphNode
from .rftools.traces import RefinePolicy, SweepWindow, refine_step
from .scpi.client import ScpiSession, TransportError, TransportErrorKind, parse_float_list
from .state import StateManager

NODE_TIMEOUT_S = 10.0
_ERROR_DRAIN_LIMIT = 10

# per-field tolerance for injected verification nodes; frequencies compare
# at the readback-rendering tolerance, power at the instrument's 0.01 dB
_FIELD_TOLERANCE = {
    "center_frequency_hz": 1.0,
    "span_hz": 1.0,
    "start_frequency_hz": 1.0,
    "stop_frequency_hz": 1.0,
    "if_bandwidth_hz": 1.0,
    "output_power_dbm": 0.01,
    "sweep_points": 0.0,
}


class VerifyOutcome(str, Enum):
    OK = "ok"
    MISMATCH = "mismatch"
    TIMEOUT = "timeout"
    INSTRUMENT_ERROR = "instrument_error"
    FORMAT_INVALID = "format_invalid"
    SAFETY_VIOLATION = "safety_violation"
    TOOL_ERROR = "tool_error"


class Recovery(str, Enum):
    RETRY = "retry"
    REPLAN = "replan"
    OPERATOR_ATTENTION = "operator_attention"


RECOVERY_BY_OUTCOME = {
    VerifyOutcome.MISMATCH: Recovery.REPLAN,
    VerifyOutcome.TIMEOUT: Recovery.RETRY,
    VerifyOutcome.FORMAT_INVALID: Recovery.RETRY,
    VerifyOutcome.INSTRUMENT_ERROR: Recovery.OPERATOR_ATTENTION,
    VerifyOutcome.SAFETY_VIOLATION: Recovery.OPERATOR_ATTENTION,
    VerifyOutcome.TOOL_ERROR: Recovery.OPERATOR_ATTENTION,
}


@dataclass(frozen=True)
class FailureReport:
    node_id: str
    outcome: VerifyOutcome
    detail: str
    recommended_recovery: Recovery

    def to_dict(self) -> dict[str, str]:
        return {
            "node_id": self.node_id,
            "outcome": self.outcome.value,
            "detail": self.detail,
            "recommended_recovery": self.recommended_recovery.value,
        }


class _NodeFailure(Exception):
    def __init__(self, outcome: VerifyOutcome, detail: str):
        super().__init__(detail)
        self.outcome = outcome
        self.detail = detail


@dataclass
class ExecutionResult:
    status: str  # completed | failed
    outputs: dict[str, dict[str, Any]] = field(default_factory=dict)
    failure: FailureReport | None = None
    raw_io: list[dict[str, Any]] = field(default_factory=list)
    events: list[dict[str, Any]] = field(default_factory=list)
    node_sequence: list[str] = field(default_factory=list)
    iterations: int = 0


# predicates and refiners a condition/refinement node may name; the
# registry lints against the same vocabulary
def _resonance_converged(inputs: dict[str, Any]) -> bool:
    return (
        inputs["span_hz"] <= inputs["final_span_hz"]
        and inputs["min_db"] <= inputs["min_depth_db"]
    )


def _refine_step(inputs: dict[str, Any]) -> dict[str, float]:
    window = SweepWindow(center_hz=inputs["center_hz"], span_hz=inputs["span_hz"])
    policy = RefinePolicy(
        reduction_factor=inputs.get("reduction_factor", 10.0),
        final_span_hz=inputs.get("final_span_hz", 1.0e6),
        frequency_range_hz=(
            inputs.get("freq_min_hz", 1.0e7),
            inputs.get("freq_max_hz", 2.65e10),
        ),
    )
    out = refine_step(window, inputs["f_min_hz"], policy)
    return {"center_hz": out.center_hz, "span_hz": out.span_hz}


PREDICATES: dict[str, Callable[[dict[str, Any]], bool]] = {
    "resonance_converged": _resonance_converged
}
REFINERS: dict[str, Callable[[dict[str, Any]], dict[str, Any]]] = {"refine_step": _refine_step}


class Executor:
    """Runs one executable task graph against one instrument connection."""

    def __init__(
        self,
        kb: KnowledgeBase,
        state: StateManager,
        host: str,
        port: int,
        node_timeout_s: float = NODE_TIMEOUT_S,
        io_timeout_s: float | None = None,
        event_sink: Callable[[dict[str, Any]], None] | None = None,
        run_id: str | None = None,
        tool_overrides: dict[str, Callable[[dict[str, Any]], dict[str, Any]]] | None = None,
    ):
        self.kb = kb
        self.state = state
        self.host = host
        self.port = port
        self.node_timeout_s = node_timeout_s
        self.io_timeout_s = io_timeout_s if io_timeout_s is not None else node_timeout_s
        self.event_sink = event_sink
        self.run_id = run_id
        self.tool_overrides = tool_overrides or {}
        self._seq = 0
        self._session: ScpiSession | None = None
        self._deadline = 0.0
        self._result: ExecutionResult | None = None
        self._current: GraphNode | None = None
        self._nodes: list[GraphNode] = []

    # -- event plumbing --------------------------------------------------

    def _emit(self, event: str, node_id: str, payload: dict[str, Any]) -> None:
        self._seq += 1
        doc = {
            "seq": self._seq,
            "timestamp": time.time(),
            "event": event,
            "node_id": node_id,
            "payload": payload,
        }
        assert self._result is not None
        self._result.events.append(doc)
        if self.event_sink:
            self.event_sink(doc)

    # -- instrument io, all of it ----------------------------------------

    def _remaining(self) -> float:
        left = self._deadline - time.monotonic()
        if left <= 0:
            raise _NodeFailure(VerifyOutcome.TIMEOUT, "node time budget exhausted")
        return min(left, self.io_timeout_s)

    def _send(self, line: str) -> None:
        self._remaining()
        assert self._session is not None
        try:
            self._session.send_command(line)
        except TransportError as err:
            raise _NodeFailure(self._transport_outcome(err), f"{line!r}: {err}") from err
        assert self._result is not None
        self._result.raw_io.append({"sent": line, "received": None})

    def _query(self, line: str) -> str:
        budget = self._remaining()
        assert self._session is not None
        try:
            response = self._session.query(line, timeout_s=budget)
        except TransportError as err:
            raise _NodeFailure(self._transport_outcome(err), f"{line!r}: {err}") from err
        assert self._result is not None
        self._result.raw_io.append({"sent": line, "received": response})
        return response

    @staticmethod
    def _transport_outcome(err: TransportError) -> VerifyOutcome:
        if err.kind is TransportErrorKind.TIMEOUT:
            return VerifyOutcome.TIMEOUT
        return VerifyOutcome.INSTRUMENT_ERROR

    def _drain_error_queue(self) -> list[str]:
        """Pop the instrument error queue until it reports empty."""
        errors = []
        for _ in range(_ERROR_DRAIN_LIMIT):
            response = self._query("SYST:ERR?")
            code = self._parse_error_code(response)
            if code == 0:
                return errors
            errors.append(response)
        raise _NodeFailure(
            VerifyOutcome.INSTRUMENT_ERROR, "error queue did not drain"
        )

    @staticmethod
    def _parse_error_code(response: str) -> int:
        head = response.split(",", 1)[0].strip()
        try:
            return int(head)
        except ValueError as err:
            raise _NodeFailure(
                VerifyOutcome.FORMAT_INVALID, f"unparseable error-queue entry {response!r}"
            ) from err

    # -- binding resolution ----------------------------------------------

    def _resolve(self, node: GraphNode) -> dict[str, Any]:
        assert self._result is not None
        values: dict[str, Any] = {}
        for name, doc in node.bind.items():
            source = doc["source"]
            if source == "const":
                values[name] = doc["value"]
            elif source == "output":
                try:
                    values[name] = self._result.outputs[doc["node"]][doc["output"]]
                except KeyError as err:
                    raise _NodeFailure(
                        VerifyOutcome.FORMAT_INVALID,
                        f"input {name!r} needs {doc['node']}.{doc['output']} "
                        "which no completed node produced",
                    ) from err
            elif source == "state":
                value = self.state.snapshot().value_of(doc["field"])
                if value is None:
                    raise _NodeFailure(
                        VerifyOutcome.MISMATCH,
                        f"input {name!r} reads unset state field {doc['field']!r}",
                    )
                values[name] = value
            elif source == "gather":
                rows = []
                for member in doc["nodes"]:
                    outputs = self._result.outputs.get(member)
                    if outputs is None:
                        raise _NodeFailure(
                            VerifyOutcome.FORMAT_INVALID,
                            f"gather input {name!r} covers unexecuted node {member!r}",
                        )
                    segment = next(n.segment for n in self._nodes if n.id == member) or {}
                    rows.append({**segment, **outputs})
                values[name] = rows
            else:
                raise _NodeFailure(
                    VerifyOutcome.FORMAT_INVALID, f"unknown binding source {source!r}"
                )
        return values

    # -- node phases -------------------------------------------------------

    def _precheck(self, node: GraphNode, skill: SkillDefinition | None) -> None:
        checks = []
        ok = True
        if skill is not None:
            snapshot = self.state.snapshot()
            for pre in skill.preconditions:
                satisfied = snapshot.satisfies(pre)
                checks.append({"field": pre.field, "op": pre.op, "satisfied": satisfied})
                ok = ok and satisfied
        self._emit("precheck", node.id, {"ok": ok, "checks": checks})
        if not ok:
            unmet = ", ".join(c["field"] for c in checks if not c["satisfied"])
            raise _NodeFailure(VerifyOutcome.MISMATCH, f"preconditions unmet: {unmet}")

    def _execute_skill(self, node: GraphNode, skill: SkillDefinition) -> dict[str, Any]:
        inputs = self._resolve(node)
        commands = [render_command(t, inputs) for t in skill.scpi_sequence]
        for line in commands:
            self._send(line)
        readback = self._query(skill.readback_query) if skill.readback_query else None
        data: dict[str, list[float]] = {}
        for name, query in skill.data_queries.items():
            response = self._query(query)
            try:
                data[name] = parse_float_list(response)
            except ValueError as err:
                raise _NodeFailure(
                    VerifyOutcome.FORMAT_INVALID, f"data query {name!r}: {err}"
                ) from err
            if not data[name]:
                raise _NodeFailure(VerifyOutcome.FORMAT_INVALID, f"data query {name!r} empty")
        self._emit(
            "execute",
            node.id,
            {"commands": commands, "readback": readback, "data_points": {k: len(v) for k, v in data.items()}},
        )
        return {"inputs": inputs, "readback": readback, "data": data}

    def _verify_skill(
        self, node: GraphNode, skill: SkillDefinition, executed: dict[str, Any]
    ) -> dict[str, str]:
        """Run the skill's verification rules; returns the raw readback seen
        per verified parameter so the commit records observed values."""
        readback = executed["readback"]
        inputs = executed["inputs"]
        checks = []
        verified: dict[str, str] = {}
        drained = False
        for rule in skill.verification_rule:
            if rule.kind is VerificationKind.RESPONSE_NON_EMPTY:
                if rule.query is None and readback is None:
                    # data-query skills: the parsed lists are the response
                    if not executed["data"] or not all(executed["data"].values()):
                        raise _NodeFailure(VerifyOutcome.FORMAT_INVALID, "no data returned")
                    checks.append(
                        {"kind": rule.kind.value, "data": sorted(executed["data"])}
                    )
                    continue
                value = readback if rule.query is None else self._query(rule.query)
                if not value.strip():
                    raise _NodeFailure(VerifyOutcome.FORMAT_INVALID, "empty readback")
                checks.append({"kind": rule.kind.value, "value": value})
            elif rule.kind is VerificationKind.READBACK_EQUALS:
                value = readback if rule.query is None else self._query(rule.query)
                expected = rule.expected if rule.expected is not None else str(
                    inputs.get(rule.param)
                )
                if value is None or value.strip() != expected:
                    raise _NodeFailure(
                        VerifyOutcome.MISMATCH,
                        f"readback {value!r} != expected {expected!r}",
                    )
                if rule.param:
                    verified[rule.param] = value
                checks.append({"kind": rule.kind.value, "value": value, "expected": expected})
            elif rule.kind is VerificationKind.READBACK_WITHIN_TOLERANCE:
                value = readback if rule.query is None else self._query(rule.query)
                expected = inputs.get(rule.param)
                try:
                    observed = float(value)
                except (TypeError, ValueError) as err:
                    raise _NodeFailure(
                        VerifyOutcome.FORMAT_INVALID, f"unparseable readback {value!r}"
                    ) from err
                tolerance = rule.tolerance or 0.0
                if expected is None or abs(observed - float(expected)) > tolerance:
                    raise _NodeFailure(
                        VerifyOutcome.MISMATCH,
                        f"readback {observed:g} outside tolerance "
                        f"{tolerance:g} of {expected}",
                    )
                if rule.param:
                    verified[rule.param] = value
                checks.append(
                    {"kind": rule.kind.value, "observed": observed, "expected": expected}
                )
            elif rule.kind is VerificationKind.ERROR_QUEUE_EMPTY:
                errors = self._drain_error_queue()
                drained = True
                if errors:
                    raise _NodeFailure(
                        VerifyOutcome.INSTRUMENT_ERROR, "; ".join(errors)
                    )
                checks.append({"kind": rule.kind.value})
        if not drained and skill.execution_type in (ExecutionType.SET, ExecutionType.MEASURE):
            # the queue is always checked after a mutating command, even if
            # the skill author forgot to ask for it
            errors = self._drain_error_queue()
            if errors:
                raise _NodeFailure(VerifyOutcome.INSTRUMENT_ERROR, "; ".join(errors))
            checks.append({"kind": "error_queue_empty", "implicit": True})
        self._emit("verify", node.id, {"outcome": VerifyOutcome.OK.value, "checks": checks})
        return verified

    @staticmethod
    def _parse_scalar(text: str) -> Any:
        stripped = text.strip()
        try:
            return int(stripped)
        except ValueError:
            pass
        try:
            return float(stripped)
        except ValueError:
            return stripped

    def _commit_skill(
        self,
        node: GraphNode,
        skill: SkillDefinition,
        executed: dict[str, Any],
        verified: dict[str, str] | None = None,
    ) -> dict[str, Any]:
        inputs = executed["inputs"]
        readback = executed["readback"]
        verified = verified or {}
        outputs: dict[str, Any] = {}
        observations: dict[str, Any] = {}
        for field_name, update in skill.state_updates.items():
            if update.source == "param":
                value = inputs.get(update.param)
            elif update.source == "readback":
                # a verification rule may have queried the field itself
                raw = verified.get(update.param or field_name, readback)
                if raw is None:
                    raise _NodeFailure(
                        VerifyOutcome.FORMAT_INVALID,
                        f"state update {field_name!r} needs a readback",
                    )
                value = self._parse_scalar(raw)
            else:
                value = update.value
            observations[field_name] = value
            outputs[field_name] = value
        for name, values in executed["data"].items():
            outputs[name] = values
        if skill.name == "connect_instrument" and readback is not None:
            outputs["identity"] = readback.strip()
        entry = self.state.commit(node.id, observations, verification=VerifyOutcome.OK.value)
        self._emit(
            "commit",
            node.id,
            {"values": entry.get("values", {}), "invalidated": entry.get("invalidated", {})},
        )
        return outputs

    def _run_verification_node(self, node: GraphNode) -> dict[str, Any]:
        """Injected readback check: re-query a field and compare."""
        skill = self.kb.skills[node.resource]
        self._precheck(node, skill)
        executed = self._execute_skill(node, skill)
        inputs = executed["inputs"]
        field_name = inputs.get("field")
        expected = inputs.get("expected")
        observed = self._parse_scalar(executed["readback"] or "")
        tolerance = _FIELD_TOLERANCE.get(field_name, 0.0)
        try:
            mismatch = abs(float(observed) - float(expected)) > tolerance
        except (TypeError, ValueError):
            mismatch = str(observed) != str(expected)
        if mismatch:
            raise _NodeFailure(
                VerifyOutcome.MISMATCH,
                f"{field_name} reads {observed!r}, expected {expected!r}",
            )
        self._emit(
            "verify",
            node.id,
            {"outcome": VerifyOutcome.OK.value, "field": field_name, "observed": observed},
        )
        return self._commit_skill(node, skill, executed)

    def _run_tool(self, node: GraphNode) -> dict[str, Any]:
        self._precheck(node, None)
        inputs = self._resolve(node)
        impl = self.tool_overrides.get(node.resource) or self.kb.tool_impls.get(node.resource)
        if impl is None:
            raise _NodeFailure(
                VerifyOutcome.TOOL_ERROR, f"tool {node.resource!r} has no implementation"
            )
        try:
            outputs = impl(inputs)
        except Exception as err:  # noqa: BLE001 - tool faults become reports
            raise _NodeFailure(VerifyOutcome.TOOL_ERROR, f"{node.resource}: {err}") from err
        self._emit(
            "execute",
            node.id,
            {"tool": node.resource, "outputs": sorted(outputs)},
        )
        if "record_ids" in outputs and "locations" in outputs:
            locations = outputs["locations"] or [""] * len(outputs["record_ids"])
            for ref_id, location in zip(outputs["record_ids"], locations):
                self.state.add_data_ref(ref_id, kind="trace", location=location)
            self._emit(
                "record",
                node.id,
                {"record_ids": outputs["record_ids"], "locations": locations},
            )
        entry = self.state.commit(node.id, {}, verification=VerifyOutcome.OK.value)
        self._emit("commit", node.id, {"values": entry.get("values", {})})
        return outputs

    def _run_condition(self, node: GraphNode, iteration: int) -> bool:
        predicate = PREDICATES.get(node.resource)
        if predicate is None:
            raise _NodeFailure(VerifyOutcome.TOOL_ERROR, f"unknown predicate {node.resource!r}")
        inputs = self._resolve(node)
        try:
            result = bool(predicate(inputs))
        except Exception as err:  # noqa: BLE001
            raise _NodeFailure(VerifyOutcome.TOOL_ERROR, f"{node.resource}: {err}") from err
        assert self._result is not None
        self._result.outputs[node.id] = {"converged": result}
        self._emit("condition", node.id, {"iteration": iteration, "result": result})
        return result

    def _run_refinement(self, node: GraphNode) -> dict[str, Any]:
        refiner = REFINERS.get(node.resource)
        if refiner is None:
            raise _NodeFailure(VerifyOutcome.TOOL_ERROR, f"unknown refiner {node.resource!r}")
        inputs = self._resolve(node)
        try:
            outputs = refiner(inputs)
        except Exception as err:  # noqa: BLE001
            raise _NodeFailure(VerifyOutcome.TOOL_ERROR, f"{node.resource}: {err}") from err
        self._emit("execute", node.id, {"refiner": node.resource, "outputs": outputs})
        return outputs

    # -- the run loop ------------------------------------------------------

    def _run_node(self, node: GraphNode) -> None:
        assert self._result is not None
        self._current = node
        self.state.set_active(self.run_id, node.id)
        self._deadline = time.monotonic() + self.node_timeout_s
        self._result.node_sequence.append(node.id)
        if node.kind in (NodeKind.SKILL, NodeKind.ACQUISITION):
            skill = self.kb.skills[node.resource]
            self._precheck(node, skill)
            executed = self._execute_skill(node, skill)
            verified = self._verify_skill(node, skill, executed)
            self._result.outputs[node.id] = self._commit_skill(node, skill, executed, verified)
        elif node.kind is NodeKind.VERIFICATION:
            self._result.outputs[node.id] = self._run_verification_node(node)
        elif node.kind is NodeKind.TOOL:
            self._result.outputs[node.id] = self._run_tool(node)
        elif node.kind is NodeKind.REFINEMENT:
            self._result.outputs[node.id] = self._run_refinement(node)
        elif node.kind is NodeKind.CONDITION:
            raise _NodeFailure(
                VerifyOutcome.FORMAT_INVALID, "condition node outside a loop region"
            )
        else:
            raise _NodeFailure(VerifyOutcome.FORMAT_INVALID, f"unknown node kind {node.kind}")

    def _run_loop(self, graph: ExecutableTaskGraph) -> None:
        assert graph.loop is not None and self._result is not None
        members = [graph.node(node_id) for node_id in graph.loop.member_ids]
        condition_id = graph.loop.condition_node
        for iteration in range(1, graph.loop.max_iterations + 1):
            self._result.iterations = iteration
            converged = False
            for node in members:
                if node.id == condition_id:
                    self._current = node
                    self.state.set_active(self.run_id, node.id)
                    self._deadline = time.monotonic() + self.node_timeout_s
                    self._result.node_sequence.append(node.id)
                    converged = self._run_condition(node, iteration)
                    if converged:
                        break  # exit check passed; skip the rest of the body
                else:
                    self._run_node(node)
            if converged:
                return
        self._current = graph.node(condition_id)
        raise _NodeFailure(
            VerifyOutcome.MISMATCH,
            f"loop exhausted {graph.loop.max_iterations} iterations without converging",
        )

    def run(self, graph: ExecutableTaskGraph) -> ExecutionResult:
        self._result = ExecutionResult(status="failed")
        result = self._result
        self._seq = 0
        if graph.veto is not None:
            raise ValueError("vetoed graph must not be executed")
        self._nodes = graph.nodes
        loop_ids = set(graph.loop.member_ids) if graph.loop else set()
        self.state.set_active(self.run_id)
        self._current = None
        try:
            self._session = ScpiSession(self.host, self.port, timeout_s=self.io_timeout_s)
        except (TransportError, OSError) as err:
            result.failure = FailureReport(
                node_id="connect",
                outcome=VerifyOutcome.INSTRUMENT_ERROR,
                detail=f"connection failed: {err}",
                recommended_recovery=Recovery.OPERATOR_ATTENTION,
            )
            self._emit("failure", "connect", result.failure.to_dict())
            return result
        try:
            i = 0
            in_loop_done = False
            while i < len(graph.nodes):
                node = graph.nodes[i]
                if node.id in loop_ids:
                    if not in_loop_done:
                        self._run_loop(graph)
                        in_loop_done = True
                    i += 1
                    continue
                self._run_node(node)
                i += 1
            result.status = "completed"
        except _NodeFailure as failure:
            current = self._current
            node_id = current.id if current else "plan"
            touched: list[str] = []
            if current is not None:
                skill = self.kb.skills.get(current.resource)
                if skill is not None and current.kind in (
                    NodeKind.SKILL,
                    NodeKind.ACQUISITION,
                    NodeKind.VERIFICATION,
                ):
                    touched = list(skill.state_updates)
            self.state.mark_invalid(node_id, touched, failure.detail)
            result.failure = FailureReport(
                node_id=node_id,
                outcome=failure.outcome,
                detail=failure.detail,
                recommended_recovery=RECOVERY_BY_OUTCOME[failure.outcome],
            )
            self._emit("failure", node_id, result.failure.to_dict())
        finally:
            if self._session is not None:
                self._session.close()
                self._session = None
            self.state.set_active(None)
        return result
