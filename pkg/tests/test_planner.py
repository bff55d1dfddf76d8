import dataclasses

import pytest

from rfagent.contracts import TaskClass, validate_contract
from rfagent.intent import IntentService
from rfagent.knowledge.types import NodeKind, Precondition, VerificationKind
from rfagent.planner import (
    ExecutableTaskGraph,
    GraphNode,
    PlanError,
    Route,
    compile_contract,
    route_label,
    select_route,
    validate_structure,
)
from rfagent.state import StateManager

SERVICE = IntentService()


def plan(kb, utterance, snapshot=None):
    contract = SERVICE.understand(utterance)
    graph = compile_contract(contract, kb)
    return validate_structure(graph, contract, kb, snapshot=snapshot)


def node_ids(graph):
    return [n.id for n in graph.nodes]


class TestRouteSelection:
    @pytest.mark.parametrize("doc,route", [
        ({"task_class": "conversational"}, Route.RESPONSE_ONLY),
        ({"task_class": "state_query",
          "parameters": {"query_target": "span_hz"}}, Route.DIRECT_SKILL),
        ({"task_class": "configuration",
          "parameters": {"center_frequency_hz": 3e9}}, Route.DIRECT_SKILL),
        ({"task_class": "configuration",
          "parameters": {"center_frequency_hz": 3e9, "span_hz": 1e9}},
         Route.LINEAR_WORKFLOW),
        ({"task_class": "acquisition",
          "parameters": {"s_parameter": "S11", "start_frequency_hz": 1e9,
                         "stop_frequency_hz": 2e9}}, Route.LINEAR_WORKFLOW),
        ({"task_class": "analysis",
          "parameters": {"s_parameter": "S11", "analysis_kind": "peak",
                         "start_frequency_hz": 1e9, "stop_frequency_hz": 2e9}},
         Route.TOOL_AUGMENTED_WORKFLOW),
        ({"task_class": "feedback_control", "parameters": {"ports": [1]}},
         Route.HYBRID_EXECUTION_GRAPH),
    ])
    def test_taxonomy_to_route(self, doc, route):
        assert select_route(validate_contract(doc)) is route

    def test_single_action_counts_as_one_binding(self):
        contract = validate_contract({
            "task_class": "configuration",
            "parameters": {"requested_action": "delete_calibration"}})
        assert select_route(contract) is Route.DIRECT_SKILL


class TestDirectSkill:
    def test_set_center(self, kb):
        graph = plan(kb, "Set the center frequency to 3 GHz.")
        assert graph.route is Route.DIRECT_SKILL
        assert node_ids(graph) == ["connect", "set_center_frequency"]
        bind = graph.node("set_center_frequency").bind
        assert bind["center_frequency_hz"] == {"source": "const", "value": 3e9}
        assert route_label(graph) == "Direct skill"

    def test_state_query_composes_report(self, kb):
        graph = plan(kb, "Query the current IF bandwidth.")
        assert node_ids(graph) == ["connect", "query_if_bandwidth", "report"]
        bind = graph.node("report").bind
        assert bind["label"] == {"source": "const", "value": "IF bandwidth"}
        assert bind["value"] == {"source": "output", "node": "query_if_bandwidth",
                                 "output": "if_bandwidth_hz"}
        assert route_label(graph) == "Direct query"

    def test_graph_serialization_carries_no_instrument_syntax(self, kb):
        import json

        from rfagent.scpi.grammar import is_scpi_text

        graph = plan(kb, "Set the center frequency to 3 GHz.")
        doc = json.dumps(graph.to_dict())
        assert "SENS:" not in doc
        for token in doc.replace('"', " ").split():
            assert not is_scpi_text(token), token


class TestLinearWorkflows:
    def test_acquisition_uses_range_template(self, kb):
        graph = plan(kb, "Measure S11 from 3 GHz to 5 GHz.")
        assert graph.template_name == "sparameter_acquisition"
        assert node_ids(graph) == ["connect", "configure_range", "acquire"]
        assert route_label(graph) == "Linear workflow"

    def test_center_span_contract_derives_endpoints(self, kb):
        contract = validate_contract({
            "task_class": "acquisition",
            "parameters": {"s_parameter": "S11", "center_frequency_hz": 4e9,
                           "span_hz": 2e9}})
        graph = validate_structure(compile_contract(contract, kb), contract, kb)
        bind = graph.node("configure_range").bind
        assert bind["start_frequency_hz"]["value"] == 3e9
        assert bind["stop_frequency_hz"]["value"] == 5e9

    def test_multi_field_configuration_orders_canonically(self, kb):
        contract = validate_contract({
            "task_class": "configuration",
            "parameters": {"sweep_points": 501, "center_frequency_hz": 3e9,
                           "if_bandwidth_hz": 1e3}})
        graph = validate_structure(compile_contract(contract, kb), contract, kb)
        assert node_ids(graph) == [
            "connect", "set_center_frequency", "set_sweep_points",
            "set_if_bandwidth"]

    def test_start_and_stop_collapse_to_range_skill(self, kb):
        contract = validate_contract({
            "task_class": "configuration",
            "parameters": {"start_frequency_hz": 1e9, "stop_frequency_hz": 2e9}})
        graph = validate_structure(compile_contract(contract, kb), contract, kb)
        assert node_ids(graph) == ["connect", "configure_frequency_range"]
        assert graph.route is Route.LINEAR_WORKFLOW


class TestSegmentedAcquisition:
    UTTERANCE = ("Perform segmented S21 measurements with 101 points over "
                 "1-3 GHz, 501 points over 5-7 GHz, and 1001 points over "
                 "8-11 GHz; store the data in the database and report key "
                 "information.")

    def test_template_expansion(self, kb):
        graph = plan(kb, self.UTTERANCE)
        assert graph.template_name == "segment_acquisition"
        assert node_ids(graph) == [
            "connect",
            "configure_segment_1", "points_segment_1", "acquire_segment_1",
            "configure_segment_2", "points_segment_2", "acquire_segment_2",
            "configure_segment_3", "points_segment_3", "acquire_segment_3",
            "store", "report"]
        assert route_label(graph) == "Multi-segment workflow"

    def test_segment_bindings_and_annotation(self, kb):
        graph = plan(kb, self.UTTERANCE)
        assert graph.node("configure_segment_2").bind == {
            "start_frequency_hz": {"source": "const", "value": 5e9},
            "stop_frequency_hz": {"source": "const", "value": 7e9}}
        assert graph.node("acquire_segment_2").segment == {
            "start_hz": 5e9, "stop_hz": 7e9, "sweep_points": 501}

    def test_gather_binding_lists_all_segments(self, kb):
        graph = plan(kb, self.UTTERANCE)
        assert graph.node("store").bind["records"] == {
            "source": "gather",
            "nodes": ["acquire_segment_1", "acquire_segment_2",
                      "acquire_segment_3"]}


class TestToolAugmented:
    def test_analysis_appends_tool_and_report(self, kb):
        graph = plan(kb, "Measure S11 from 3 GHz to 5 GHz and summarize the "
                         "magnitude range.")
        assert graph.route is Route.TOOL_AUGMENTED_WORKFLOW
        assert graph.template_name == "analyze_magnitude_range"
        assert node_ids(graph) == [
            "connect", "configure_range", "acquire", "analyze", "report"]
        assert route_label(graph) == "Tool-augmented workflow"

    def test_multipath_estimation_topology(self, kb):
        graph = plan(kb, "Measure the channel response between ports 1 and 2 "
                         "of the VNA with a center frequency of 2.5 GHz and a "
                         "bandwidth of 40 MHz, and estimate the channel "
                         "parameters from the measured response.")
        assert graph.template_name == "multipath_estimation"
        assert node_ids(graph) == [
            "connect", "set_center", "set_span", "set_points", "create_meas",
            "trigger", "read_trace", "read_axis", "estimate"]
        assert graph.node("estimate").kind is NodeKind.TOOL


class TestHybridGraph:
    UTTERANCE = ("Perform an initial wideband scan, identify the candidate "
                 "resonance interval of the antenna connected to port 1, and "
                 "adaptively refine the scan to determine the resonance "
                 "frequency.")

    def test_topology_and_loop(self, kb):
        graph = plan(kb, self.UTTERANCE)
        assert graph.route is Route.HYBRID_EXECUTION_GRAPH
        assert graph.template_name == "resonance_search"
        assert len(graph.nodes) == 15
        assert graph.loop.member_ids == [
            "trigger", "read_trace", "read_axis", "detect", "check",
            "refine", "apply_center", "apply_span"]
        assert graph.loop.max_iterations == 8
        assert graph.loop.condition_node == "check"
        assert route_label(graph) == "Hybrid execution graph"

    def test_wideband_seed_window(self, kb):
        graph = plan(kb, self.UTTERANCE)
        assert graph.node("set_center").bind["center_frequency_hz"]["value"] == 3e9
        assert graph.node("set_span").bind["span_hz"]["value"] == 2e9
        assert graph.node("set_points").bind["sweep_points"]["value"] == 1601

    def test_refinement_node_reads_live_state(self, kb):
        graph = plan(kb, self.UTTERANCE)
        bind = graph.node("refine").bind
        assert bind["center_hz"] == {"source": "state",
                                     "field": "center_frequency_hz"}
        assert bind["f_min_hz"] == {"source": "output", "node": "detect",
                                    "output": "f_min_hz"}


class TestRuleEnforcement:
    def test_power_clamp_annotation(self, kb):
        graph = plan(kb, "Set the output power to 25 dBm and then measure "
                         "S11 from 3 GHz to 5 GHz.")
        assert graph.node("set_power").bind["output_power_dbm"]["value"] == 10.0
        clamps = [a for a in graph.safety_annotations if a["kind"] == "clamp"]
        assert clamps == [{
            "kind": "clamp", "rule": "max_output_power", "node": "set_power",
            "field": "output_power_dbm", "requested": 25.0, "applied": 10.0}]
        assert route_label(graph) == "Rule-aware workflow"

    def test_calibration_delete_vetoed(self, kb):
        graph = plan(kb, "Delete the local calibration set to reset the "
                         "instrument.")
        assert graph.veto is not None
        assert graph.veto.rule_name == "calibration_protection"
        assert graph.veto.node_id == "delete_calibration"
        assert route_label(graph) == "Rule-blocked path"

    def test_acquire_without_configure_vetoed(self, kb):
        contract = validate_contract({
            "task_class": "acquisition",
            "parameters": {"s_parameter": "S11", "start_frequency_hz": 1e9,
                           "stop_frequency_hz": 2e9}})
        graph = ExecutableTaskGraph(
            route=Route.LINEAR_WORKFLOW,
            task_class=TaskClass.ACQUISITION,
            template_name=None,
            nodes=[
                GraphNode(id="connect", kind=NodeKind.SKILL,
                          resource="connect_instrument"),
                GraphNode(id="acquire", kind=NodeKind.ACQUISITION,
                          resource="acquire_sparameter_trace",
                          bind={"s_parameter": {"source": "const",
                                                "value": "S11"}}),
            ])
        checked = validate_structure(graph, contract, kb)
        assert checked.veto.rule_name == "configure_before_acquire"

    def test_flag_coverage_annotations(self, kb):
        graph = plan(kb, "Set the output power to 25 dBm and then measure "
                         "S11 from 3 GHz to 5 GHz.")
        coverage = {a["flag"]: a["rule"] for a in graph.safety_annotations
                    if a["kind"] == "flag_coverage"}
        assert coverage["power_limit_check"] == "max_output_power"
        assert coverage["rf_output_check"] == "power_readback_required"


class TestReadbackInjection:
    def test_set_without_readback_gets_verify_node(self, kb):
        import copy

        patched = copy.copy(kb)
        patched.skills = dict(kb.skills)
        bare = kb.skills["set_output_power"]
        patched.skills["set_output_power"] = dataclasses.replace(
            bare,
            readback_query=None,
            verification_rule=[r for r in bare.verification_rule
                               if r.kind is VerificationKind.ERROR_QUEUE_EMPTY],
        )
        contract = validate_contract({
            "task_class": "configuration",
            "parameters": {"output_power_dbm": -5.0}})
        graph = validate_structure(
            compile_contract(contract, patched), contract, patched)
        assert node_ids(graph) == [
            "connect", "set_output_power", "verify_set_output_power"]
        verify = graph.node("verify_set_output_power")
        assert verify.kind is NodeKind.VERIFICATION
        assert verify.resource == "query_output_power"
        assert verify.bind["expected"] == {"source": "const", "value": -5.0}
        kinds = [a["kind"] for a in graph.safety_annotations]
        assert "inject_verification" in kinds


class TestPreconditionWalk:
    def test_promised_by_earlier_node(self, kb):
        # create_meas promises active_measurement, so trigger is satisfied
        graph = plan(kb, "Measure the channel response between ports 1 and 2 "
                         "of the VNA with a center frequency of 2.5 GHz and a "
                         "bandwidth of 40 MHz, and estimate the channel "
                         "parameters from the measured response.")
        assert "trigger" in node_ids(graph)

    def test_unqueryable_unmet_precondition_fails_the_plan(self, kb):
        contract = validate_contract({
            "task_class": "acquisition",
            "parameters": {"s_parameter": "S11", "start_frequency_hz": 1e9,
                           "stop_frequency_hz": 2e9}})
        graph = ExecutableTaskGraph(
            route=Route.LINEAR_WORKFLOW,
            task_class=TaskClass.ACQUISITION,
            template_name=None,
            nodes=[
                GraphNode(id="connect", kind=NodeKind.SKILL,
                          resource="connect_instrument"),
                GraphNode(id="configure_range", kind=NodeKind.SKILL,
                          resource="configure_frequency_range"),
                GraphNode(id="trigger", kind=NodeKind.SKILL,
                          resource="trigger_sweep"),
            ])
        with pytest.raises(PlanError, match="active_measurement"):
            validate_structure(graph, contract, kb)

    def test_confirmed_snapshot_field_counts_as_promised(self, kb):
        state = StateManager()
        state.commit("setup", {"active_measurement": "S11"})
        contract = validate_contract({
            "task_class": "acquisition",
            "parameters": {"s_parameter": "S11", "start_frequency_hz": 1e9,
                           "stop_frequency_hz": 2e9}})
        graph = ExecutableTaskGraph(
            route=Route.LINEAR_WORKFLOW,
            task_class=TaskClass.ACQUISITION,
            template_name=None,
            nodes=[
                GraphNode(id="connect", kind=NodeKind.SKILL,
                          resource="connect_instrument"),
                GraphNode(id="configure_range", kind=NodeKind.SKILL,
                          resource="configure_frequency_range"),
                GraphNode(id="trigger", kind=NodeKind.SKILL,
                          resource="trigger_sweep"),
            ])
        checked = validate_structure(graph, contract, kb,
                                     snapshot=state.snapshot())
        assert checked.veto is None

    def test_queryable_precondition_injects_requery(self, kb):
        import copy

        patched = copy.copy(kb)
        patched.skills = dict(kb.skills)
        guarded = dataclasses.replace(
            kb.skills["trigger_sweep"],
            preconditions=[Precondition(field="sweep_points", op="ge", value=2)])
        patched.skills["trigger_sweep"] = guarded
        contract = validate_contract({
            "task_class": "acquisition",
            "parameters": {"s_parameter": "S11", "start_frequency_hz": 1e9,
                           "stop_frequency_hz": 2e9}})
        graph = ExecutableTaskGraph(
            route=Route.LINEAR_WORKFLOW,
            task_class=TaskClass.ACQUISITION,
            template_name=None,
            nodes=[
                GraphNode(id="connect", kind=NodeKind.SKILL,
                          resource="connect_instrument"),
                GraphNode(id="configure_range", kind=NodeKind.SKILL,
                          resource="configure_frequency_range"),
                GraphNode(id="trigger", kind=NodeKind.SKILL,
                          resource="trigger_sweep"),
            ])
        checked = validate_structure(graph, contract, patched)
        ids = node_ids(checked)
        assert "requery_sweep_points" in ids
        assert ids.index("requery_sweep_points") < ids.index("trigger")


class TestCompileErrors:
    def test_unbound_required_input_fails(self, kb):
        contract = validate_contract({"task_class": "configuration"})
        with pytest.raises(PlanError):
            compile_contract(contract, kb)

    def test_conversational_compiles_to_empty_graph(self, kb):
        contract = validate_contract({"task_class": "conversational",
                                      "utterance": "hello"})
        graph = compile_contract(contract, kb)
        assert graph.route is Route.RESPONSE_ONLY
        assert graph.nodes == []
        assert route_label(graph) == "Response only"
