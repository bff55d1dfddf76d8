"""Acceptance gate: the end-to-end claims the package stands behind.

Every test prints a single ``[tag] PASS/FAIL`` verdict line in addition to
the pytest result, so the suite output doubles as a checklist. Tolerances
live in the asserts on purpose; they are the contract, not knobs.
"""

import json
import random
import re
from pathlib import Path

import numpy as np
import pytest

import rfagent.intent as intent_package
from rfagent import knowledge
from rfagent.gateway.bench import BENCHMARK_CASES, run_benchmark
from rfagent.intent import IntentService
from rfagent.planner import compile_contract, validate_structure
from rfagent.rftools.multipath import PathEstimate, multipath_model, sic_multipath
from rfagent.rftools.traces import ComplexTrace, FrequencyAxis
from rfagent.runtime import Executor
from rfagent.scpi.client import ScpiSession
from rfagent.scpi.dut import MultipathChannel, ResonantAntenna
from rfagent.scpi.grammar import format_number
from rfagent.knowledge.types import NodeKind
from rfagent.scpi.simulator import FaultDirective, SimulatorConfig, serve
from rfagent.state import FieldStatus, StateManager

WIRED_KINDS = (NodeKind.SKILL, NodeKind.ACQUISITION, NodeKind.VERIFICATION)

SERVICE = IntentService()


def verdict(tag: str, problems: list[str], detail: str = "") -> None:
    status = "PASS" if not problems else "FAIL"
    print(f"[{tag}] {status} {detail}".rstrip())
    assert not problems, f"[{tag}] " + "; ".join(problems[:20])


def planned(kb, utterance):
    contract = SERVICE.understand(utterance)
    return validate_structure(compile_contract(contract, kb), contract, kb)


def execute(kb, handle, utterance, **kw):
    state = StateManager()
    graph = planned(kb, utterance)
    result = Executor(kb, state, handle.host, handle.port, **kw).run(graph)
    return result, state, graph


@pytest.fixture(scope="module")
def kb():
    return knowledge.builtin()


@pytest.fixture(scope="module")
def benchmark_report(tmp_path_factory):
    return run_benchmark(store_root=tmp_path_factory.mktemp("bench-store"))


def test_benchmark_reproduction(benchmark_report):
    problems = []
    report = benchmark_report
    if report["case_count"] != 16:
        problems.append(f"expected 16 cases, got {report['case_count']}")
    for case in report["cases"]:
        if not case["route_match"]:
            problems.append(
                f"{case['tag']}: route {case['route_label']!r} != "
                f"{case['expected_route_label']!r}")
        if not case["outcome_match"]:
            problems.append(
                f"{case['tag']}: outcome {case['outcome']!r} != "
                f"{case['expected_outcome']!r}")
    blocked = [c for c in report["cases"] if c["outcome"] == "Blocked"]
    if [c["tag"] for c in blocked] != ["E9"]:
        problems.append(f"blocked set {[c['tag'] for c in blocked]} != ['E9']")
    if report["total_duration_s"] >= 120.0:
        problems.append(f"took {report['total_duration_s']:.1f}s (budget 120s)")
    verdict("benchmark", problems,
            f"{report['route_matches']}/16 routes, "
            f"{report['outcome_matches']}/16 outcomes, "
            f"{report['total_duration_s']:.1f}s")


def test_output_power_clamp(kb, sim):
    result, state, _ = execute(
        kb, sim,
        "Set the output power to 25 dBm and then measure S11 from 3 GHz to 5 GHz.")
    problems = []
    if result.status != "completed":
        problems.append(f"run {result.status}: {result.failure}")
    snap = state.snapshot()
    if snap.value_of("output_power_dbm") != 10.0:
        problems.append(f"committed power {snap.value_of('output_power_dbm')!r}")
    if not snap.confirmed("output_power_dbm"):
        problems.append("power not readback-confirmed")
    sent = [io["sent"] for io in result.raw_io]
    if "SOUR:POW?" not in sent:
        problems.append("no power readback on the wire")
    for line in sent:
        m = re.match(r"SOUR:POW (\S+)$", line)
        if m and float(m.group(1)) > 10.0:
            problems.append(f"over-limit power command {line!r}")
    verdict("power-clamp", problems, "25 dBm request capped at 10 dBm on the wire")


def test_closed_loop_resonance(kb):
    target_hz = 3.575946e9
    handle = serve(SimulatorConfig(dut=ResonantAntenna()))
    problems = []
    try:
        graph = planned(
            kb,
            "Perform an initial wideband scan, identify the candidate resonance "
            "interval of the antenna connected to port 1, and adaptively refine "
            "the scan to determine the resonance frequency.")
        seeds = {
            "set_center": ("center_frequency_hz", 3e9),
            "set_span": ("span_hz", 2e9),
            "set_points": ("sweep_points", 1601),
        }
        for node_id, (param, expected) in seeds.items():
            got = graph.node(node_id).bind[param]["value"]
            if got != expected:
                problems.append(f"{node_id} seeds {got!r}, wanted {expected!r}")
        state = StateManager()
        result = Executor(kb, state, handle.host, handle.port).run(graph)
        if result.status != "completed":
            problems.append(f"run {result.status}: {result.failure}")
        else:
            snap = state.snapshot()
            if snap.value_of("span_hz") != 1e6:
                problems.append(f"final span {snap.value_of('span_hz')!r} != 1 MHz")
            if result.iterations > 8:
                problems.append(f"{result.iterations} iterations > 8")
            f_est = result.outputs["detect"]["f_min_hz"]
            if abs(f_est - target_hz) > 0.5e6:
                problems.append(f"estimate {f_est / 1e9:.6f} GHz off target")
            depth = result.outputs["detect"]["min_db"]
            if abs(depth - (-30.0)) > 1.0:
                problems.append(f"dip depth {depth:.2f} dB not within 1 dB of -30")
    finally:
        handle.stop()
    detail = "" if problems else (
        f"f_r {result.outputs['detect']['f_min_hz'] / 1e9:.6f} GHz in "
        f"{result.iterations} iterations, final span 1 MHz")
    verdict("resonance-loop", problems, detail)


def test_multipath_estimation(kb):
    utterance = ("Measure the channel response between ports 1 and 2 of the VNA "
                 "with a center frequency of 2.5 GHz and a bandwidth of 40 MHz, "
                 "and estimate the channel parameters from the measured response.")
    runs = []
    problems = []
    for seed in range(5):
        handle = serve(SimulatorConfig(dut=MultipathChannel(), noise_seed=seed))
        try:
            result, _, _ = execute(kb, handle, utterance)
        finally:
            handle.stop()
        if result.status != "completed":
            problems.append(f"seed {seed}: run {result.status}")
            continue
        est = result.outputs["estimate"]
        if len(est["paths"]) != 3:
            problems.append(f"seed {seed}: {len(est['paths'])} paths != 3")
            continue
        if not est["reliable"]:
            problems.append(f"seed {seed}: estimate flagged unreliable")
        runs.append(est)
    if not problems:
        fixed = np.mean([r["fixed_delay_ns"] for r in runs])
        paths = [sorted(r["paths"], key=lambda p: p["rel_delay_ns"]) for r in runs]
        delays = np.mean([[p["rel_delay_ns"] for p in ps] for ps in paths], axis=0)
        powers = np.mean([[p["rel_power_db"] for p in ps] for ps in paths], axis=0)
        residual = np.mean([r["residual_db"] for r in runs])
        explained = np.mean([r["explained_energy_ratio"] for r in runs])
        if abs(fixed - 4504.145) > 0.5:
            problems.append(f"fixed delay {fixed:.3f} ns off 4504.145")
        for got, want in zip(delays[1:], (200.0, 500.0)):
            if abs(got - want) > 2.0:
                problems.append(f"relative delay {got:.2f} ns off {want}")
        for got, want in zip(powers, (0.0, -5.0, -10.0)):
            if abs(got - want) > 0.5:
                problems.append(f"relative power {got:.2f} dB off {want}")
        if residual > -20.0:
            problems.append(f"residual {residual:.2f} dB > -20")
        if explained < 0.99:
            problems.append(f"explained energy {explained:.4f} < 0.99")
        detail = (f"fixed {fixed:.2f} ns, residual {residual:.1f} dB, "
                  f"explained {explained:.3f}, 5 seeds")
    else:
        detail = ""
    verdict("multipath", problems, detail)


# -- randomized fault-injection property run ------------------------------

FAULT_TARGETS = {
    "Set the center frequency to 3 GHz.": ["SENS:FREQ:CENT"],
    "Change the span bandwidth to 100 MHz.": ["SENS:FREQ:SPAN"],
    "Set the number of sweep points to 501.": ["SENS:SWE:POIN"],
    "Measure S11 from 3 GHz to 5 GHz.": [
        "SENS:FREQ:STAR", "SENS:FREQ:STOP", "CALC:PAR:DEF", "CALC:DATA"],
    "Query the current output power.": ["SOUR:POW"],
}

TRUTH_FIELDS = {
    "center_frequency_hz": lambda s: s.center_hz,
    "span_hz": lambda s: s.span_hz,
    "start_frequency_hz": lambda s: s.start_hz,
    "stop_frequency_hz": lambda s: s.stop_hz,
    "sweep_points": lambda s: s.sweep_points,
    "if_bandwidth_hz": lambda s: s.if_bandwidth_hz,
    "output_power_dbm": lambda s: s.power_dbm,
}


def pick_fault(rng, header):
    roll = rng.random()
    if roll < 0.30:
        return []
    if roll < 0.50:
        return [FaultDirective(header, is_query=True, action="respond",
                               value="1.23456789E+10")]
    if roll < 0.70:
        return [FaultDirective(header, is_query=False, action="push_error",
                               code=-300, message="Device specific error")]
    if roll < 0.85:
        return [FaultDirective(header, is_query=rng.random() < 0.5,
                               action="silent")]
    return [FaultDirective(header, is_query=False, action="close")]


def audit_run(result, state, graph, kb, truth, problems, run_no, lied):
    wired = {n.id for n in graph.nodes if n.kind in WIRED_KINDS}
    last_verify = {}
    failed_index = None
    for index, event in enumerate(result.events):
        kind = event["event"]
        if failed_index is not None and kind != "failure":
            problems.append(f"run {run_no}: {kind} event after failure")
        if kind == "verify":
            last_verify[event["node_id"]] = event["payload"].get("outcome")
        elif kind == "commit":
            node_id = event["node_id"]
            if node_id in wired and last_verify.get(node_id) != "ok":
                problems.append(
                    f"run {run_no}: commit at {node_id} without "
                    "an ok verification")
        elif kind == "failure":
            failed_index = index
    if result.status == "failed":
        if result.failure is None or failed_index is None:
            problems.append(f"run {run_no}: failed without a failure report")
            return
        node = next((n for n in graph.nodes if n.id == result.failure.node_id), None)
        skill = kb.skills.get(node.resource) if node is not None else None
        if skill is not None:
            snap = state.snapshot()
            for field in skill.state_updates:
                if snap.status_of(field) is not FieldStatus.INVALID:
                    problems.append(
                        f"run {run_no}: field {field} not invalid after "
                        f"failure at {result.failure.node_id}")
    elif result.failure is not None:
        problems.append(f"run {run_no}: completed run carries a failure report")
    if lied:
        # A falsified readback on a pure query is indistinguishable from a
        # real one; the truth comparison is only sound for honest responses.
        return
    snap = state.snapshot()
    for field, getter in TRUTH_FIELDS.items():
        if not snap.confirmed(field):
            continue
        claimed = float(snap.value_of(field))
        actual = float(getter(truth))
        if abs(claimed - actual) > max(1e-6, 1e-9 * abs(actual)):
            problems.append(
                f"run {run_no}: confirmed {field}={claimed} but "
                f"instrument holds {actual}")


def drain_errors(handle):
    with ScpiSession(handle.host, handle.port, timeout_s=2.0) as session:
        for _ in range(20):
            if session.query("SYST:ERR?").startswith("0,"):
                return


def test_fault_injection_properties(kb):
    rng = random.Random(12345)
    utterances = list(FAULT_TARGETS)
    handle = serve(SimulatorConfig())
    problems: list[str] = []
    failures = 0
    try:
        for run_no in range(1000):
            utterance = rng.choice(utterances)
            header = rng.choice(FAULT_TARGETS[utterance])
            script = pick_fault(rng, header)
            handle.set_fault_script(script)
            result, state, graph = execute(
                kb, handle, utterance, io_timeout_s=0.08)
            if result.status == "failed":
                failures += 1
            lied = any(d.action == "respond" for d in script)
            audit_run(result, state, graph, kb, handle.instrument.state,
                      problems, run_no, lied)
            handle.set_fault_script([])
            drain_errors(handle)
            if len(problems) > 20:
                break
    finally:
        handle.stop()
    verdict("fault-injection", problems,
            f"1000 runs, {failures} faulted and contained, 0 violations")


def test_sic_oracle_equivalence():
    axis = FrequencyAxis(2.4e9, 2.44e9, 1001)  # 25 ns resolution, sep >= 50 ns
    rng = random.Random(20260815)
    problems = []
    for case_no in range(100):
        n_paths = rng.randint(1, 4)
        rel_delays = [0.0]
        while len(rel_delays) < n_paths:
            candidate = rng.uniform(50.0, 2000.0)
            if all(abs(candidate - d) >= 50.0 for d in rel_delays):
                rel_delays.append(candidate)
        rel_delays.sort()
        powers = [0.0] + [rng.uniform(-20.0, -1.0) for _ in rel_delays[1:]]
        fixed = rng.uniform(0.0, 3000.0)
        truth = list(zip(rel_delays, powers))
        trace = ComplexTrace(axis, multipath_model(
            axis.grid(), fixed, [PathEstimate(d, p) for d, p in truth]))
        est = sic_multipath(trace)
        if len(est.paths) != n_paths:
            problems.append(f"case {case_no}: {len(est.paths)} paths != {n_paths}")
            continue
        if abs(est.fixed_delay_ns - fixed) > 0.2:
            problems.append(f"case {case_no}: fixed {est.fixed_delay_ns:.3f} "
                            f"vs {fixed:.3f}")
        got = sorted(est.paths, key=lambda p: p.rel_delay_ns)
        for path, (delay, power) in zip(got, truth):
            if abs(path.rel_delay_ns - delay) > 0.2:
                problems.append(f"case {case_no}: delay {path.rel_delay_ns:.3f} "
                                f"vs {delay:.3f}")
            if abs(path.rel_power_db - power) > 0.05:
                problems.append(f"case {case_no}: power {path.rel_power_db:.3f} "
                                f"vs {power:.3f}")
    verdict("sic-oracle", problems,
            "100 noise-free channels, count exact, ±0.2 ns / ±0.05 dB")


# -- wire-level conformance over random settings ---------------------------

FREQ_LO, FREQ_HI = 1e7, 2.65e10


class _Shadow:
    """Mirror of the instrument's documented set semantics, float-exact."""

    def __init__(self):
        self.center = 5e9
        self.span = 1e9
        self.points = 201
        self.band = 1000.0
        self.power = -10.0

    @property
    def start(self):
        return self.center - self.span / 2.0

    @property
    def stop(self):
        return self.center + self.span / 2.0

    def window_ok(self, center, span):
        return span >= 0 and FREQ_LO <= center - span / 2.0 \
            and center + span / 2.0 <= FREQ_HI


def _conformance_step(rng, shadow, session, problems, step_no):
    field = rng.choice(["CENT", "SPAN", "STAR", "STOP", "POIN", "BAND", "POW"])
    valid = rng.random() < 0.75
    if field == "CENT":
        lo = FREQ_LO + shadow.span / 2.0
        hi = FREQ_HI - shadow.span / 2.0
        value = rng.uniform(lo, hi) if valid else \
            rng.choice([rng.uniform(-1e9, lo - 1e3), rng.uniform(hi + 1e3, 3e10)])
        header = "SENS:FREQ:CENT"
    elif field == "SPAN":
        hi = 2.0 * min(shadow.center - FREQ_LO, FREQ_HI - shadow.center)
        value = rng.uniform(0.0, hi) if valid else \
            rng.choice([rng.uniform(-1e9, -1.0), rng.uniform(hi + 1e3, 6e10)])
        header = "SENS:FREQ:SPAN"
    elif field in ("STAR", "STOP"):
        value = rng.uniform(FREQ_LO, FREQ_HI) if valid else \
            rng.choice([rng.uniform(0.0, FREQ_LO - 1.0), rng.uniform(2.66e10, 3e10)])
        header = f"SENS:FREQ:{field}"
    elif field == "POIN":
        value = float(rng.randint(2, 100001)) if valid else \
            float(rng.choice([0, 1, rng.randint(100002, 200000)]))
        header = "SENS:SWE:POIN"
    elif field == "BAND":
        value = rng.uniform(1.0, 1e7) if valid else \
            rng.choice([rng.uniform(1e-3, 0.99), rng.uniform(1.01e7, 1e9)])
        header = "SENS:BAND"
    else:
        value = rng.uniform(-45.0, 20.0) if valid else \
            rng.choice([rng.uniform(-90.0, -45.01), rng.uniform(20.01, 60.0)])
        header = "SOUR:POW"

    text = format_number(value)
    applied = float(text)
    session.send_command(f"{header} {text}")

    # replicate the documented semantics on the shadow
    if field == "CENT" and shadow.window_ok(applied, shadow.span):
        shadow.center = applied
    elif field == "SPAN" and shadow.window_ok(shadow.center, applied):
        shadow.span = applied
    elif field == "STAR" and FREQ_LO <= applied <= FREQ_HI:
        stop = max(applied, shadow.stop)
        shadow.center, shadow.span = (applied + stop) / 2.0, stop - applied
    elif field == "STOP" and FREQ_LO <= applied <= FREQ_HI:
        start = min(applied, shadow.start)
        shadow.center, shadow.span = (start + applied) / 2.0, applied - start
    elif field == "POIN" and 2 <= applied <= 100001:
        shadow.points = int(applied)
    elif field == "BAND" and 1.0 <= applied <= 1e7:
        shadow.band = applied
    elif field == "POW" and -45.0 <= applied <= 20.0:
        shadow.power = applied
    elif valid:
        raise AssertionError(f"step {step_no}: drew an invalid 'valid' value")
    else:
        error = session.query("SYST:ERR?")
        if not error.startswith("-222,"):
            problems.append(f"step {step_no}: {header} {text} -> {error!r}, "
                            "expected -222")

    readbacks = {
        "SENS:FREQ:CENT?": shadow.center,
        "SENS:FREQ:SPAN?": shadow.span,
        "SENS:FREQ:STAR?": shadow.start,
        "SENS:FREQ:STOP?": shadow.stop,
        "SENS:SWE:POIN?": float(shadow.points),
        "SENS:BAND?": shadow.band,
        "SOUR:POW?": shadow.power,
    }
    for query, expected in readbacks.items():
        got = session.query(query)
        want = str(shadow.points) if query == "SENS:SWE:POIN?" \
            else format_number(expected)
        if got != want:
            problems.append(f"step {step_no}: {query} -> {got!r}, "
                            f"shadow says {want!r}")
    tail = session.query("SYST:ERR?")
    if not tail.startswith("0,"):
        problems.append(f"step {step_no}: stray error {tail!r}")


def test_scpi_conformance():
    rng = random.Random(777)
    handle = serve(SimulatorConfig())
    problems: list[str] = []
    try:
        with ScpiSession(handle.host, handle.port, timeout_s=5.0) as session:
            shadow = _Shadow()
            for step_no in range(500):
                _conformance_step(rng, shadow, session, problems, step_no)
                if len(problems) > 20:
                    break
    finally:
        handle.stop()
    verdict("scpi-conformance", problems,
            "500 randomized sets, readbacks exact, out-of-range -> -222")


RETRIEVAL_CASES = [
    ("set the center frequency of the sweep", "SENSe:FREQuency:CENTer"),
    ("number of sweep points for the trace", "SENSe:SWEep:POINts"),
    ("set the source output power level in dBm", "SOURce:POWer"),
    ("define a measurement parameter such as S21", "CALCulate:PARameter:DEFine"),
    ("trigger a single immediate sweep", "INITiate:IMMediate"),
    ("delete the stored calibration set", "CALibration:DELete"),
    ("enable time domain transform of the trace", "CALCulate:TRANsform:TIME:STATe"),
    ("store the measured trace to mass memory", "MMEMory:STORe:TRACe"),
    ("set the trace averaging count", "SENSe:AVERage:COUNt"),
    ("move marker to an x axis position", "CALCulate:MARKer:X"),
]


def test_retrieval_sanity(kb):
    problems = []
    if len(kb.docs) < 50:
        problems.append(f"corpus has {len(kb.docs)} entries, need >= 50")
    category_of = {doc.command_path: doc.category for doc in kb.docs}
    categories = {category_of[target] for _, target in RETRIEVAL_CASES}
    if len(categories) != 10:
        problems.append(f"targets span {len(categories)} categories, want 10")
    for query, target in RETRIEVAL_CASES:
        top = [hit.entry.command_path for hit in kb.retrieve(query, k=3)]
        if target not in top:
            problems.append(f"{query!r}: {target} not in top 3 {top}")
    verdict("retrieval", problems,
            f"10/10 canned queries hit top-3 over {len(kb.docs)} docs")


# -- LLM isolation: everything on the wire must come from the skill library


def scpi_vocabulary(kb):
    templates = set()
    for skill in kb.skills.values():
        templates.update(skill.scpi_sequence)
        if skill.readback_query:
            templates.add(skill.readback_query)
        templates.update(skill.data_queries.values())
        for rule in skill.verification_rule:
            if rule.query:
                templates.add(rule.query)
    templates.add("SYST:ERR?")
    patterns = []
    for template in sorted(templates):
        escaped = re.escape(template)
        patterns.append(re.compile(
            "^" + re.sub(r"\\\{[a-z0-9_]+\\\}", r"\\S+", escaped) + "$"))
    return patterns


def test_llm_isolation_audit(kb, benchmark_report):
    problems = []
    patterns = scpi_vocabulary(kb)
    store_root = Path(benchmark_report["store_root"])
    records = sorted(store_root.glob("runs/*/record.json"))
    if len(records) != 16:
        problems.append(f"{len(records)} run records, expected 16")
    audited = 0
    for record_path in records:
        record = json.loads(record_path.read_text())
        for io in record["raw_io"]:
            audited += 1
            line = io["sent"]
            if not any(p.match(line) for p in patterns):
                problems.append(
                    f"{record['run_id']}: {line!r} matches no skill template")
    if audited == 0:
        problems.append("no raw_io lines found to audit")
    intent_dir = Path(intent_package.__file__).parent
    for source in sorted(intent_dir.glob("*.py")):
        text = source.read_text()
        if re.search(r"(from|import)\s+\S*\bscpi\b", text) or "ScpiSession" in text:
            problems.append(f"{source.name} reaches into the instrument layer")
    verdict("llm-isolation", problems,
            f"{audited} wire commands all template-instantiated; "
            "intent layer has no instrument imports")
