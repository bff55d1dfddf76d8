"""Sixteen-intent regression benchmark.

Each case runs against a fresh simulator loaded with the device model its
scenario calls for, through a fresh gateway so session state never leaks
between cases. The report records, per case, the route the planner chose,
the final outcome, and the wall time, against the expected values.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .. import knowledge
from ..scpi import dut
from ..scpi.simulator import SimulatorConfig, serve
from .service import Gateway, GatewayConfig
from .store import RunStore

SCENARIOS = {
    "through_line": dut.ThroughLine,
    "resonant_antenna": dut.ResonantAntenna,
    "bandpass_link": dut.BandpassLink,
    "multipath_channel": dut.MultipathChannel,
}


@dataclass(frozen=True)
class BenchCase:
    tag: str
    utterance: str
    expected_route_label: str
    expected_outcome: str
    scenario: str

    def to_dict(self) -> dict[str, str]:
        return {
            "tag": self.tag,
            "utterance": self.utterance,
            "expected_route_label": self.expected_route_label,
            "expected_outcome": self.expected_outcome,
            "scenario": self.scenario,
        }


BENCHMARK_CASES: tuple[BenchCase, ...] = (
    BenchCase("E1", "Set the center frequency to 3 GHz.",
              "Direct skill", "Completed", "through_line"),
    BenchCase("E2", "Change the span bandwidth to 100 MHz.",
              "Direct skill", "Completed", "through_line"),
    BenchCase("E3", "Set the number of sweep points to 501.",
              "Direct skill", "Completed", "through_line"),
    BenchCase("E4", "Query the current number of sweep points.",
              "Direct query", "Completed", "through_line"),
    BenchCase("E5", "Query the current IF bandwidth.",
              "Direct query", "Completed", "through_line"),
    BenchCase("E6", "Query the current output power.",
              "Direct query", "Completed", "through_line"),
    BenchCase("E7", "Measure S11 from 3 GHz to 5 GHz.",
              "Linear workflow", "Completed", "through_line"),
    BenchCase("E8", "Measure S21 from 4 GHz to 6 GHz.",
              "Linear workflow", "Completed", "through_line"),
    BenchCase("E9", "Delete the local calibration set to reset the instrument.",
              "Rule-blocked path", "Blocked", "through_line"),
    BenchCase("M1", "Measure S11 from 3 GHz to 5 GHz and summarize the magnitude range.",
              "Tool-augmented workflow", "Completed", "resonant_antenna"),
    BenchCase("M2", "Measure S21 from 10 GHz to 12 GHz and report the dominant peak.",
              "Tool-augmented workflow", "Completed", "bandpass_link"),
    BenchCase("M3", "Measure S11 from 3 GHz to 5 GHz and report the minimum magnitude.",
              "Tool-augmented workflow", "Completed", "resonant_antenna"),
    BenchCase("M4", "Set the output power to 25 dBm and then measure S11 from 3 GHz to 5 GHz.",
              "Rule-aware workflow", "Completed", "through_line"),
    BenchCase("H1", "Perform an initial wideband scan, identify the candidate resonance "
                    "interval of the antenna connected to port 1, and adaptively refine "
                    "the scan to determine the resonance frequency.",
              "Hybrid execution graph", "Completed", "resonant_antenna"),
    BenchCase("H2", "Measure the channel response between ports 1 and 2 of the VNA with "
                    "a center frequency of 2.5 GHz and a bandwidth of 40 MHz, and "
                    "estimate the channel parameters from the measured response.",
              "Tool-augmented workflow", "Completed", "multipath_channel"),
    BenchCase("H3", "Perform segmented S21 measurements with 101 points over 1-3 GHz, "
                    "501 points over 5-7 GHz, and 1001 points over 8-11 GHz; store the "
                    "data in the database and report key information.",
              "Multi-segment workflow", "Completed", "through_line"),
)


def run_case(
    case: BenchCase,
    kb: knowledge.KnowledgeBase,
    store: RunStore,
    noise_seed: int = 0,
) -> dict[str, Any]:
    model = SCENARIOS[case.scenario]()
    handle = serve(SimulatorConfig(dut=model, noise_seed=noise_seed))
    try:
        gateway = Gateway(
            kb,
            store,
            GatewayConfig(instrument_host=handle.host, instrument_port=handle.port,
                          session_name=f"bench-{case.tag}"),
        )
        t0 = time.perf_counter()
        record = gateway.run_intent(case.utterance)
        duration = time.perf_counter() - t0
    finally:
        handle.stop()
    label = record.get("route_label", "")
    outcome = record.get("outcome", "")
    return {
        **case.to_dict(),
        "run_id": record["run_id"],
        "route_label": label,
        "outcome": outcome,
        "route_match": label == case.expected_route_label,
        "outcome_match": outcome == case.expected_outcome,
        "duration_s": duration,
        "summary": record.get("summary", ""),
    }


def run_benchmark(
    store_root: str | Path | None = None,
    kb: knowledge.KnowledgeBase | None = None,
    noise_seed: int = 0,
) -> dict[str, Any]:
    kb = kb or knowledge.builtin()
    if store_root is None:
        store_root = tempfile.mkdtemp(prefix="rfagent-bench-")
    store = RunStore(store_root)
    t0 = time.perf_counter()
    cases = [run_case(case, kb, store, noise_seed) for case in BENCHMARK_CASES]
    total = time.perf_counter() - t0
    route_matches = sum(c["route_match"] for c in cases)
    outcome_matches = sum(c["outcome_match"] for c in cases)
    return {
        "cases": cases,
        "total_duration_s": total,
        "case_count": len(cases),
        "route_matches": route_matches,
        "outcome_matches": outcome_matches,
        "all_match": route_matches == len(cases) and outcome_matches == len(cases),
        "store_root": str(store_root),
    }


def format_report(report: dict[str, Any]) -> str:
    lines = [
        f"{'tag':4} {'route':26} {'outcome':10} {'time':>7}  ok",
        "-" * 60,
    ]
    for c in report["cases"]:
        ok = "yes" if (c["route_match"] and c["outcome_match"]) else "NO"
        lines.append(
            f"{c['tag']:4} {c['route_label']:26} {c['outcome']:10} "
            f"{c['duration_s'] * 1e3:6.0f}ms  {ok}"
        )
    lines.append("-" * 60)
    lines.append(
        f"{report['route_matches']}/{report['case_count']} routes, "
        f"{report['outcome_matches']}/{report['case_count']} outcomes, "
        f"{report['total_duration_s']:.1f}s total"
    )
    return "\n".join(lines)
