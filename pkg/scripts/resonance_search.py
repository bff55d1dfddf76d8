#!/usr/bin/env python3
"""Closed-loop resonance search against the simulated antenna.

Spawns a simulator with a one-port resonator, hands the agent the
wideband-scan-then-refine request, and narrates how the sweep window
narrows until the dip estimate converges.

    python scripts/resonance_search.py --resonance-ghz 3.575946 --q 200
"""

import argparse
import sys

from rfagent import knowledge
from rfagent.intent import IntentService
from rfagent.planner import compile_contract, validate_structure
from rfagent.runtime import Executor
from rfagent.scpi.dut import ResonantAntenna
from rfagent.scpi.simulator import SimulatorConfig, serve
from rfagent.state import StateManager

UTTERANCE = ("Perform an initial wideband scan, identify the candidate "
             "resonance interval of the antenna connected to port 1, and "
             "adaptively refine the scan to determine the resonance frequency.")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--resonance-ghz", type=float, default=3.575946)
    parser.add_argument("--q", type=float, default=200.0)
    parser.add_argument("--depth-db", type=float, default=-30.0)
    parser.add_argument("--noise-seed", type=int, default=0)
    args = parser.parse_args()

    antenna = ResonantAntenna(resonance_hz=args.resonance_ghz * 1e9,
                              q_factor=args.q, match_depth_db=args.depth_db)
    handle = serve(SimulatorConfig(dut=antenna, noise_seed=args.noise_seed))
    kb = knowledge.builtin()
    try:
        contract = IntentService().understand(UTTERANCE)
        graph = validate_structure(compile_contract(contract, kb), contract, kb)
        print(f"device resonance at {antenna.resonance_hz / 1e9:.6f} GHz, "
              f"Q {antenna.q_factor:g}, depth {antenna.match_depth_db:g} dB")
        print(f"seed window: center 3 GHz, span 2 GHz, 1601 points\n")

        state = StateManager()
        result = Executor(kb, state, handle.host, handle.port).run(graph)

        window = {}
        step = 0
        for event in result.events:
            if event["event"] != "commit" or event["node_id"] not in (
                    "apply_center", "apply_span"):
                continue
            window.update(event["payload"]["values"])
            if event["node_id"] == "apply_span":
                step += 1
                print(f"  refine {step}: center "
                      f"{window['center_frequency_hz'] / 1e9:.6f} GHz, span "
                      f"{window['span_hz'] / 1e6:g} MHz")

        if result.status != "completed":
            print(f"\nrun failed at {result.failure.node_id}: "
                  f"{result.failure.detail}")
            return 1
        detect = result.outputs["detect"]
        error_khz = abs(detect["f_min_hz"] - antenna.resonance_hz) / 1e3
        print(f"\nconverged after {result.iterations} iterations")
        print(f"estimate {detect['f_min_hz'] / 1e9:.6f} GHz "
              f"({detect['min_db']:.2f} dB), error {error_khz:.1f} kHz")
        return 0
    finally:
        handle.stop()


if __name__ == "__main__":
    sys.exit(main())
