"""Intent service: provider dispatch plus deterministic safety screening.

Safety flags are attached here, after understanding and before planning, so
they do not depend on which provider produced the contract. Flagging is
idempotent: re-marking an already flagged contract changes nothing.
"""

from __future__ import annotations

from dataclasses import replace

from ..contracts import (
    OutputFormat,
    RequestedAction,
    SafetyFlag,
    SafetyFlagKind,
    TaskContract,
)
from .providers import DeterministicProvider, IntentProvider

WIDEBAND_SPAN_HZ = 5e9


def mark_safety(contract: TaskContract) -> TaskContract:
    """Attach risk flags derived from contract content."""
    flags = list(contract.safety_flags)
    present = {f.kind for f in flags}

    def add(kind: SafetyFlagKind, detail: str) -> None:
        if kind not in present:
            flags.append(SafetyFlag(kind=kind, detail=detail))
            present.add(kind)

    p = contract.parameters
    if p.output_power_dbm is not None:
        add(SafetyFlagKind.POWER_LIMIT_CHECK, f"requested {p.output_power_dbm:g} dBm")
        add(SafetyFlagKind.RF_OUTPUT_CHECK, "source power change requested")
    if p.requested_action is RequestedAction.DELETE_CALIBRATION:
        add(SafetyFlagKind.CALIBRATION_PROTECTION, "calibration deletion requested")
    spans = []
    if p.span_hz is not None:
        spans.append(p.span_hz)
    if p.start_frequency_hz is not None and p.stop_frequency_hz is not None:
        spans.append(p.stop_frequency_hz - p.start_frequency_hz)
    for seg in p.segments or []:
        spans.append(seg.stop_hz - seg.start_hz)
    wide = [s for s in spans if s > WIDEBAND_SPAN_HZ]
    if wide:
        add(SafetyFlagKind.WIDEBAND_SWEEP_CHECK, f"span {max(wide):g} Hz exceeds 5 GHz")
    if p.output_format in (OutputFormat.DATABASE_RECORD, OutputFormat.TRACE_FILE):
        add(SafetyFlagKind.FILE_OVERWRITE_PROTECTION, "persistent storage requested")
    if flags == contract.safety_flags:
        return contract
    return replace(contract, safety_flags=flags)


class IntentService:
    """Understand an utterance and screen it for risk flags."""

    def __init__(self, provider: IntentProvider | None = None) -> None:
        self.provider = provider or DeterministicProvider()

    def understand(self, utterance: str) -> TaskContract:
        return mark_safety(self.provider.understand(utterance))
