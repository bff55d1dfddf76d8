from .client import ScpiSession, TransportError, TransportErrorKind, parse_float_list
from .dut import (
    BandpassLink,
    DutModel,
    MultipathChannel,
    PathComponent,
    ResonantAntenna,
    ThroughLine,
    scenario,
)
from .grammar import (
    COMMAND_TABLE,
    ScpiCommand,
    ScpiParseError,
    format_number,
    is_scpi_text,
    parse,
    parse_number,
)
from .simulator import (
    IDENTITY,
    FaultDirective,
    Instrument,
    SimulatorConfig,
    SimulatorHandle,
    serve,
)

__all__ = [
    "BandpassLink",
    "COMMAND_TABLE",
    "DutModel",
    "FaultDirective",
    "IDENTITY",
    "Instrument",
    "MultipathChannel",
    "PathComponent",
    "ResonantAntenna",
    "ScpiCommand",
    "ScpiParseError",
    "ScpiSession",
    "SimulatorConfig",
    "SimulatorHandle",
    "ThroughLine",
    "TransportError",
    "TransportErrorKind",
    "format_number",
    "is_scpi_text",
    "parse",
    "parse_float_list",
    "parse_number",
    "scenario",
    "serve",
]
