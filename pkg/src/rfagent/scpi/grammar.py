"""SCPI command grammar for the emulated VNA.

The grammar is deliberately closed: it knows exactly the command set the
bundled instrument simulator implements. Parsing yields a canonical form
(short mnemonics, uppercase) so the rest of the stack can compare commands
textually without worrying about long/short spelling or case.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

# Short form -> accepted long form. A token is valid if it equals either
# spelling case-insensitively.
_MNEMONICS: dict[str, str] = {
    "SENS": "SENSE",
    "FREQ": "FREQUENCY",
    "CENT": "CENTER",
    "SPAN": "SPAN",
    "STAR": "START",
    "STOP": "STOP",
    "DATA": "DATA",
    "SWE": "SWEEP",
    "POIN": "POINTS",
    "BAND": "BANDWIDTH",
    "SOUR": "SOURCE",
    "POW": "POWER",
    "CALC": "CALCULATE",
    "PAR": "PARAMETER",
    "DEF": "DEFINE",
    "INIT": "INITIATE",
    "IMM": "IMMEDIATE",
    "CAL": "CALIBRATION",
    "DEL": "DELETE",
    "SYST": "SYSTEM",
    "ERR": "ERROR",
}

_LONG_TO_SHORT = {long: short for short, long in _MNEMONICS.items()}


@dataclass(frozen=True)
class CommandSpec:
    """One entry of the instrument command table."""

    path: tuple[str, ...]
    settable: bool
    queryable: bool
    description: str = ""

    @property
    def header(self) -> str:
        return ":".join(self.path)


# The complete command table of the simulator. Star commands keep their
# leading ``*`` as part of the single path token.
COMMAND_TABLE: tuple[CommandSpec, ...] = (
    CommandSpec(("*IDN",), settable=False, queryable=True, description="identity"),
    CommandSpec(("*RST",), settable=True, queryable=False, description="preset"),
    CommandSpec(("*OPC",), settable=False, queryable=True, description="operation complete"),
    CommandSpec(("SYST", "ERR"), settable=False, queryable=True, description="error queue"),
    CommandSpec(("SENS", "FREQ", "CENT"), settable=True, queryable=True),
    CommandSpec(("SENS", "FREQ", "SPAN"), settable=True, queryable=True),
    CommandSpec(("SENS", "FREQ", "STAR"), settable=True, queryable=True),
    CommandSpec(("SENS", "FREQ", "STOP"), settable=True, queryable=True),
    CommandSpec(("SENS", "FREQ", "DATA"), settable=False, queryable=True),
    CommandSpec(("SENS", "SWE", "POIN"), settable=True, queryable=True),
    CommandSpec(("SENS", "BAND"), settable=True, queryable=True),
    CommandSpec(("SOUR", "POW"), settable=True, queryable=True),
    CommandSpec(("CALC", "PAR", "DEF"), settable=True, queryable=False),
    CommandSpec(("CALC", "DATA"), settable=False, queryable=True),
    CommandSpec(("INIT", "IMM"), settable=True, queryable=False),
    CommandSpec(("CAL", "DEL"), settable=True, queryable=False),
)

_TABLE_BY_PATH = {spec.path: spec for spec in COMMAND_TABLE}

# Frequency style unit suffixes scale the value; DBM is a unit marker only.
_UNIT_SCALE = {"GHZ": 1e9, "MHZ": 1e6, "KHZ": 1e3, "HZ": 1.0, "DBM": 1.0}

_NUMBER_RE = re.compile(
    r"^(?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(?P<unit>[A-Za-z]+)?$"
)


class ParseErrorKind(str, Enum):
    UNKNOWN_HEADER = "unknown_header"
    BAD_ARGUMENT = "bad_argument"


class ScpiParseError(ValueError):
    def __init__(self, kind: ParseErrorKind, detail: str):
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail


@dataclass
class ScpiCommand:
    """Parsed command in canonical form."""

    path: tuple[str, ...]
    args: list[float | str] = field(default_factory=list)
    is_query: bool = False

    @property
    def header(self) -> str:
        return ":".join(self.path)

    def canonical(self) -> str:
        head = self.header + ("?" if self.is_query else "")
        if not self.args:
            return head
        return head + " " + ",".join(format_number(a) if isinstance(a, float) else str(a) for a in self.args)


def _canonical_mnemonic(token: str) -> str | None:
    up = token.upper()
    if up in _MNEMONICS:
        return up
    return _LONG_TO_SHORT.get(up)


def parse_number(text: str) -> float:
    """Parse an NRf numeric with optional GHZ/MHZ/KHZ/HZ/DBM suffix."""
    m = _NUMBER_RE.match(text.strip())
    if not m:
        raise ScpiParseError(ParseErrorKind.BAD_ARGUMENT, f"not a number: {text!r}")
    value = float(m.group("num"))
    unit = m.group("unit")
    if unit is not None:
        scale = _UNIT_SCALE.get(unit.upper())
        if scale is None:
            raise ScpiParseError(ParseErrorKind.BAD_ARGUMENT, f"unknown unit: {unit!r}")
        value *= scale
    return value


def format_number(value: float) -> str:
    """Response formatting: integers bare, reals scientific, 9 significant digits."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return f"{value:.8E}"


def parse(line: str) -> ScpiCommand:
    """Parse one program message into its canonical command.

    Raises ScpiParseError with kind unknown_header for any header not in the
    instrument table and bad_argument for malformed argument text.
    """
    text = line.strip()
    if not text:
        raise ScpiParseError(ParseErrorKind.BAD_ARGUMENT, "empty message")
    head, _, tail = text.partition(" ")
    head = head.strip()
    is_query = head.endswith("?")
    if is_query:
        head = head[:-1]
    if not head:
        raise ScpiParseError(ParseErrorKind.UNKNOWN_HEADER, "missing header")

    if head.startswith("*"):
        path: tuple[str, ...] = ("*" + head[1:].upper(),)
    else:
        parts = []
        for token in head.split(":"):
            canon = _canonical_mnemonic(token)
            if canon is None:
                raise ScpiParseError(ParseErrorKind.UNKNOWN_HEADER, f"unknown mnemonic {token!r} in {line!r}")
            parts.append(canon)
        path = tuple(parts)

    if path not in _TABLE_BY_PATH:
        raise ScpiParseError(ParseErrorKind.UNKNOWN_HEADER, f"no such command: {':'.join(path)}")

    args: list[float | str] = []
    tail = tail.strip()
    if tail:
        for raw in tail.split(","):
            raw = raw.strip()
            if not raw:
                raise ScpiParseError(ParseErrorKind.BAD_ARGUMENT, "empty argument")
            if _NUMBER_RE.match(raw) and raw[0] in "+-.0123456789":
                args.append(parse_number(raw))
            else:
                # Bare or quoted token argument (measurement names, SDATA, S21).
                args.append(raw.strip('"'))
    return ScpiCommand(path=path, args=args, is_query=is_query)


def command_spec(path: tuple[str, ...]) -> CommandSpec:
    return _TABLE_BY_PATH[path]


def is_scpi_text(text: str) -> bool:
    """True when the string parses as a command of the instrument table.

    Used by the contract validator to keep instrument syntax out of task
    contracts. Bare numbers and names like ``S21`` do not count; they fail
    header resolution.
    """
    if not isinstance(text, str):
        return False
    for segment in text.split(";"):
        segment = segment.strip()
        if not segment:
            continue
        try:
            parse(segment)
        except ScpiParseError:
            continue
        return True
    return False
