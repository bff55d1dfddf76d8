"""TCP SCPI simulator for a two-port vector network analyzer.

Wire behavior: UTF-8 text, LF-terminated messages, one response line per
query, no response to set commands. Multiple client sessions are accepted;
command processing is serialized on one instrument lock so the instrument
looks single-threaded from outside.

Settable values are validated before they touch state: an out-of-range set
leaves state unchanged and pushes -222 onto the error queue. Unknown headers
push -113. Setting start above stop (or stop below start) drags the other
endpoint along, as bench instruments do; center/span sets that would push the
window outside the supported range are rejected instead.

Fault scripts exist for tests: a directive can replace a query response,
push an extra error, swallow a response (client side sees a timeout), or
drop the connection, the nth time a given command arrives.
"""

from __future__ import annotations

import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import dut as dut_models
from .grammar import (
    ParseErrorKind,
    ScpiCommand,
    ScpiParseError,
    command_spec,
    format_number,
    parse,
)

IDENTITY = "RFIA-SIM,VNA-3671C-EMU,0,1.0"

SWEEP_POINTS_RANGE = (2, 100001)
IF_BANDWIDTH_RANGE = (1.0, 1.0e7)


@dataclass
class FaultDirective:
    """Scripted misbehavior bound to the nth arrival of one command."""

    header: str
    is_query: bool | None = None
    action: str = "respond"  # respond | push_error | silent | close
    value: str = ""
    code: int = -300
    message: str = "Device-specific error"
    skip: int = 0  # matches to ignore before firing
    times: int = 1  # how often to fire before expiring

    _seen: int = 0
    _fired: int = 0

    def matches(self, cmd: ScpiCommand) -> bool:
        if self._fired >= self.times:
            return False
        if cmd.header != self.header:
            return False
        if self.is_query is not None and cmd.is_query != self.is_query:
            return False
        self._seen += 1
        if self._seen <= self.skip:
            return False
        self._fired += 1
        return True


@dataclass
class SimulatorConfig:
    port: int = 0
    dut: dut_models.DutModel = field(default_factory=dut_models.ThroughLine)
    frequency_range_hz: tuple[float, float] = (1.0e7, 2.65e10)
    power_range_dbm: tuple[float, float] = (-45.0, 20.0)
    response_latency_ms: float = 0.0
    noise_floor_db: float | None = -90.0
    noise_seed: int = 0
    fault_script: list[FaultDirective] = field(default_factory=list)


@dataclass
class InstrumentState:
    center_hz: float = 5.0e9
    span_hz: float = 1.0e9
    sweep_points: int = 201
    if_bandwidth_hz: float = 1.0e3
    power_dbm: float = -10.0
    measurement_name: str | None = None
    s_parameter: str | None = None
    calibration_present: bool = True

    @property
    def start_hz(self) -> float:
        return self.center_hz - self.span_hz / 2.0

    @property
    def stop_hz(self) -> float:
        return self.center_hz + self.span_hz / 2.0


class Instrument:
    """Command interpreter plus instrument state; independent of transport."""

    def __init__(self, config: SimulatorConfig):
        self.config = config
        self.state = InstrumentState()
        self.error_queue: list[tuple[int, str]] = []
        self.sweep_index = 0
        self.sweep_done_at = 0.0
        self.lock = threading.RLock()

    # -- error queue ------------------------------------------------------

    def push_error(self, code: int, message: str) -> None:
        self.error_queue.append((code, message))

    def pop_error(self) -> str:
        if self.error_queue:
            code, message = self.error_queue.pop(0)
            return f'{code},"{message}"'
        return '0,"No error"'

    # -- state helpers ----------------------------------------------------

    def _freq_ok(self, start: float, stop: float) -> bool:
        lo, hi = self.config.frequency_range_hz
        return lo <= start <= stop <= hi

    def _set_window(self, center: float, span: float) -> bool:
        if span < 0 or not self._freq_ok(center - span / 2.0, center + span / 2.0):
            self.push_error(-222, "Data out of range")
            return False
        self.state.center_hz = center
        self.state.span_hz = span
        return True

    def grid(self) -> np.ndarray:
        s = self.state
        return np.linspace(s.start_hz, s.stop_hz, s.sweep_points)

    def sweep_duration_s(self) -> float:
        return (self.config.response_latency_ms + 0.1 * self.state.sweep_points) / 1000.0

    def reset(self) -> None:
        self.state = InstrumentState()

    # -- dispatch ---------------------------------------------------------

    def handle(self, line: str) -> tuple[str | None, float]:
        """Process one message; returns (response or None, seconds to wait first)."""
        try:
            cmd = parse(line)
        except ScpiParseError as err:
            if err.kind is ParseErrorKind.UNKNOWN_HEADER:
                self.push_error(-113, "Undefined header")
            else:
                self.push_error(-104, "Data type error")
            return None, 0.0

        for directive in self.config.fault_script:
            if directive.matches(cmd):
                if directive.action == "respond":
                    return directive.value, 0.0
                if directive.action == "push_error":
                    self.push_error(directive.code, directive.message)
                    break  # fall through to normal handling
                if directive.action == "silent":
                    return None, 0.0
                if directive.action == "close":
                    raise ConnectionAbortedError("fault script closed session")

        spec = command_spec(cmd.path)
        if cmd.is_query and not spec.queryable or (not cmd.is_query and not spec.settable):
            self.push_error(-113, "Undefined header")
            return None, 0.0
        return self._execute(cmd)

    def _execute(self, cmd: ScpiCommand) -> tuple[str | None, float]:
        header = cmd.header
        s = self.state

        if header == "*IDN":
            return IDENTITY, 0.0
        if header == "*RST":
            self.reset()
            return None, 0.0
        if header == "*OPC":
            return "1", max(0.0, self.sweep_done_at - time.monotonic())
        if header == "SYST:ERR":
            return self.pop_error(), 0.0

        if header in ("SENS:FREQ:CENT", "SENS:FREQ:SPAN", "SENS:FREQ:STAR", "SENS:FREQ:STOP"):
            return self._freq_command(cmd)

        if header == "SENS:FREQ:DATA":
            return ",".join(format_number(f) for f in self.grid()), 0.0

        if header == "SENS:SWE:POIN":
            if cmd.is_query:
                return str(s.sweep_points), 0.0
            n = self._numeric_arg(cmd)
            if n is None:
                return None, 0.0
            if n != int(n):
                self.push_error(-224, "Illegal parameter value")
            elif not SWEEP_POINTS_RANGE[0] <= int(n) <= SWEEP_POINTS_RANGE[1]:
                self.push_error(-222, "Data out of range")
            else:
                s.sweep_points = int(n)
            return None, 0.0

        if header == "SENS:BAND":
            if cmd.is_query:
                return format_number(s.if_bandwidth_hz), 0.0
            n = self._numeric_arg(cmd)
            if n is None:
                return None, 0.0
            if not IF_BANDWIDTH_RANGE[0] <= n <= IF_BANDWIDTH_RANGE[1]:
                self.push_error(-222, "Data out of range")
            else:
                s.if_bandwidth_hz = n
            return None, 0.0

        if header == "SOUR:POW":
            if cmd.is_query:
                return format_number(s.power_dbm), 0.0
            n = self._numeric_arg(cmd)
            if n is None:
                return None, 0.0
            lo, hi = self.config.power_range_dbm
            if not lo <= n <= hi:
                self.push_error(-222, "Data out of range")
            else:
                s.power_dbm = n
            return None, 0.0

        if header == "CALC:PAR:DEF":
            if len(cmd.args) != 2:
                self.push_error(-109, "Missing parameter")
                return None, 0.0
            name, sparam = cmd.args
            if not isinstance(sparam, str) or sparam.upper() not in ("S11", "S21", "S12", "S22"):
                self.push_error(-224, "Illegal parameter value")
                return None, 0.0
            s.measurement_name = str(name)
            s.s_parameter = sparam.upper()
            return None, 0.0

        if header == "INIT:IMM":
            self.sweep_index += 1
            self.sweep_done_at = time.monotonic() + self.sweep_duration_s()
            return None, 0.0

        if header == "CALC:DATA":
            if not (len(cmd.args) == 1 and isinstance(cmd.args[0], str) and cmd.args[0].upper() == "SDATA"):
                self.push_error(-224, "Illegal parameter value")
                return "", 0.0
            if s.s_parameter is None:
                self.push_error(-221, "Settings conflict")
                return "", 0.0
            values = dut_models.evaluate(
                self.config.dut,
                s.s_parameter,
                self.grid(),
                self.config.noise_floor_db,
                self.config.noise_seed,
                self.sweep_index,
            )
            interleaved: list[str] = []
            for v in values:
                interleaved.append(format_number(float(v.real)))
                interleaved.append(format_number(float(v.imag)))
            return ",".join(interleaved), 0.0

        if header == "CAL:DEL":
            # Deliberately unguarded at the wire: protection is an agent concern.
            s.calibration_present = False
            return None, 0.0

        raise AssertionError(f"unhandled command {header}")

    def _numeric_arg(self, cmd: ScpiCommand) -> float | None:
        if len(cmd.args) != 1:
            self.push_error(-109, "Missing parameter")
            return None
        if not isinstance(cmd.args[0], float):
            self.push_error(-104, "Data type error")
            return None
        return cmd.args[0]

    def _freq_command(self, cmd: ScpiCommand) -> tuple[str | None, float]:
        s = self.state
        which = cmd.path[-1]
        if cmd.is_query:
            value = {
                "CENT": s.center_hz,
                "SPAN": s.span_hz,
                "STAR": s.start_hz,
                "STOP": s.stop_hz,
            }[which]
            return format_number(value), 0.0
        n = self._numeric_arg(cmd)
        if n is None:
            return None, 0.0
        lo, hi = self.config.frequency_range_hz
        if which == "CENT":
            self._set_window(n, s.span_hz)
        elif which == "SPAN":
            self._set_window(s.center_hz, n)
        elif which == "STAR":
            if not lo <= n <= hi:
                self.push_error(-222, "Data out of range")
            else:
                stop = max(n, s.stop_hz)
                self._set_window((n + stop) / 2.0, stop - n)
        elif which == "STOP":
            if not lo <= n <= hi:
                self.push_error(-222, "Data out of range")
            else:
                start = min(n, s.start_hz)
                self._set_window((start + n) / 2.0, n - start)
        return None, 0.0


class _Handler(socketserver.StreamRequestHandler):
    def setup(self) -> None:
        self.request.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        super().setup()

    def handle(self) -> None:  # one connection, many lines
        instrument: Instrument = self.server.instrument  # type: ignore[attr-defined]
        while True:
            try:
                raw = self.rfile.readline()
            except (ConnectionError, OSError):
                return
            if not raw:
                return
            line = raw.decode("utf-8", errors="replace")
            try:
                with instrument.lock:
                    response, wait_s = instrument.handle(line)
            except ConnectionAbortedError:
                try:
                    self.connection.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                return
            if wait_s > 0:
                time.sleep(wait_s)
            if response is not None:
                try:
                    self.wfile.write((response + "\n").encode("utf-8"))
                except (ConnectionError, OSError):
                    return


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


@dataclass
class SimulatorHandle:
    host: str
    port: int
    instrument: Instrument
    _server: _Server
    _thread: threading.Thread

    def set_fault_script(self, script: list[FaultDirective]) -> None:
        with self.instrument.lock:
            self.instrument.config.fault_script = script

    def set_dut(self, model: dut_models.DutModel) -> None:
        with self.instrument.lock:
            self.instrument.config.dut = model

    def set_noise_seed(self, seed: int) -> None:
        with self.instrument.lock:
            self.instrument.config.noise_seed = seed

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def join(self) -> None:
        """Block until the server thread exits (stop() from elsewhere)."""
        self._thread.join()

    def __enter__(self) -> "SimulatorHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(config: SimulatorConfig | None = None, host: str = "127.0.0.1") -> SimulatorHandle:
    """Start the simulator in a background thread; port 0 picks a free port."""
    config = replace(config) if config is not None else SimulatorConfig()
    instrument = Instrument(config)
    server = _Server((host, config.port), _Handler)
    server.instrument = instrument  # type: ignore[attr-defined]
    thread = threading.Thread(target=server.serve_forever, name="vna-sim", daemon=True)
    thread.start()
    return SimulatorHandle(
        host=host,
        port=server.server_address[1],
        instrument=instrument,
        _server=server,
        _thread=thread,
    )
