"""Line-oriented SCPI session over TCP."""

from __future__ import annotations

import socket
from enum import Enum


class TransportErrorKind(str, Enum):
    TIMEOUT = "timeout"
    CLOSED = "closed"


class TransportError(ConnectionError):
    def __init__(self, kind: TransportErrorKind, detail: str):
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail


class ScpiSession:
    """One TCP connection speaking LF-terminated SCPI.

    Non-query commands produce no response by protocol, so send_command
    returns immediately; query waits for exactly one response line.
    """

    def __init__(self, host: str, port: int, timeout_s: float = 10.0):
        self.host = host
        self.port = port
        self.timeout_s = timeout_s
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout_s)
            self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        except OSError as err:
            raise TransportError(TransportErrorKind.CLOSED, f"connect failed: {err}") from err
        self._buffer = b""

    def send_command(self, line: str) -> None:
        try:
            self._sock.sendall((line.strip() + "\n").encode("utf-8"))
        except OSError as err:
            raise TransportError(TransportErrorKind.CLOSED, str(err)) from err

    def query(self, line: str, timeout_s: float | None = None) -> str:
        self.send_command(line)
        return self.read_line(timeout_s)

    def read_line(self, timeout_s: float | None = None) -> str:
        self._sock.settimeout(timeout_s if timeout_s is not None else self.timeout_s)
        while b"\n" not in self._buffer:
            try:
                chunk = self._sock.recv(65536)
            except socket.timeout as err:
                raise TransportError(TransportErrorKind.TIMEOUT, line_hint(self._buffer)) from err
            except OSError as err:
                raise TransportError(TransportErrorKind.CLOSED, str(err)) from err
            if not chunk:
                raise TransportError(TransportErrorKind.CLOSED, "peer closed connection")
            self._buffer += chunk
        raw, self._buffer = self._buffer.split(b"\n", 1)
        return raw.decode("utf-8").rstrip("\r")

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "ScpiSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def line_hint(buffer: bytes) -> str:
    return f"no response line ({len(buffer)} bytes buffered)"


def parse_float_list(response: str) -> list[float]:
    """Split a comma-separated numeric response."""
    text = response.strip()
    if not text:
        return []
    return [float(part) for part in text.split(",")]
