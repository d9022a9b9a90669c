"""Simulated monitor transport: wire decoding, a stream-socket listener, and
a trace replayer.

The wire format is one JSON object per newline-terminated line with fields
`device`, `kind`, `value`, `t` (integer ms). A malformed line never kills a
connection: it is counted and skipped, and decoding resumes on the next
line. Trace files are a JSON array of `[offset_ms, message]` pairs with
non-decreasing offsets.
"""
from __future__ import annotations

import json
import random
import socket
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from .store import UnitMismatchError, VitalReading
from .vitals import UnknownVitalKindError, VitalKind, parse_kind


class ProtocolError(Exception):
    """One bad wire line. reason is a stable machine-readable code."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


class TraceFormatError(Exception):
    """Trace document malformed or offsets not non-decreasing."""


class BindError(Exception):
    """Listener endpoint could not be bound."""


@dataclass(frozen=True)
class DeviceMessage:
    device_id: str
    kind: VitalKind
    value: float
    timestamp: int

    def to_reading(self) -> VitalReading:
        return VitalReading(
            kind=self.kind, value=self.value, timestamp=self.timestamp, origin=self.device_id
        )


def decode_message(line: bytes | str) -> DeviceMessage:
    """Decode one wire line into a DeviceMessage.

    Unknown extra fields are tolerated; missing or mistyped required fields
    raise ProtocolError with a reason code (not_json, not_object,
    missing_field, bad_field, unknown_kind).
    """
    if isinstance(line, bytes):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError("not_json", f"bad utf-8: {exc}") from None
    else:
        text = line
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError("not_json", str(exc)) from None
    if not isinstance(data, dict):
        raise ProtocolError("not_object", f"got {type(data).__name__}")
    for field in ("device", "kind", "value", "t"):
        if field not in data:
            raise ProtocolError("missing_field", field)
    device = data["device"]
    if not isinstance(device, str) or not device:
        raise ProtocolError("bad_field", "device must be a non-empty string")
    kind_name = data["kind"]
    if not isinstance(kind_name, str):
        raise ProtocolError("bad_field", "kind must be a string")
    try:
        kind = parse_kind(kind_name)
    except UnknownVitalKindError:
        raise ProtocolError("unknown_kind", kind_name) from None
    value = data["value"]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ProtocolError("bad_field", "value must be a number")
    t = data["t"]
    if not isinstance(t, int) or isinstance(t, bool) or t < 0:
        raise ProtocolError("bad_field", "t must be a non-negative integer")
    try:
        return DeviceMessage(device_id=device, kind=kind, value=float(value), timestamp=t)
    except ValueError as exc:
        raise ProtocolError("bad_field", str(exc)) from None


def encode_message(message: DeviceMessage) -> bytes:
    payload = {
        "device": message.device_id,
        "kind": message.kind.value,
        "value": message.value,
        "t": message.timestamp,
    }
    return json.dumps(payload, ensure_ascii=False).encode("utf-8") + b"\n"


# --- traces ----------------------------------------------------------------

@dataclass(frozen=True)
class TraceEntry:
    offset_ms: int
    message: DeviceMessage


@dataclass(frozen=True)
class TraceFile:
    entries: tuple[TraceEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


def parse_trace(data: Any) -> TraceFile:
    """Validate a decoded JSON trace: array of [offset_ms, message] pairs."""
    if not isinstance(data, list):
        raise TraceFormatError("trace must be a JSON array")
    entries: list[TraceEntry] = []
    previous = None
    for i, item in enumerate(data):
        if not isinstance(item, list) or len(item) != 2:
            raise TraceFormatError(f"entry {i}: must be [offset_ms, message]")
        offset, raw = item
        if not isinstance(offset, int) or isinstance(offset, bool) or offset < 0:
            raise TraceFormatError(f"entry {i}: offset must be a non-negative integer")
        if previous is not None and offset < previous:
            raise TraceFormatError(f"entry {i}: offset {offset} decreases from {previous}")
        previous = offset
        try:
            message = decode_message(json.dumps(raw))
        except ProtocolError as exc:
            raise TraceFormatError(f"entry {i}: {exc}") from None
        entries.append(TraceEntry(offset_ms=offset, message=message))
    return TraceFile(entries=tuple(entries))


def load_trace(path: str | Path) -> TraceFile:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"not valid JSON: {exc}") from None
    return parse_trace(data)


@dataclass(frozen=True)
class ReplayReport:
    delivered: int
    dropped: int
    rejected: int

    @property
    def skipped(self) -> int:
        return self.dropped + self.rejected


def replay_trace(
    trace: TraceFile,
    deliver: Callable[[DeviceMessage], object],
    *,
    speed: float | None = None,
    drop_fraction: float = 0.0,
    seed: int = 0,
) -> ReplayReport:
    """Deliver trace messages in offset order.

    speed=None is instant mode: delivery is synchronous and deterministic.
    A finite speed sleeps offset deltas scaled by 1/speed. drop_fraction
    randomly (seeded, deterministic) drops messages to exercise
    unknown/stale paths downstream. Deliveries rejected by the sink with
    UnitMismatchError are counted, not fatal.
    """
    rng = random.Random(seed)
    delivered = dropped = rejected = 0
    previous_offset = 0
    for entry in trace.entries:
        if speed is not None:
            delta_ms = entry.offset_ms - previous_offset
            if delta_ms > 0 and speed > 0:
                time.sleep(delta_ms / 1000.0 / speed)
            previous_offset = entry.offset_ms
        if drop_fraction > 0.0 and rng.random() < drop_fraction:
            dropped += 1
            continue
        try:
            deliver(entry.message)
        except UnitMismatchError:
            rejected += 1
            continue
        delivered += 1
    return ReplayReport(delivered=delivered, dropped=dropped, rejected=rejected)


# --- listener ---------------------------------------------------------------

class DeviceListener:
    """Accepts concurrent line-delimited JSON connections and forwards decoded
    messages to a sink in per-connection arrival order.

    Malformed lines and sink rejections are counted and skipped; the
    connection stays open.
    """

    def __init__(
        self,
        sink: Callable[[DeviceMessage], object],
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self._sink = sink
        self._host = host
        self._requested_port = port
        self._server: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._connections: set[socket.socket] = set()
        self._counter_lock = threading.Lock()
        self._stopping = threading.Event()
        self.delivered = 0
        self.protocol_errors = 0
        self.rejected = 0

    @property
    def port(self) -> int:
        if self._server is None:
            raise RuntimeError("listener not started")
        return self._server.getsockname()[1]

    def start(self) -> None:
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            server.bind((self._host, self._requested_port))
        except OSError as exc:
            server.close()
            raise BindError(f"cannot bind {self._host}:{self._requested_port}: {exc}") from None
        server.listen()
        self._server = server
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def stop(self) -> None:
        self._stopping.set()
        if self._server is not None:
            # a blocked accept() does not notice close(); poke it awake first
            try:
                with socket.create_connection((self._host, self.port), timeout=0.5):
                    pass
            except OSError:
                pass
            try:
                self._server.close()
            except OSError:
                pass
        with self._counter_lock:
            connections = list(self._connections)
        for conn in connections:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2.0)

    def _accept_loop(self) -> None:
        assert self._server is not None
        while not self._stopping.is_set():
            try:
                conn, _addr = self._server.accept()
            except OSError:
                return
            with self._counter_lock:
                self._connections.add(conn)
            thread = threading.Thread(target=self._serve_connection, args=(conn,), daemon=True)
            thread.start()

    def _serve_connection(self, conn: socket.socket) -> None:
        try:
            with conn, conn.makefile("rb") as stream:
                for line in stream:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        message = decode_message(line)
                    except ProtocolError:
                        with self._counter_lock:
                            self.protocol_errors += 1
                        continue
                    try:
                        self._sink(message)
                    except UnitMismatchError:
                        with self._counter_lock:
                            self.rejected += 1
                        continue
                    with self._counter_lock:
                        self.delivered += 1
        except OSError:
            pass
        finally:
            with self._counter_lock:
                self._connections.discard(conn)


def send_lines(host: str, port: int, lines: Sequence[bytes]) -> None:
    """Test/demo helper: open one device connection and push raw lines."""
    with socket.create_connection((host, port)) as sock:
        for line in lines:
            if not line.endswith(b"\n"):
                line += b"\n"
            sock.sendall(line)
