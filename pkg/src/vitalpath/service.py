"""HTTP surface over the runtime, plus the config file that boots it.

Endpoints (JSON request/response):

    GET  /graphs
    POST /sessions {graph_id}
    GET  /sessions/{id}/view
    POST /sessions/{id}/advance {choice}
    POST /sessions/{id}/undo
    POST /sessions/{id}/verdict {requirement, accept}
    GET  /sessions/{id}/export
    POST /patient/entries {kind, value}
    GET  /vitals
    GET  /alarms[?state=open|accepted|dismissed]
    POST /alarms/{id}/verdict {decision, target_graph?, target_node?}
    GET  /events            (server-sent events)

GETs never mutate state. The device listener runs alongside on its own
port speaking the line-delimited wire protocol.
"""
from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

from .alarms import (
    AlarmState,
    AlreadyResolvedError,
    MissingTargetError,
    UnknownAlarmError,
    VerdictDecision,
    load_thresholds,
)
from .device import BindError, DeviceListener, DeviceMessage
from .dosage import load_dosage_rules
from .graph import DOSAGE_RULES_FILENAME, GraphError, load_graph_dir
from .navigator import (
    DEFAULT_CLEAR_MARGIN,
    InvalidChoiceError,
    InvalidGraphError,
    NothingToUndoError,
    TerminalReachedError,
    UnknownRequirementError,
)
from .runtime import (
    ManualClock,
    MonotonicClock,
    Runtime,
    UnknownGraphError,
    UnknownSessionError,
    view_payload,
)
from .store import DEFAULT_STALENESS_MS, SourceClassViolationError, UnitMismatchError
from .vitals import UnknownVitalKindError, parse_kind


class ConfigError(Exception):
    """Config file missing, malformed, or pointing at bad inputs."""


_CONFIG_KEYS = {
    "graph_dir",
    "thresholds",
    "staleness_ms",
    "clear_margin",
    "debounce_ms",
    "http_port",
    "device_port",
}


@dataclass(frozen=True)
class ServiceConfig:
    graph_dir: Path
    thresholds: Path | None = None
    staleness_ms: float = DEFAULT_STALENESS_MS
    clear_margin: float = DEFAULT_CLEAR_MARGIN
    debounce_ms: int = 60_000
    http_port: int = 8800
    device_port: int = 8801


def parse_config(payload: Any, *, base_dir: Path | None = None) -> ServiceConfig:
    """Validate the config object; relative paths resolve against base_dir."""
    if not isinstance(payload, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(payload) - _CONFIG_KEYS
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    if "graph_dir" not in payload:
        raise ConfigError("config requires graph_dir")
    base = base_dir if base_dir is not None else Path.cwd()

    def _path(value: Any, key: str) -> Path:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string path")
        p = Path(value)
        return p if p.is_absolute() else base / p

    def _number(key: str, default: float, minimum: float) -> float:
        value = payload.get(key, default)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{key} must be a number")
        if value < minimum:
            raise ConfigError(f"{key} must be >= {minimum}")
        return value

    def _port(key: str, default: int) -> int:
        value = payload.get(key, default)
        if not isinstance(value, int) or isinstance(value, bool) or not (0 <= value <= 65535):
            raise ConfigError(f"{key} must be a port number")
        return value

    return ServiceConfig(
        graph_dir=_path(payload["graph_dir"], "graph_dir"),
        thresholds=_path(payload["thresholds"], "thresholds") if "thresholds" in payload else None,
        staleness_ms=float(_number("staleness_ms", DEFAULT_STALENESS_MS, 0.0)),
        clear_margin=float(_number("clear_margin", DEFAULT_CLEAR_MARGIN, 0.0)),
        debounce_ms=int(_number("debounce_ms", 60_000, 0.0)),
        http_port=_port("http_port", 8800),
        device_port=_port("device_port", 8801),
    )


def load_config(path: str | Path) -> ServiceConfig:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(payload, base_dir=path.parent)


def build_runtime(
    config: ServiceConfig,
    *,
    clock: ManualClock | MonotonicClock | None = None,
    log_path: str | None = None,
) -> Runtime:
    """Load graphs, dosage rules, and thresholds, and assemble a runtime."""
    if not config.graph_dir.is_dir():
        raise ConfigError(f"graph_dir {config.graph_dir} is not a directory")
    try:
        graphs = load_graph_dir(config.graph_dir)
    except GraphError as exc:
        raise ConfigError(f"graph_dir {config.graph_dir}: {exc}") from exc
    rules_path = config.graph_dir / DOSAGE_RULES_FILENAME
    dosage_rules = load_dosage_rules(rules_path) if rules_path.is_file() else {}
    thresholds = load_thresholds(config.thresholds) if config.thresholds is not None else []
    return Runtime(
        graphs,
        dosage_rules=dosage_rules,
        thresholds=thresholds,
        clock=clock,
        staleness_ms=config.staleness_ms,
        clear_margin=config.clear_margin,
        debounce_ms=config.debounce_ms,
        log_path=log_path,
    )


class _HTTPError(Exception):
    def __init__(self, status: int, code: str, detail: str):
        super().__init__(detail)
        self.status = status
        self.code = code
        self.detail = detail


_SESSION_ROUTE = re.compile(r"^/sessions/([^/]+)/(view|advance|undo|verdict|export)$")
_ALARM_ROUTE = re.compile(r"^/alarms/([^/]+)/verdict$")


def _make_handler(service: "Service") -> type[BaseHTTPRequestHandler]:
    runtime = service.runtime

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "vitalpath"

        def log_message(self, format: str, *args: Any) -> None:
            pass  # request logging handled by the session log, not stderr

        # -- plumbing ------------------------------------------------------

        def _send_json(self, status: int, payload: dict[str, Any]) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _read_json(self) -> dict[str, Any]:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if not raw:
                return {}
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise _HTTPError(400, "bad_json", str(exc)) from exc
            if not isinstance(payload, dict):
                raise _HTTPError(400, "bad_json", "body must be a JSON object")
            return payload

        def _dispatch(self, method: str) -> None:
            path = self.path.split("?", 1)[0]
            try:
                handler = self._route(method, path)
                handler()
            except _HTTPError as exc:
                self._send_json(exc.status, {"error": exc.code, "detail": exc.detail})
            except BrokenPipeError:
                pass
            except Exception as exc:  # noqa: BLE001 - last-resort 500
                self._send_json(500, {"error": "internal", "detail": str(exc)})

        def _route(self, method: str, path: str):
            if path == "/graphs" and method == "GET":
                return self._get_graphs
            if path == "/sessions" and method == "POST":
                return self._post_sessions
            if path == "/patient/entries" and method == "POST":
                return self._post_patient_entry
            if path == "/vitals" and method == "GET":
                return self._get_vitals
            if path == "/alarms" and method == "GET":
                return self._get_alarms
            if path == "/events" and method == "GET":
                return self._get_events
            m = _SESSION_ROUTE.match(path)
            if m:
                session_id, action = m.groups()
                expected = "GET" if action in ("view", "export") else "POST"
                if method != expected:
                    raise _HTTPError(405, "method_not_allowed", f"{action} is {expected}")
                return lambda: self._session_action(session_id, action)
            m = _ALARM_ROUTE.match(path)
            if m:
                if method != "POST":
                    raise _HTTPError(405, "method_not_allowed", "verdict is POST")
                return lambda: self._post_alarm_verdict(m.group(1))
            raise _HTTPError(404, "not_found", f"no route for {method} {path}")

        # -- endpoints ------------------------------------------------------

        def _get_graphs(self) -> None:
            graphs = [
                {
                    "id": g.id,
                    "title": g.title,
                    "kind": g.kind.value,
                    "entry": g.entry,
                    "node_count": len(g.nodes),
                }
                for g in sorted(runtime.graphs.values(), key=lambda g: g.id)
            ]
            self._send_json(200, {"graphs": graphs})

        def _post_sessions(self) -> None:
            body = self._read_json()
            graph_id = body.get("graph_id")
            if not isinstance(graph_id, str):
                raise _HTTPError(400, "bad_request", "graph_id required")
            try:
                session = runtime.create_session(graph_id)
            except UnknownGraphError as exc:
                raise _HTTPError(404, "unknown_graph", str(exc)) from exc
            except InvalidGraphError as exc:
                raise _HTTPError(409, "invalid_graph", str(exc)) from exc
            view = runtime.view(session.id)
            self._send_json(201, {"session_id": session.id, "view": view_payload(view)})

        def _session_action(self, session_id: str, action: str) -> None:
            try:
                if action == "view":
                    view = runtime.view(session_id)
                    self._send_json(200, {"session_id": session_id, "view": view_payload(view)})
                elif action == "export":
                    records = runtime.export_session(session_id)
                    self._send_json(200, {"session_id": session_id, "records": records})
                elif action == "advance":
                    body = self._read_json()
                    choice = body.get("choice")
                    if not isinstance(choice, str):
                        raise _HTTPError(400, "bad_request", "choice required")
                    view = runtime.advance(session_id, choice)
                    self._send_json(200, {"session_id": session_id, "view": view_payload(view)})
                elif action == "undo":
                    view = runtime.undo(session_id)
                    self._send_json(200, {"session_id": session_id, "view": view_payload(view)})
                else:  # verdict
                    body = self._read_json()
                    requirement = body.get("requirement")
                    accept = body.get("accept")
                    if not isinstance(requirement, str) or not isinstance(accept, bool):
                        raise _HTTPError(400, "bad_request", "requirement and accept required")
                    kind = parse_kind(requirement)
                    view = runtime.record_verdict(session_id, kind, accept)
                    self._send_json(200, {"session_id": session_id, "view": view_payload(view)})
            except UnknownSessionError as exc:
                raise _HTTPError(404, "unknown_session", str(exc)) from exc
            except InvalidChoiceError as exc:
                raise _HTTPError(
                    400,
                    "invalid_choice",
                    str(exc),
                ) from exc
            except TerminalReachedError as exc:
                raise _HTTPError(409, "terminal_reached", str(exc)) from exc
            except NothingToUndoError as exc:
                raise _HTTPError(409, "nothing_to_undo", str(exc)) from exc
            except UnknownRequirementError as exc:
                raise _HTTPError(400, "unknown_requirement", str(exc)) from exc
            except UnknownVitalKindError as exc:
                raise _HTTPError(400, "unknown_kind", str(exc)) from exc

        def _post_patient_entry(self) -> None:
            body = self._read_json()
            kind_name = body.get("kind")
            value = body.get("value")
            if not isinstance(kind_name, str) or not isinstance(value, (int, float)):
                raise _HTTPError(400, "bad_request", "kind and numeric value required")
            try:
                kind = parse_kind(kind_name)
                ack = runtime.patient_entry(kind, float(value))
            except UnknownVitalKindError as exc:
                raise _HTTPError(400, "unknown_kind", str(exc)) from exc
            except SourceClassViolationError as exc:
                raise _HTTPError(400, "source_class", str(exc)) from exc
            except UnitMismatchError as exc:
                raise _HTTPError(400, "unit_mismatch", str(exc)) from exc
            self._send_json(
                200,
                {
                    "accepted": ack.accepted,
                    "duplicate": ack.duplicate,
                    "latest_updated": ack.latest_updated,
                },
            )

        def _get_vitals(self) -> None:
            self._send_json(200, runtime.vitals_snapshot())

        def _get_alarms(self) -> None:
            query = self.path.split("?", 1)
            state = None
            if len(query) == 2:
                for pair in query[1].split("&"):
                    if pair.startswith("state="):
                        try:
                            state = AlarmState(pair.split("=", 1)[1])
                        except ValueError as exc:
                            raise _HTTPError(400, "bad_request", "bad state filter") from exc
            alarms = [a.payload() for a in runtime.monitor.list_alarms(state)]
            self._send_json(200, {"alarms": alarms})

        def _post_alarm_verdict(self, alarm_id: str) -> None:
            body = self._read_json()
            decision_name = body.get("decision")
            try:
                decision = VerdictDecision(decision_name)
            except ValueError as exc:
                raise _HTTPError(400, "bad_request", "decision must be accept_change or dismiss") from exc
            target_graph = body.get("target_graph")
            target_node = body.get("target_node")
            if target_graph is not None and not isinstance(target_graph, str):
                raise _HTTPError(400, "bad_request", "target_graph must be a string")
            if target_node is not None and not isinstance(target_node, str):
                raise _HTTPError(400, "bad_request", "target_node must be a string")
            try:
                alarm = runtime.alarm_verdict(
                    alarm_id, decision, target_graph=target_graph, target_node=target_node
                )
            except UnknownAlarmError as exc:
                raise _HTTPError(404, "unknown_alarm", str(exc)) from exc
            except AlreadyResolvedError as exc:
                raise _HTTPError(409, "already_resolved", str(exc)) from exc
            except MissingTargetError as exc:
                raise _HTTPError(400, "missing_target", str(exc)) from exc
            self._send_json(200, {"alarm": alarm.payload()})

        def _get_events(self) -> None:
            """Server-sent events; one `data:` line per runtime event."""
            sub = runtime.bus.subscribe()
            try:
                self.send_response(200)
                self.send_header("Content-Type", "text/event-stream")
                self.send_header("Cache-Control", "no-cache")
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                while not service.stopping.is_set():
                    event = sub.pop(timeout=0.25)
                    if event is None:
                        if sub.closed:
                            break
                        self.wfile.write(b": keepalive\n\n")
                        self.wfile.flush()
                        continue
                    data = json.dumps(event)
                    self.wfile.write(f"data: {data}\n\n".encode("utf-8"))
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError, OSError):
                pass
            finally:
                runtime.bus.unsubscribe(sub)

        def do_GET(self) -> None:  # noqa: N802 - http.server API
            self._dispatch("GET")

        def do_POST(self) -> None:  # noqa: N802 - http.server API
            self._dispatch("POST")

    return Handler


class Service:
    """HTTP server + device listener around one runtime."""

    def __init__(
        self,
        runtime: Runtime,
        *,
        host: str = "127.0.0.1",
        http_port: int = 0,
        device_port: int | None = 0,
    ):
        self.runtime = runtime
        self.host = host
        self.stopping = threading.Event()
        self._requested_http_port = http_port
        self._http: ThreadingHTTPServer | None = None
        self._http_thread: threading.Thread | None = None
        self.listener: DeviceListener | None = None
        if device_port is not None:
            self.listener = DeviceListener(self._deliver, host=host, port=device_port)

    def _deliver(self, message: DeviceMessage) -> None:
        self.runtime.ingest(message.to_reading())

    @property
    def http_port(self) -> int:
        if self._http is None:
            raise RuntimeError("service not started")
        return self._http.server_address[1]

    @property
    def device_port(self) -> int | None:
        if self.listener is None:
            return None
        return self.listener.port

    def start(self) -> None:
        handler = _make_handler(self)
        try:
            server = ThreadingHTTPServer((self.host, self._requested_http_port), handler)
        except OSError as exc:
            raise BindError(f"cannot bind {self.host}:{self._requested_http_port}: {exc}") from None
        server.daemon_threads = True
        self._http = server
        # small poll interval keeps shutdown() snappy
        self._http_thread = threading.Thread(
            target=lambda: server.serve_forever(poll_interval=0.05), daemon=True
        )
        self._http_thread.start()
        if self.listener is not None:
            try:
                self.listener.start()
            except BindError:
                self.stop()
                raise

    def stop(self) -> None:
        self.stopping.set()
        if self.listener is not None:
            self.listener.stop()
        if self._http is not None:
            self._http.shutdown()
            self._http.server_close()
        if self._http_thread is not None:
            self._http_thread.join(timeout=2.0)
        self.runtime.close()


def serve(config: ServiceConfig, *, log_path: str | None = None) -> Service:
    """Boot a service per the config; caller owns stop()."""
    runtime = build_runtime(config, log_path=log_path)
    service = Service(
        runtime,
        http_port=config.http_port,
        device_port=config.device_port,
    )
    service.start()
    return service
