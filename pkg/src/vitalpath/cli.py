"""Command line entry points.

    vitalpath validate --graphs DIR [--format json|table]
    vitalpath stats    --graphs DIR [--format json|table] [--report-dir DIR]
    vitalpath replay   --graphs DIR --script FILE [--trace FILE] [--config FILE]
                       [--format json|table] [--report-dir DIR] [--log FILE]
    vitalpath serve    --config FILE [--log FILE]

Exit codes: 0 clean, 1 findings (validation failures, script errors
surfaced by the run), 2 unusable input (missing files, bad JSON, bad
config). `replay` is fully deterministic: same inputs, same bytes out.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from .alarms import ThresholdFormatError, VerdictDecision, load_thresholds
from .device import BindError, TraceFormatError, load_trace
from .dosage import DosageError, load_dosage_rules
from .graph import DOSAGE_RULES_FILENAME, GraphError, load_graph_dir
from .navigator import (
    InvalidChoiceError,
    InvalidGraphError,
    NothingToUndoError,
    TerminalReachedError,
    UnknownRequirementError,
)
from .report import write_replay_report, write_stats_report
from .runtime import ManualClock, Runtime, UnknownGraphError, view_payload
from .service import ConfigError, ServiceConfig, load_config, serve
from .stats import vital_occurrence_stats
from .store import DEFAULT_STALENESS_MS, UnitMismatchError
from .vitals import UnknownVitalKindError, parse_kind

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_INPUT = 2


class ScriptError(Exception):
    """Operator script is malformed or does not fit the graph."""


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_INPUT


def _emit(payload: dict[str, Any], fmt: str, table: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(table)


# -- validate ---------------------------------------------------------------

def cmd_validate(args: argparse.Namespace) -> int:
    from .validate import validate_graph

    try:
        graphs = load_graph_dir(args.graphs)
    except (GraphError, OSError, ValueError) as exc:
        return _fail(str(exc))
    reports = [validate_graph(g) for g in sorted(graphs.values(), key=lambda g: g.id)]
    payload = {
        "graphs": [
            {
                "graph_id": r.graph_id,
                "fully_connected": r.fully_connected,
                "ok": r.ok,
                "findings": [
                    {"code": f.code.value, "node_id": f.node_id, "detail": f.detail}
                    for f in r.findings
                ],
            }
            for r in reports
        ]
    }
    lines = []
    for r in reports:
        if r.ok:
            lines.append(f"{r.graph_id}: ok")
        else:
            lines.append(f"{r.graph_id}: {len(r.findings)} finding(s)")
            for f in r.findings:
                lines.append(f"  [{f.code.value}] {f.node_id}: {f.detail}")
    _emit(payload, args.format, "\n".join(lines) if lines else "no graphs found")
    return EXIT_OK if all(r.ok for r in reports) else EXIT_FINDINGS


# -- stats --------------------------------------------------------------------

def cmd_stats(args: argparse.Namespace) -> int:
    try:
        graphs = load_graph_dir(args.graphs)
    except (GraphError, OSError, ValueError) as exc:
        return _fail(str(exc))
    stats = vital_occurrence_stats(graphs.values())
    ordered = sorted(stats.counts.items(), key=lambda kv: (-kv[1], kv[0].value))
    payload = {
        "counts": {kind.value: count for kind, count in ordered},
        "treatment_paths": {
            "total": stats.treatment_paths_total,
            "needing_vitals": stats.treatment_paths_needing,
            "ratio": stats.treatment_path_ratio,
        },
        "standard_procedures": {
            "total": stats.standard_procedures_total,
            "needing_vitals": stats.standard_procedures_needing,
            "ratio": stats.standard_procedure_ratio,
        },
    }
    width = max((len(k.value) for k in stats.counts), default=4)
    lines = [f"{'kind'.ljust(width)}  count"]
    for kind, count in ordered:
        if count:
            lines.append(f"{kind.value.ljust(width)}  {count}")
    ratio = stats.treatment_path_ratio
    lines.append(
        f"treatment paths needing vitals: {stats.treatment_paths_needing}"
        f"/{stats.treatment_paths_total}"
        + (f" ({ratio:.0%})" if ratio is not None else "")
    )
    ratio = stats.standard_procedure_ratio
    lines.append(
        f"standard procedures needing vitals: {stats.standard_procedures_needing}"
        f"/{stats.standard_procedures_total}"
        + (f" ({ratio:.0%})" if ratio is not None else "")
    )
    _emit(payload, args.format, "\n".join(lines))
    if args.report_dir:
        for path in write_stats_report(stats, args.report_dir):
            print(f"wrote {path}")
    return EXIT_OK


# -- replay --------------------------------------------------------------------

_SCRIPT_OPS = {"advance", "undo", "verdict", "alarm_verdict", "entry"}


def _load_script(path: str) -> tuple[str, list[tuple[int, dict[str, Any]]]]:
    """Script file: {"graph": id, "commands": [[offset_ms, {op...}], ...]}."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScriptError(f"cannot read script {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScriptError(f"script {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("graph"), str):
        raise ScriptError("script must be an object with a 'graph' id")
    raw = payload.get("commands", [])
    if not isinstance(raw, list):
        raise ScriptError("script 'commands' must be an array")
    commands = []
    last_offset = 0
    for i, item in enumerate(raw):
        if (
            not isinstance(item, list)
            or len(item) != 2
            or not isinstance(item[0], int)
            or not isinstance(item[1], dict)
        ):
            raise ScriptError(f"command {i}: expected [offset_ms, object]")
        offset, command = item
        if offset < last_offset:
            raise ScriptError(f"command {i}: offsets must be non-decreasing")
        last_offset = offset
        if command.get("op") not in _SCRIPT_OPS:
            raise ScriptError(f"command {i}: op must be one of {sorted(_SCRIPT_OPS)}")
        commands.append((offset, command))
    return payload["graph"], commands


def _apply_command(runtime: Runtime, session_id: str, command: dict[str, Any]) -> None:
    op = command["op"]
    if op == "advance":
        choice = command.get("choice")
        if not isinstance(choice, str):
            raise ScriptError("advance needs a 'choice'")
        runtime.advance(session_id, choice)
    elif op == "undo":
        runtime.undo(session_id)
    elif op == "verdict":
        kind = parse_kind(str(command.get("kind")))
        accept = command.get("accept")
        if not isinstance(accept, bool):
            raise ScriptError("verdict needs boolean 'accept'")
        runtime.record_verdict(session_id, kind, accept)
    elif op == "alarm_verdict":
        alarm_id = command.get("alarm")
        if not isinstance(alarm_id, str):
            raise ScriptError("alarm_verdict needs an 'alarm' id")
        decision = VerdictDecision(command.get("decision", "dismiss"))
        runtime.alarm_verdict(
            alarm_id,
            decision,
            target_graph=command.get("target_graph"),
            target_node=command.get("target_node"),
        )
    else:  # entry
        kind = parse_kind(str(command.get("kind")))
        value = command.get("value")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ScriptError("entry needs a numeric 'value'")
        runtime.patient_entry(kind, float(value))


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        graphs = load_graph_dir(args.graphs)
        rules_path = Path(args.graphs) / DOSAGE_RULES_FILENAME
        dosage_rules = load_dosage_rules(rules_path) if rules_path.is_file() else {}
        graph_id, commands = _load_script(args.script)
        trace = load_trace(args.trace) if args.trace else None
        if args.config:
            config = load_config(args.config)
            thresholds = (
                load_thresholds(config.thresholds) if config.thresholds is not None else []
            )
        else:
            config = ServiceConfig(graph_dir=Path(args.graphs))
            thresholds = []
    except (
        GraphError,
        ScriptError,
        TraceFormatError,
        ConfigError,
        ThresholdFormatError,
        DosageError,
        UnknownVitalKindError,
        OSError,
        ValueError,
    ) as exc:
        return _fail(str(exc))

    clock = ManualClock(0)
    runtime = Runtime(
        graphs,
        dosage_rules=dosage_rules,
        thresholds=thresholds,
        clock=clock,
        staleness_ms=config.staleness_ms,
        clear_margin=config.clear_margin,
        debounce_ms=config.debounce_ms,
        log_path=args.log,
    )
    rejected = 0
    try:
        session = runtime.create_session(graph_id)
    except (UnknownGraphError, InvalidGraphError) as exc:
        return _fail(str(exc))

    # Merge trace messages and script commands into one offset-ordered run;
    # ties deliver device data first so commands see the newest readings.
    merged: list[tuple[int, int, int, Any]] = []
    if trace is not None:
        merged.extend(
            (entry.offset_ms, 0, i, entry.message) for i, entry in enumerate(trace.entries)
        )
    merged.extend((offset, 1, i, command) for i, (offset, command) in enumerate(commands))
    merged.sort(key=lambda item: (item[0], item[1], item[2]))

    try:
        for offset, source, _idx, item in merged:
            clock.set(offset)
            if source == 0:
                try:
                    runtime.ingest(item.to_reading())
                except UnitMismatchError:
                    rejected += 1
            else:
                _apply_command(runtime, session.id, item)
    except (
        ScriptError,
        InvalidChoiceError,
        TerminalReachedError,
        NothingToUndoError,
        UnknownRequirementError,
        UnknownVitalKindError,
        ValueError,
    ) as exc:
        print(f"script failed: {exc}", file=sys.stderr)
        runtime.close()
        return EXIT_FINDINGS

    final_view = runtime.view(session.id)
    audit = [
        {
            "seq": e.seq,
            "t": e.timestamp,
            "kind": e.kind.value,
            "node_id": e.node_id,
            "payload": dict(e.payload),
        }
        for e in session.audit_log()
    ]
    state = runtime.live_state()
    payload = {
        "session_id": session.id,
        "final_view": view_payload(final_view),
        "audit": audit,
        "alarms": {alarm_id: st for alarm_id, st in sorted(state.alarm_states.items())},
        "vitals": {
            kind: {"value": v, "timestamp": t, "origin": o}
            for kind, (v, t, o) in sorted(state.latest.items())
        },
        "rejected_readings": rejected,
    }
    lines = [
        f"session {session.id} on {final_view.graph_id}: "
        f"node {final_view.node_id} ({final_view.node_kind.value})",
        f"audit events: {len(audit)}",
    ]
    for e in audit:
        lines.append(f"  {e['seq']:>3} t={e['t']:<8} {e['kind']:<15} @{e['node_id']}")
    lines.append(f"alarms: {payload['alarms'] or '{}'}")
    _emit(payload, args.format, "\n".join(lines))
    if args.report_dir:
        for path in write_replay_report(runtime.log.records(), args.report_dir):
            print(f"wrote {path}")
    runtime.close()
    return EXIT_OK


# -- serve ----------------------------------------------------------------------

def cmd_serve(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config)
        service = serve(config, log_path=args.log)
    except (ConfigError, ThresholdFormatError, DosageError, BindError) as exc:
        return _fail(str(exc))
    print(f"http on {service.host}:{service.http_port}")
    if service.device_port is not None:
        print(f"device listener on {service.host}:{service.device_port}")
    try:
        while True:
            service.stopping.wait(3600)
            if service.stopping.is_set():
                break
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vitalpath",
        description="Treatment graph navigation, vital-sign fusion, and replay tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check graph structure and connectivity")
    p_validate.add_argument("--graphs", required=True, help="directory of graph JSON files")
    p_validate.add_argument("--format", choices=("json", "table"), default="table")
    p_validate.set_defaults(func=cmd_validate)

    p_stats = sub.add_parser("stats", help="vital-sign occurrence statistics for a corpus")
    p_stats.add_argument("--graphs", required=True, help="directory of graph JSON files")
    p_stats.add_argument("--format", choices=("json", "table"), default="table")
    p_stats.add_argument("--report-dir", help="write occurrences.csv and occurrences.png here")
    p_stats.set_defaults(func=cmd_stats)

    p_replay = sub.add_parser("replay", help="deterministic scripted session replay")
    p_replay.add_argument("--graphs", required=True, help="directory of graph JSON files")
    p_replay.add_argument("--script", required=True, help="operator command script (JSON)")
    p_replay.add_argument("--trace", help="device trace file (JSON)")
    p_replay.add_argument("--config", help="service config for margins/thresholds")
    p_replay.add_argument("--format", choices=("json", "table"), default="json")
    p_replay.add_argument("--report-dir", help="write readings.csv and vitals.png here")
    p_replay.add_argument("--log", help="append the session log to this JSONL file")
    p_replay.set_defaults(func=cmd_replay)

    p_serve = sub.add_parser("serve", help="run the HTTP service and device listener")
    p_serve.add_argument("--config", required=True, help="service config file (JSON)")
    p_serve.add_argument("--log", help="append the session log to this JSONL file")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
