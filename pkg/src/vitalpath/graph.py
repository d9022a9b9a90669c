"""Treatment-graph data model and its strict JSON document format.

A graph is one expert-authored protocol: nodes are steps (actions, decisions,
medications, terminals), directed labeled edges are the allowed transitions.
Graphs are immutable after construction and safe to share across threads.

Edge label convention: `next` for linear steps, `yes`/`no` for binary
decisions, `branch:<name>` for named multiway branches. A decision node's
`yes` edge means "the monitored value lies outside the requirement's
min/max bounds"; `no` means it lies inside. Bounds are inclusive.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Mapping

from .vitals import UnknownVitalKindError, VitalKind, parse_kind


class GraphError(Exception):
    """Base class for graph document and lookup failures."""


class GraphSyntaxError(GraphError):
    """Malformed document: bad JSON, wrong types, unknown fields, bad enums."""


class DuplicateIdError(GraphError):
    """Two nodes share an id, or two edges share (from, to, label)."""


class MissingNodeError(GraphError):
    """An edge or entry references a node id that is not declared."""

    def __init__(self, node_id: str, context: str = ""):
        detail = f" ({context})" if context else ""
        super().__init__(f"reference to undeclared node {node_id!r}{detail}")
        self.node_id = node_id


class MissingEntryError(GraphError):
    """The document has no usable entry node."""


class UnknownNodeError(GraphError):
    """Lookup of a node id that does not exist in the graph."""

    def __init__(self, node_id: str):
        super().__init__(f"unknown node {node_id!r}")
        self.node_id = node_id


class GraphKind(str, Enum):
    TREATMENT_PATH = "treatment_path"
    STANDARD_PROCEDURE = "standard_procedure"


class NodeKind(str, Enum):
    ACTION = "action"
    DECISION = "decision"
    MEDICATION = "medication"
    TERMINAL = "terminal"


class Purpose(str, Enum):
    DISPLAY = "display"
    DECISION = "decision"
    DOSAGE = "dosage"


LABEL_NEXT = "next"
LABEL_YES = "yes"
LABEL_NO = "no"
_BRANCH_PREFIX = "branch:"


def valid_label(label: str) -> bool:
    if label in (LABEL_NEXT, LABEL_YES, LABEL_NO):
        return True
    return label.startswith(_BRANCH_PREFIX) and len(label) > len(_BRANCH_PREFIX)


@dataclass(frozen=True)
class VitalRequirement:
    """A node's demand for one vital, with optional inclusive bounds.

    Values are always in the kind's canonical unit; documents never carry
    units. A decision-purpose requirement must have at least one bound.
    """

    kind: VitalKind
    min: float | None = None
    max: float | None = None
    purpose: Purpose = Purpose.DISPLAY

    def __post_init__(self):
        if self.min is not None and self.max is not None and self.min > self.max:
            raise ValueError(f"requirement {self.kind.value}: min {self.min} > max {self.max}")
        if self.purpose is Purpose.DECISION and self.min is None and self.max is None:
            raise ValueError(f"decision requirement {self.kind.value} needs min or max")

    @property
    def has_bounds(self) -> bool:
        return self.min is not None or self.max is not None


@dataclass(frozen=True)
class TreatmentNode:
    id: str
    kind: NodeKind
    text: str
    requirements: tuple[VitalRequirement, ...] = ()
    dosage_rule_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "requirements", tuple(self.requirements))
        if (self.kind is NodeKind.MEDICATION) != (self.dosage_rule_id is not None):
            raise ValueError(
                f"node {self.id!r}: dosage_rule_id must be present exactly for medication nodes"
            )


@dataclass(frozen=True)
class TreatmentEdge:
    source: str
    target: str
    label: str

    def __post_init__(self):
        if not valid_label(self.label):
            raise ValueError(f"edge {self.source}->{self.target}: bad label {self.label!r}")


@dataclass(frozen=True)
class TreatmentGraph:
    """One protocol graph. Construction enforces identity and referential
    integrity; reachability and branch-shape checks live in validate."""

    id: str
    title: str
    kind: GraphKind
    entry: str
    nodes: tuple[TreatmentNode, ...]
    edges: tuple[TreatmentEdge, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        index: dict[str, TreatmentNode] = {}
        for node in self.nodes:
            if node.id in index:
                raise DuplicateIdError(f"graph {self.id!r}: duplicate node id {node.id!r}")
            index[node.id] = node
        out: dict[str, list[TreatmentEdge]] = {node_id: [] for node_id in index}
        seen_edges: set[tuple[str, str, str]] = set()
        for edge in self.edges:
            for endpoint in (edge.source, edge.target):
                if endpoint not in index:
                    raise MissingNodeError(endpoint, context=f"edge {edge.source}->{edge.target}")
            key = (edge.source, edge.target, edge.label)
            if key in seen_edges:
                raise DuplicateIdError(f"graph {self.id!r}: duplicate edge {key}")
            seen_edges.add(key)
            out[edge.source].append(edge)
        if self.entry not in index:
            raise MissingEntryError(f"graph {self.id!r}: entry {self.entry!r} is not a declared node")
        object.__setattr__(self, "_node_index", index)
        object.__setattr__(self, "_out_index", {k: tuple(v) for k, v in out.items()})

    def node(self, node_id: str) -> TreatmentNode:
        try:
            return self._node_index[node_id]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def outgoing(self, node_id: str) -> tuple[TreatmentEdge, ...]:
        """Edges leaving node_id, in declared document order."""
        self.node(node_id)
        return self._out_index[node_id]  # type: ignore[attr-defined]

    def choices(self, node_id: str) -> tuple[str, ...]:
        """Outgoing edge labels in declared order, duplicates collapsed."""
        seen: list[str] = []
        for edge in self.outgoing(node_id):
            if edge.label not in seen:
                seen.append(edge.label)
        return tuple(seen)

    def node_ids(self) -> tuple[str, ...]:
        return tuple(node.id for node in self.nodes)

    def __iter__(self) -> Iterator[TreatmentNode]:
        return iter(self.nodes)


# --- document format -------------------------------------------------------

_GRAPH_FIELDS = {"id", "title", "kind", "entry", "nodes", "edges"}
_NODE_FIELDS = {"id", "kind", "text", "requirements", "dosage_rule_id"}
_REQ_FIELDS = {"kind", "min", "max", "purpose"}
_EDGE_FIELDS = {"from", "to", "label"}

# File name reserved for dosage rules living next to the graphs; never a graph.
DOSAGE_RULES_FILENAME = "dosage_rules.json"


def _require(obj: Mapping[str, Any], key: str, types: type | tuple, where: str) -> Any:
    if key not in obj:
        raise GraphSyntaxError(f"{where}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise GraphSyntaxError(f"{where}: field {key!r} has wrong type {type(value).__name__}")
    return value


def _reject_unknown(obj: Mapping[str, Any], allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise GraphSyntaxError(f"{where}: unknown field(s) {sorted(extra)}")


def _optional_number(obj: Mapping[str, Any], key: str, where: str) -> float | None:
    if key not in obj or obj[key] is None:
        return None
    value = obj[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise GraphSyntaxError(f"{where}: field {key!r} must be a number")
    return float(value)


def _parse_requirement(data: Any, where: str) -> VitalRequirement:
    if not isinstance(data, dict):
        raise GraphSyntaxError(f"{where}: requirement must be an object")
    _reject_unknown(data, _REQ_FIELDS, where)
    kind_name = _require(data, "kind", str, where)
    try:
        kind = parse_kind(kind_name)
    except UnknownVitalKindError as exc:
        raise GraphSyntaxError(f"{where}: {exc}") from None
    purpose_name = _require(data, "purpose", str, where)
    try:
        purpose = Purpose(purpose_name)
    except ValueError:
        raise GraphSyntaxError(f"{where}: bad purpose {purpose_name!r}") from None
    try:
        return VitalRequirement(
            kind=kind,
            min=_optional_number(data, "min", where),
            max=_optional_number(data, "max", where),
            purpose=purpose,
        )
    except ValueError as exc:
        raise GraphSyntaxError(f"{where}: {exc}") from None


def _parse_node(data: Any, where: str) -> TreatmentNode:
    if not isinstance(data, dict):
        raise GraphSyntaxError(f"{where}: node must be an object")
    _reject_unknown(data, _NODE_FIELDS, where)
    node_id = _require(data, "id", str, where)
    kind_name = _require(data, "kind", str, where)
    try:
        kind = NodeKind(kind_name)
    except ValueError:
        raise GraphSyntaxError(f"{where}: bad node kind {kind_name!r}") from None
    text = _require(data, "text", str, where)
    reqs_raw = data.get("requirements", [])
    if not isinstance(reqs_raw, list):
        raise GraphSyntaxError(f"{where}: requirements must be an array")
    requirements = tuple(
        _parse_requirement(raw, f"{where}.requirements[{i}]") for i, raw in enumerate(reqs_raw)
    )
    rule_id = data.get("dosage_rule_id")
    if rule_id is not None and not isinstance(rule_id, str):
        raise GraphSyntaxError(f"{where}: dosage_rule_id must be a string")
    try:
        return TreatmentNode(
            id=node_id, kind=kind, text=text, requirements=requirements, dosage_rule_id=rule_id
        )
    except ValueError as exc:
        raise GraphSyntaxError(f"{where}: {exc}") from None


def _parse_edge(data: Any, where: str) -> TreatmentEdge:
    if not isinstance(data, dict):
        raise GraphSyntaxError(f"{where}: edge must be an object")
    _reject_unknown(data, _EDGE_FIELDS, where)
    source = _require(data, "from", str, where)
    target = _require(data, "to", str, where)
    label = _require(data, "label", str, where)
    try:
        return TreatmentEdge(source=source, target=target, label=label)
    except ValueError as exc:
        raise GraphSyntaxError(f"{where}: {exc}") from None


def parse_graph(document: str) -> TreatmentGraph:
    """Parse one UTF-8 JSON graph document (strict: unknown fields rejected).

    Raises GraphSyntaxError, DuplicateIdError, MissingNodeError,
    MissingEntryError. Parsing is lossless: serialize_graph round-trips.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise GraphSyntaxError(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise GraphSyntaxError("top level must be an object")
    _reject_unknown(data, _GRAPH_FIELDS, "graph")
    graph_id = _require(data, "id", str, "graph")
    title = _require(data, "title", str, "graph")
    kind_name = _require(data, "kind", str, "graph")
    try:
        kind = GraphKind(kind_name)
    except ValueError:
        raise GraphSyntaxError(f"graph: bad kind {kind_name!r}") from None
    if "entry" not in data:
        raise MissingEntryError(f"graph {graph_id!r}: no entry field")
    entry = data["entry"]
    if not isinstance(entry, str):
        raise GraphSyntaxError("graph: entry must be a string")
    nodes_raw = _require(data, "nodes", list, "graph")
    edges_raw = _require(data, "edges", list, "graph")
    nodes = tuple(_parse_node(raw, f"nodes[{i}]") for i, raw in enumerate(nodes_raw))
    edges = tuple(_parse_edge(raw, f"edges[{i}]") for i, raw in enumerate(edges_raw))
    return TreatmentGraph(id=graph_id, title=title, kind=kind, entry=entry, nodes=nodes, edges=edges)


def _requirement_payload(req: VitalRequirement) -> dict[str, Any]:
    payload: dict[str, Any] = {"kind": req.kind.value}
    if req.min is not None:
        payload["min"] = req.min
    if req.max is not None:
        payload["max"] = req.max
    payload["purpose"] = req.purpose.value
    return payload


def graph_payload(graph: TreatmentGraph) -> dict[str, Any]:
    nodes = []
    for node in graph.nodes:
        entry: dict[str, Any] = {"id": node.id, "kind": node.kind.value, "text": node.text}
        if node.requirements:
            entry["requirements"] = [_requirement_payload(r) for r in node.requirements]
        if node.dosage_rule_id is not None:
            entry["dosage_rule_id"] = node.dosage_rule_id
        nodes.append(entry)
    edges = [{"from": e.source, "to": e.target, "label": e.label} for e in graph.edges]
    return {
        "id": graph.id,
        "title": graph.title,
        "kind": graph.kind.value,
        "entry": graph.entry,
        "nodes": nodes,
        "edges": edges,
    }


def serialize_graph(graph: TreatmentGraph) -> str:
    return json.dumps(graph_payload(graph), ensure_ascii=False, indent=2) + "\n"


def load_graph_file(path: str | Path) -> TreatmentGraph:
    return parse_graph(Path(path).read_text(encoding="utf-8"))


def load_graph_dir(path: str | Path) -> dict[str, TreatmentGraph]:
    """Load every *.json graph in a directory (dosage_rules.json excluded).

    Returns graphs keyed by id, in file-name order. Duplicate graph ids
    across files raise DuplicateIdError.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise FileNotFoundError(f"graph directory not found: {directory}")
    graphs: dict[str, TreatmentGraph] = {}
    for file in sorted(directory.glob("*.json")):
        if file.name == DOSAGE_RULES_FILENAME:
            continue
        graph = load_graph_file(file)
        if graph.id in graphs:
            raise DuplicateIdError(f"duplicate graph id {graph.id!r} in {file.name}")
        graphs[graph.id] = graph
    return graphs
