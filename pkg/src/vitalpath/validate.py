"""Structural validation of parsed treatment graphs.

Everything found here is a report entry, never an exception: a graph that
parses can still be unusable for navigation (unreachable steps, decision
nodes with a single branch, terminals that lead somewhere).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .graph import NodeKind, TreatmentGraph


class FindingCode(str, Enum):
    UNREACHABLE_NODE = "unreachable_node"
    DANGLING_DECISION = "dangling_decision"
    TERMINAL_OUT_EDGES = "terminal_out_edges"


@dataclass(frozen=True)
class Finding:
    code: FindingCode
    node_id: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    graph_id: str
    fully_connected: bool
    unreachable: tuple[str, ...]
    findings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not self.findings


def reachable_from_entry(graph: TreatmentGraph) -> set[str]:
    """Node ids reachable from the entry by directed edges (entry included)."""
    seen: set[str] = {graph.entry}
    frontier: deque[str] = deque([graph.entry])
    while frontier:
        current = frontier.popleft()
        for edge in graph.outgoing(current):
            if edge.target not in seen:
                seen.add(edge.target)
                frontier.append(edge.target)
    return seen


def validate_graph(graph: TreatmentGraph) -> ValidationReport:
    """Report unreachable nodes, dangling decisions, and terminal violations.

    fully_connected is true iff every node is reachable from the entry.
    Findings are ordered by node declaration order, unreachable first.
    """
    reachable = reachable_from_entry(graph)
    unreachable = tuple(n.id for n in graph.nodes if n.id not in reachable)
    findings: list[Finding] = [
        Finding(FindingCode.UNREACHABLE_NODE, node_id, f"node {node_id!r} has no path from entry")
        for node_id in unreachable
    ]
    for node in graph.nodes:
        out = graph.outgoing(node.id)
        if node.kind is NodeKind.DECISION and len(out) < 2:
            findings.append(
                Finding(
                    FindingCode.DANGLING_DECISION,
                    node.id,
                    f"decision node {node.id!r} has {len(out)} outgoing edge(s), needs >= 2",
                )
            )
        if node.kind is NodeKind.TERMINAL and out:
            findings.append(
                Finding(
                    FindingCode.TERMINAL_OUT_EDGES,
                    node.id,
                    f"terminal node {node.id!r} has {len(out)} outgoing edge(s)",
                )
            )
    return ValidationReport(
        graph_id=graph.id,
        fully_connected=not unreachable,
        unreachable=unreachable,
        findings=tuple(findings),
    )
