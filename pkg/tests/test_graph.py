"""Document parsing, structural invariants, and lossless round-trips."""
from __future__ import annotations

import json
import random

import pytest

from vitalpath.graph import (
    DuplicateIdError,
    GraphSyntaxError,
    MissingEntryError,
    MissingNodeError,
    NodeKind,
    Purpose,
    TreatmentEdge,
    TreatmentGraph,
    TreatmentNode,
    UnknownNodeError,
    VitalRequirement,
    graph_payload,
    load_graph_dir,
    parse_graph,
    serialize_graph,
    valid_label,
)
from vitalpath.vitals import VitalKind

from .oracles import build_graph, random_graph_payload


def minimal(**overrides):
    doc = {
        "id": "g",
        "title": "t",
        "kind": "treatment_path",
        "entry": "a",
        "nodes": [{"id": "a", "kind": "terminal", "text": "done"}],
        "edges": [],
    }
    doc.update(overrides)
    return json.dumps(doc)


def test_parse_minimal_graph():
    g = parse_graph(minimal())
    assert g.id == "g"
    assert g.entry == "a"
    assert g.node("a").kind is NodeKind.TERMINAL


def test_labels():
    assert valid_label("next")
    assert valid_label("yes")
    assert valid_label("no")
    assert valid_label("branch:severe")
    assert not valid_label("branch:")
    assert not valid_label("maybe")
    with pytest.raises(ValueError):
        TreatmentEdge("a", "b", "maybe")


def test_duplicate_node_id_rejected():
    doc = minimal(
        nodes=[
            {"id": "a", "kind": "terminal", "text": "x"},
            {"id": "a", "kind": "terminal", "text": "y"},
        ]
    )
    with pytest.raises(DuplicateIdError):
        parse_graph(doc)


def test_edge_to_undeclared_node_rejected():
    doc = minimal(edges=[{"from": "a", "to": "ghost", "label": "next"}])
    with pytest.raises(MissingNodeError):
        parse_graph(doc)


def test_missing_or_undeclared_entry_rejected():
    with pytest.raises(MissingEntryError):
        parse_graph(minimal(entry="nope"))
    doc = json.loads(minimal())
    del doc["entry"]
    with pytest.raises(MissingEntryError):
        parse_graph(json.dumps(doc))


def test_unknown_fields_rejected_everywhere():
    with pytest.raises(GraphSyntaxError):
        parse_graph(minimal(color="red"))
    doc = minimal(nodes=[{"id": "a", "kind": "terminal", "text": "x", "icon": "star"}])
    with pytest.raises(GraphSyntaxError):
        parse_graph(doc)
    doc = minimal(edges=[{"from": "a", "to": "a", "label": "next", "weight": 2}])
    with pytest.raises(GraphSyntaxError):
        parse_graph(doc)


def test_bad_enum_values_rejected():
    with pytest.raises(GraphSyntaxError):
        parse_graph(minimal(kind="protocol"))
    doc = minimal(nodes=[{"id": "a", "kind": "checkpoint", "text": "x"}])
    with pytest.raises(GraphSyntaxError):
        parse_graph(doc)


def test_requirement_invariants():
    with pytest.raises(ValueError):
        VitalRequirement(VitalKind.SPO2, min=95, max=90)
    with pytest.raises(ValueError):
        VitalRequirement(VitalKind.SPO2, purpose=Purpose.DECISION)  # no bounds
    req = VitalRequirement(VitalKind.SPO2, min=90, purpose=Purpose.DECISION)
    assert req.has_bounds


def test_medication_node_requires_rule_id_and_vice_versa():
    with pytest.raises(ValueError):
        TreatmentNode("m", NodeKind.MEDICATION, "give drug")
    with pytest.raises(ValueError):
        TreatmentNode("a", NodeKind.ACTION, "step", dosage_rule_id="r1")
    node = TreatmentNode("m", NodeKind.MEDICATION, "give drug", dosage_rule_id="r1")
    assert node.dosage_rule_id == "r1"


def test_duplicate_edge_rejected():
    doc = minimal(
        nodes=[
            {"id": "a", "kind": "action", "text": "x"},
            {"id": "b", "kind": "terminal", "text": "y"},
        ],
        edges=[
            {"from": "a", "to": "b", "label": "next"},
            {"from": "a", "to": "b", "label": "next"},
        ],
    )
    with pytest.raises(DuplicateIdError):
        parse_graph(doc)


def test_outgoing_choices_preserve_declaration_order(hypoglycemia):
    assert hypoglycemia.choices("glucose_check") == ("yes", "no")
    targets = [e.target for e in hypoglycemia.outgoing("glucose_check")]
    assert targets == ["give_glucose", "monitor_only"]


def test_node_lookup_raises_on_unknown(hypoglycemia):
    with pytest.raises(UnknownNodeError):
        hypoglycemia.node("not_a_node")


def test_cycles_are_allowed():
    doc = minimal(
        nodes=[
            {"id": "a", "kind": "action", "text": "x"},
            {"id": "b", "kind": "action", "text": "y"},
        ],
        edges=[
            {"from": "a", "to": "b", "label": "next"},
            {"from": "b", "to": "a", "label": "next"},
        ],
    )
    g = parse_graph(doc)
    assert g.choices("b") == ("next",)


def test_serialize_round_trip_fixture(hypoglycemia):
    again = parse_graph(serialize_graph(hypoglycemia))
    assert graph_payload(again) == graph_payload(hypoglycemia)


def test_serialize_round_trip_random_graphs():
    rng = random.Random(7121)
    for i in range(25):
        payload = random_graph_payload(rng, f"g{i}", max_nodes=30)
        g = build_graph(payload)
        assert graph_payload(parse_graph(serialize_graph(g))) == graph_payload(g)


def test_load_graph_dir_skips_rules_and_indexes_by_id(fixtures_dir):
    graphs = load_graph_dir(fixtures_dir / "graphs")
    assert set(graphs) == {"hypoglycemia", "airway_check"}


def test_load_graph_dir_rejects_duplicate_graph_ids(tmp_path):
    doc = minimal()
    (tmp_path / "one.json").write_text(doc, encoding="utf-8")
    (tmp_path / "two.json").write_text(doc, encoding="utf-8")
    with pytest.raises(DuplicateIdError):
        load_graph_dir(tmp_path)
