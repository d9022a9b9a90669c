"""Corpus statistics: how often each vital kind is demanded by a protocol set.

A graph "needs vitals" iff at least one of its nodes carries at least one
requirement. Ratios are computed per graph kind (treatment paths vs.
standard procedures) and reported as None when that kind is absent from
the corpus.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .graph import GraphKind, TreatmentGraph
from .vitals import VitalKind


@dataclass(frozen=True)
class StatsReport:
    counts: Mapping[VitalKind, int]
    needs_vitals: Mapping[str, bool]
    treatment_paths_total: int
    treatment_paths_needing: int
    standard_procedures_total: int
    standard_procedures_needing: int

    @property
    def treatment_path_ratio(self) -> float | None:
        if self.treatment_paths_total == 0:
            return None
        return self.treatment_paths_needing / self.treatment_paths_total

    @property
    def standard_procedure_ratio(self) -> float | None:
        if self.standard_procedures_total == 0:
            return None
        return self.standard_procedures_needing / self.standard_procedures_total


def vital_occurrence_stats(corpus: Iterable[TreatmentGraph]) -> StatsReport:
    """Count requirement occurrences per kind across every node of the corpus."""
    counts: dict[VitalKind, int] = {kind: 0 for kind in VitalKind}
    needs: dict[str, bool] = {}
    totals = {GraphKind.TREATMENT_PATH: 0, GraphKind.STANDARD_PROCEDURE: 0}
    needing = {GraphKind.TREATMENT_PATH: 0, GraphKind.STANDARD_PROCEDURE: 0}
    for graph in corpus:
        graph_needs = False
        for node in graph.nodes:
            for req in node.requirements:
                counts[req.kind] += 1
                graph_needs = True
        needs[graph.id] = graph_needs
        totals[graph.kind] += 1
        if graph_needs:
            needing[graph.kind] += 1
    return StatsReport(
        counts=counts,
        needs_vitals=needs,
        treatment_paths_total=totals[GraphKind.TREATMENT_PATH],
        treatment_paths_needing=needing[GraphKind.TREATMENT_PATH],
        standard_procedures_total=totals[GraphKind.STANDARD_PROCEDURE],
        standard_procedures_needing=needing[GraphKind.STANDARD_PROCEDURE],
    )
