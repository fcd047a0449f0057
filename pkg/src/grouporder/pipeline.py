"""Panel -> p-values -> ordered partition, as one call."""

from __future__ import annotations

from dataclasses import dataclass

from .classifier import ClassifierConfig, Selection, select_K
from .data import MarketPanel, comparability_graph, pair_coverage
from .errors import InsufficientDataError
from .identification import ComparabilityGraph
from .pairwise import CdfDominance, IndexKind, PValueMatrices, TestConfig, pvalue_matrices


@dataclass(frozen=True)
class PipelineConfig:
    kind: IndexKind = CdfDominance()
    test: TestConfig = TestConfig()
    classifier: ClassifierConfig = ClassifierConfig()
    # None tests every pair; an integer enforces the co-occurrence threshold
    threshold: int | None = None


@dataclass
class PipelineResult:
    pvalues: PValueMatrices
    selection: Selection


def run_pipeline(panel: MarketPanel, cfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    if cfg.threshold is None:
        graph = ComparabilityGraph.complete(panel.roster)
    else:
        graph = comparability_graph(pair_coverage(panel, cfg.threshold))
        if not graph.is_complete():
            missing = len(panel.roster) * (len(panel.roster) - 1) // 2 - len(graph.edges)
            raise InsufficientDataError(
                f"comparability graph is incomplete at threshold {cfg.threshold} "
                f"({missing} pair(s) below it); classification needs every pair")
    pv = pvalue_matrices(panel, graph, cfg.kind, cfg.test)
    sel = select_K(panel.roster, pv, cfg.classifier, panel.n_markets)
    return PipelineResult(pv, sel)
