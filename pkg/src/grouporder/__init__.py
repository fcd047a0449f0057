"""Ordered group classification of agents from pairwise bootstrap tests."""

__version__ = "0.1.0"

from .classifier import ClassifierConfig, OrderedPartition, classify_for_K, goodness, select_K, selection_step, split
from .data import MarketObservation, MarketPanel, comparability_graph, load_panel, pair_coverage
from .identification import ComparabilityGraph, TypedGraph, check_identified, identified_set, tau_collapse
from .metrics import aggregate, discrepancy
from .pairwise import (CdfDominance, ConditionalMean, PresenceMean, PValueMatrices, TestConfig,
                       bootstrap_pvalues, pvalue_matrices, statistic_triplet)
from .pipeline import PipelineConfig, run_pipeline
