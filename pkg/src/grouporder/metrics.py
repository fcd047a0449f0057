"""Discrepancy between ordered partitions and Monte Carlo summaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .classifier import OrderedPartition

HAD_LEVELS = (0.10, 0.25, 0.50, 0.75, 0.90)


@dataclass(frozen=True)
class DiscrepancyReport:
    delta: float
    per_group: tuple[int, ...]


def discrepancy(T1: OrderedPartition, T2: OrderedPartition) -> DiscrepancyReport:
    """Average over ``T1``'s groups of the smallest symmetric difference to a ``T2`` group.

    Not symmetric in its arguments.
    """
    if T1.agents != T2.agents:
        raise ValueError("partitions cover different rosters")
    per = tuple(min(len(g ^ h) for h in T2.groups) for g in T1.groups)
    return DiscrepancyReport(float(np.mean(per)), per)


@dataclass(frozen=True)
class Summary:
    mean_K: float
    EAD: float
    HAD: dict
    replications: int


def aggregate(true_T: OrderedPartition, estimates: Iterable[tuple[int, OrderedPartition]], n: int,
              lambdas: Sequence[float] = HAD_LEVELS) -> Summary:
    estimates = list(estimates)
    if not estimates:
        raise ValueError("no estimates to aggregate")
    if any(not 0 < lam < 1 for lam in lambdas):
        raise ValueError("lambda levels must lie in (0, 1)")
    ks = np.array([k for k, _ in estimates], dtype=float)
    deltas = np.array([discrepancy(true_T, T).delta for _, T in estimates])
    return summarize(ks, deltas, n, lambdas)


def summarize(k_hats, deltas, n: int, lambdas: Sequence[float] = HAD_LEVELS) -> Summary:
    """Same summary from per-replication ``K_hat`` and discrepancy values."""
    ks = np.asarray(k_hats, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    had = {float(lam): float(np.mean(deltas > lam * n)) for lam in lambdas}
    return Summary(float(ks.mean()), float(deltas.mean()), had, len(ks))
