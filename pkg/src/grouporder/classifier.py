"""Recover an ordered partition of agents from pairwise p-values.

Sign convention: a small ``p_plus[i, j]`` is evidence that ``i`` has a higher
type than ``j``. Groups in an ``OrderedPartition`` ascend in type.

All argmin ties go to the smallest roster (or group) index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import CannotSplitError, InsufficientDataError
from .pairwise import PValueMatrices

MIN_MARKETS = 8


@dataclass(frozen=True)
class OrderedPartition:
    groups: tuple[frozenset, ...]

    def __post_init__(self):
        groups = tuple(frozenset(g) for g in self.groups)
        seen = set()
        for g in groups:
            if not g:
                raise ValueError("groups must be non-empty")
            if seen & g:
                raise ValueError("groups must be disjoint")
            seen |= g
        object.__setattr__(self, "groups", groups)

    @classmethod
    def from_labels(cls, labels: Mapping[str, int]) -> "OrderedPartition":
        """Partition from an agent -> type map; types are ranked, gaps allowed."""
        by_type: dict[int, set] = {}
        for a, t in labels.items():
            by_type.setdefault(int(t), set()).add(a)
        return cls(tuple(frozenset(by_type[t]) for t in sorted(by_type)))

    @property
    def K(self) -> int:
        return len(self.groups)

    @property
    def agents(self) -> frozenset:
        return frozenset().union(*self.groups) if self.groups else frozenset()

    def labels(self) -> dict:
        return {a: k + 1 for k, g in enumerate(self.groups) for a in g}

    def to_lists(self, order: Sequence[str] | None = None) -> list[list[str]]:
        if order is None:
            return [sorted(g) for g in self.groups]
        pos = {a: k for k, a in enumerate(order)}
        return [sorted(g, key=pos.__getitem__) for g in self.groups]

    def refines(self, coarser: "OrderedPartition") -> bool:
        return all(any(g <= h for h in coarser.groups) for g in self.groups)

    def __len__(self):
        return len(self.groups)


def default_margin(L: float) -> float:
    return math.log(L) ** (1.0 / 3.0)


def default_penalty(L: float) -> float:
    return math.log(math.log(L))


@dataclass(frozen=True)
class ClassifierConfig:
    margin: Callable[[float], float] = default_margin
    penalty: Callable[[float], float] = default_penalty
    k_max: int | None = None

    def echo(self, L) -> dict:
        return {"r_L": self.margin(L), "g_L": self.penalty(L), "K_max": self.k_max,
                "margin_rule": getattr(self.margin, "__name__", "custom"),
                "penalty_rule": getattr(self.penalty, "__name__", "custom")}


class _LogP:
    """Natural-log p-value matrices restricted to a roster order."""

    def __init__(self, pv: PValueMatrices, roster: Sequence[str] | None = None):
        roster = tuple(pv.roster if roster is None else roster)
        if roster != pv.roster:
            pv = pv.permuted(roster)
        self.roster = roster
        with np.errstate(divide="ignore"):
            self.plus = np.log(pv.p_plus)
            self.minus = np.log(pv.p_minus)
            self.zero = np.log(pv.p_zero)

    def check(self, idx):
        sub = np.ix_(idx, idx)
        off = ~np.eye(len(idx), dtype=bool)
        for M in (self.plus, self.minus, self.zero):
            if np.isnan(M[sub][off]).any():
                raise InsufficientDataError("p-values missing for some pairs inside the subset")


def _split(S: list[int], lp: _LogP, r: float) -> tuple[list[int], list[int]]:
    if len(S) < 2:
        raise ValueError("split needs at least two agents")
    sub = np.ix_(S, S)
    A = lp.plus[sub]
    Bm = lp.minus[sub]
    off = ~np.eye(len(S), dtype=bool)
    N1 = (A <= Bm - r) & off
    N2 = (Bm <= A - r) & off
    c1, c2 = N1.sum(axis=1), N2.sum(axis=1)
    s1 = np.where(c1 > 0, np.where(N1, A, 0.0).sum(axis=1) / np.maximum(c1, 1), 0.0)
    s2 = np.where(c2 > 0, np.where(N2, Bm, 0.0).sum(axis=1) / np.maximum(c2, 1), 0.0)
    star = int(np.argmin(np.minimum(s1, s2)))
    if s1[star] <= s2[star]:
        chosen = N1[star]
        lower = [S[k] for k in np.nonzero(chosen)[0]]
        upper = [S[k] for k in np.nonzero(~chosen)[0]]
    else:
        chosen = N2[star]
        lower = [S[k] for k in np.nonzero(~chosen)[0]]
        upper = [S[k] for k in np.nonzero(chosen)[0]]
    if not chosen.any():
        # no pair clears the margin: peel off the selected agent to keep progress
        lower = [S[star]]
        upper = [a for a in S if a != S[star]]
    return lower, upper


def _select(groups: list[list[int]], lp: _LogP) -> int:
    best, best_val = None, math.inf
    for k, g in enumerate(groups):
        if len(g) < 2:
            continue
        sub = lp.zero[np.ix_(g, g)]
        val = np.min(sub[~np.eye(len(g), dtype=bool)])
        if best is None or val < best_val:
            best, best_val = k, val
    if best is None:
        raise CannotSplitError("every group is a singleton", achieved=len(groups))
    return best


def _goodness(groups: list[list[int]], lp: _LogP) -> float:
    total = 0.0
    for g in groups:
        if len(g) < 2:
            continue
        sub = lp.zero[np.ix_(g, g)]
        total += abs(float(np.min(sub[~np.eye(len(g), dtype=bool)])))
    return total / len(groups)


def _sequence(lp: _LogP, r: float, k_max: int) -> tuple[list[list[list[int]]], bool]:
    """Nested partitions for K = 1..k_max; second value flags early truncation."""
    n = len(lp.roster)
    current = [list(range(n))]
    out = [current]
    while len(current) < k_max:
        if len(current) == 1:
            k = 0
            if n < 2:
                return out, True
        else:
            try:
                k = _select(current, lp)
            except CannotSplitError:
                return out, True
        lower, upper = _split(current[k], lp, r)
        current = current[:k] + [lower, upper] + current[k + 1:]
        out.append(current)
    return out, False


def _to_partition(groups, roster) -> OrderedPartition:
    return OrderedPartition(tuple(frozenset(roster[i] for i in g) for g in groups))


def _positions(agents: Iterable[str], roster: Sequence[str]) -> list[int]:
    pos = {a: k for k, a in enumerate(roster)}
    return sorted(pos[a] for a in agents)


def split(subset: Iterable[str], pv: PValueMatrices, r: float) -> tuple[frozenset, frozenset]:
    """One round of the split rule on ``subset``: (lower-type set, upper-type set)."""
    S = _positions(subset, pv.roster)
    if len(S) < 2:
        raise ValueError("split needs at least two agents")
    lp = _LogP(pv)
    lp.check(S)
    lower, upper = _split(S, lp, r)
    return frozenset(pv.roster[i] for i in lower), frozenset(pv.roster[i] for i in upper)


def selection_step(partition: OrderedPartition, pv: PValueMatrices) -> int:
    """1-based index of the group with the smallest within-group ``p_zero``."""
    lp = _LogP(pv)
    groups = [_positions(g, pv.roster) for g in partition.groups]
    return _select(groups, lp) + 1


def goodness(partition: OrderedPartition, pv: PValueMatrices) -> float:
    """Average over groups of ``|min log p_zero|`` inside the group (0 for singletons)."""
    if partition.K == 0:
        raise ValueError("empty partition")
    lp = _LogP(pv)
    return _goodness([_positions(g, pv.roster) for g in partition.groups], lp)


def _prepare(roster, pv: PValueMatrices, cfg: ClassifierConfig, L: int):
    roster = tuple(pv.roster if roster is None else roster)
    if set(roster) - set(pv.roster):
        raise ValueError("roster has agents without p-values")
    if L < MIN_MARKETS:
        raise ValueError(f"need L >= {MIN_MARKETS} markets for the default rules")
    r = cfg.margin(L)
    if not r > 0:
        raise ValueError("margin r_L must be positive")
    lp = _LogP(pv, roster)
    lp.check(list(range(len(roster))))
    k_max = len(roster) if cfg.k_max is None else cfg.k_max
    if not 1 <= k_max <= len(roster):
        raise ValueError("K_max must lie in 1..n")
    return roster, lp, r, k_max


def classify_for_K(roster, pv: PValueMatrices, K: int, cfg: ClassifierConfig = ClassifierConfig(),
                   L: int = 100) -> OrderedPartition:
    """Exactly ``K`` ordered groups by repeated selection and splitting."""
    roster, lp, r, _ = _prepare(roster, pv, cfg, L)
    if not 1 <= K <= len(roster):
        raise ValueError("K must lie in 1..n")
    seq, _ = _sequence(lp, r, K)
    if len(seq) < K:
        raise CannotSplitError(f"stopped at {len(seq)} groups before reaching K={K}", achieved=len(seq))
    return _to_partition(seq[K - 1], roster)


@dataclass
class Selection:
    k_hat: int
    partition: OrderedPartition
    objective: list[float]
    goodness: list[float]
    partitions: list[OrderedPartition] = field(repr=False)
    truncated: bool = False
    L: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self, order=None) -> dict:
        return {
            "K_hat": self.k_hat,
            "groups": self.partition.to_lists(order),
            "objective": list(self.objective),
            "goodness": list(self.goodness),
            "truncated": self.truncated,
            "L": self.L,
            "config": self.config,
        }


def select_K(roster, pv: PValueMatrices, cfg: ClassifierConfig = ClassifierConfig(),
             L: int = 100) -> Selection:
    """Penalised choice of the number of groups over one nested splitting run."""
    roster, lp, r, k_max = _prepare(roster, pv, cfg, L)
    g = cfg.penalty(L)
    if not g > 0:
        raise ValueError("penalty g(L) must be positive")
    seq, truncated = _sequence(lp, r, k_max)
    fit = [_goodness(groups, lp) for groups in seq]
    objective = [v + (K + 1) * g for K, v in enumerate(fit)]
    k_hat = int(np.argmin(objective)) + 1
    parts = [_to_partition(groups, roster) for groups in seq]
    return Selection(k_hat, parts[k_hat - 1], objective, fit, parts, truncated, L, cfg.echo(L))
