"""Bootstrap confidence sets for estimated groups.

The set for group ``k`` is the smallest member of a greedy chain
``N_k = C(0) < C(1) < ... < roster`` whose bootstrap coverage frequency
reaches ``1 - alpha``. The bootstrap only calibrates the chain position; the
chain itself comes from the original sample.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .data import MarketPanel
from .errors import DataError, NumericalError
from .pipeline import PipelineConfig, PipelineResult, run_pipeline

log = logging.getLogger(__name__)

_STREAM_TAG = 0x636F6E66  # keeps these draws apart from the pair-keyed p-value streams


def nested_sets(group: Iterable[str], delta0, roster: Sequence[str]) -> list[frozenset]:
    """Greedy chain ``C(1), ..., C(n - |group|)`` growing ``group`` to the roster.

    Each step adds the outside agent whose smallest ``delta0`` to the current
    set is smallest; ties go to the earliest roster position.
    """
    roster = tuple(roster)
    pos = {a: k for k, a in enumerate(roster)}
    D = np.asarray(delta0, dtype=float)
    if D.shape != (len(roster), len(roster)):
        raise ValueError("delta0 must be n x n over the roster")
    inside = sorted(pos[a] for a in set(group))
    if not inside:
        raise ValueError("group must be non-empty")
    outside = [k for k in range(len(roster)) if k not in set(inside)]
    # closest[j]: min over the current set of delta0[j, i]
    closest = D[np.ix_(outside, inside)].min(axis=1) if outside else np.empty(0)
    current = set(roster[k] for k in inside)
    chain = []
    while outside:
        t = int(np.argmin(closest))
        new = outside.pop(t)
        closest = np.delete(closest, t)
        if outside:
            closest = np.minimum(closest, D[outside, new])
        current.add(roster[new])
        chain.append(frozenset(current))
    return chain


@dataclass
class ConfidenceResult:
    k: int
    alpha: float
    m_star: int
    set: frozenset
    pi_curve: list[float]
    pi_raw: list[float]
    group: frozenset
    chain: list[frozenset] = field(repr=False)
    draws: int = 0
    short_draws: int = 0  # bootstrap K_hat below k: counted as non-covering
    failed_draws: int = 0  # bootstrap pipeline raised: counted as non-covering

    def to_dict(self, order=None) -> dict:
        key = (lambda a: a) if order is None else {a: i for i, a in enumerate(order)}.__getitem__
        return {
            "k": self.k,
            "alpha": self.alpha,
            "m_star": self.m_star,
            "set": sorted(self.set, key=key),
            "group": sorted(self.group, key=key),
            "pi_curve": list(self.pi_curve),
            "pi_raw": list(self.pi_raw),
            "chain_additions": [sorted(b - a, key=key)[0] for a, b in
                                zip([self.group] + self.chain[:-1], self.chain)],
            "draws": self.draws,
            "non_covering_short_K": self.short_draws,
            "non_covering_failed": self.failed_draws,
        }


def _draw_seeds(seed: int, s: int):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_STREAM_TAG, int(s)))
    market_ss, boot_ss = ss.spawn(2)
    return market_ss, int(boot_ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _chain(group, pv, roster):
    return [frozenset(group)] + nested_sets(group, pv.permuted(roster).delta_zero, roster)


def confidence_sets(panel: MarketPanel, ks: Iterable[int], cfg: PipelineConfig = PipelineConfig(),
                    alpha: float = 0.05, B2: int = 99, seed: int = 0,
                    base: PipelineResult | None = None) -> dict[int, ConfidenceResult]:
    """Confidence sets for several (1-based) groups sharing one set of bootstrap draws."""
    ks = sorted(set(int(k) for k in ks))
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if B2 < 1:
        raise ValueError("B2 must be >= 1")
    if base is None:
        base = run_pipeline(panel, cfg)
    sel = base.selection
    if not ks or ks[0] < 1 or ks[-1] > sel.k_hat:
        raise ValueError(f"group index must lie in 1..{sel.k_hat} (estimated number of groups)")
    roster = panel.roster
    groups = {k: sel.partition.groups[k - 1] for k in ks}
    chains = {k: _chain(groups[k], base.pvalues, roster) for k in ks}

    covered = {k: np.zeros((B2, len(chains[k])), dtype=bool) for k in ks}
    short = {k: 0 for k in ks}
    failed = 0
    for s in range(B2):
        market_ss, boot_seed = _draw_seeds(seed, s)
        idx = np.random.default_rng(market_ss).integers(0, panel.n_markets, panel.n_markets)
        run_cfg = replace(cfg, test=replace(cfg.test, seed=boot_seed))
        try:
            res = run_pipeline(panel.resample(idx), run_cfg)
        except (DataError, NumericalError) as exc:
            log.info("confidence draw %d failed: %s", s, exc)
            failed += 1
            continue
        for k in ks:
            if res.selection.k_hat < k:
                log.info("confidence draw %d: K_hat*=%d below k=%d", s, res.selection.k_hat, k)
                short[k] += 1
                continue
            star = _chain(res.selection.partition.groups[k - 1], res.pvalues, roster)
            target = groups[k]
            for m in range(len(chains[k])):
                covered[k][s, m] = target <= star[min(m, len(star) - 1)]

    out = {}
    for k in ks:
        raw = covered[k].mean(axis=0)
        curve = np.maximum.accumulate(raw)
        curve[-1] = 1.0  # the final chain element is the whole roster
        m_star = int(np.argmax(curve >= 1.0 - alpha))
        out[k] = ConfidenceResult(k, alpha, m_star, chains[k][m_star], curve.tolist(), raw.tolist(),
                                  groups[k], chains[k][1:], B2, short[k], failed)
    return out


def confidence_set(panel: MarketPanel, k: int, cfg: PipelineConfig = PipelineConfig(),
                   alpha: float = 0.05, B2: int = 99, seed: int = 0,
                   base: PipelineResult | None = None) -> ConfidenceResult:
    return confidence_sets(panel, [k], cfg, alpha, B2, seed, base)[k]
