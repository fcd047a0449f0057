"""Randomised invariants; each suite draws at least 1000 cases."""

import itertools

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from grouporder.classifier import OrderedPartition, classify_for_K
from grouporder.data import MarketPanel
from grouporder.identification import ComparabilityGraph, identified_set, tau_collapse
from grouporder.metrics import HAD_LEVELS, discrepancy, summarize
from grouporder.pairwise import (CdfDominance, PValueMatrices, TestConfig, pvalue_matrices,
                                 statistic_triplet)

CASES = settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2**32 - 1)


def _panel(seed, n, L, p_absent):
    rng = np.random.default_rng(seed)
    Y = rng.normal(rng.uniform(-1, 1, n), 1.0, (L, n))
    Y[rng.random((L, n)) < p_absent] = np.nan
    Y[:, :2][np.isnan(Y[:, :2])] = rng.normal(size=np.isnan(Y[:, :2]).sum())
    return MarketPanel.from_dense(Y)


@CASES
@given(seeds, st.integers(20, 80), st.sampled_from(["value", "procurement"]),
       st.sampled_from(["joint", "marginal"]), st.floats(0.0, 0.3))
def test_delta_zero_bounds(seed, L, orientation, conditioning, p_absent):
    panel = _panel(seed, 3, L, p_absent)
    dp, dm, d0 = statistic_triplet(panel, 0, 1, CdfDominance(orientation, conditioning))
    tol = 1e-12 * max(1.0, d0)
    assert d0 >= dp - tol and d0 >= dm - tol and d0 <= dp + dm + tol
    assert min(dp, dm, d0) >= 0


@CASES
@given(seeds, st.integers(15, 40), st.integers(0, 1000))
def test_pvalue_duality(seed, L, boot_seed):
    panel = _panel(seed, 3, L, 0.0)
    pv = pvalue_matrices(panel, None, CdfDominance(), TestConfig(draws=9, seed=boot_seed))
    off = ~np.eye(3, dtype=bool)
    assert np.array_equal(pv.p_minus[off], pv.p_plus.T[off])
    assert np.array_equal(pv.p_zero, pv.p_zero.T, equal_nan=True)
    vals = np.concatenate([pv.p_plus[off], pv.p_zero[off]])
    assert np.all((vals >= 0.1) & (vals <= 1.0))  # (1 + count) / (B + 1) with B = 9


def _random_pv(seed, n):
    rng = np.random.default_rng(seed)
    roster = [f"a{k}" for k in range(n)]
    P = rng.uniform(1e-6, 1, (n, n))
    Z = rng.uniform(1e-6, 1, (n, n))
    return roster, PValueMatrices.from_pvalues(roster, P, P.T.copy(), (Z + Z.T) / 2)


@CASES
@given(seeds, st.integers(2, 8), st.integers(8, 2000))
def test_classifier_nesting_and_exact_K(seed, n, L):
    roster, pv = _random_pv(seed, n)
    prev = None
    for K in range(1, n + 1):
        part = classify_for_K(roster, pv, K, L=L)
        assert part.K == K and part.agents == frozenset(roster)
        if prev is not None:
            assert part.refines(prev)
        prev = part


labels = st.lists(st.integers(1, 4), min_size=1, max_size=9)


@CASES
@given(labels, st.randoms(use_true_random=False))
def test_discrepancy_self_zero_and_bounds(lab, rnd):
    agents = [f"x{k}" for k in range(len(lab))]
    T = OrderedPartition.from_labels(dict(zip(agents, lab)))
    assert discrepancy(T, T).delta == 0.0
    other = OrderedPartition.from_labels({a: rnd.randint(1, 4) for a in agents})
    d = discrepancy(T, other)
    assert 0 <= d.delta <= len(agents) and all(isinstance(v, int) for v in d.per_group)


@CASES
@given(st.lists(st.floats(0, 12, allow_nan=False), min_size=1, max_size=60))
def test_had_monotone(deltas):
    s = summarize(np.ones(len(deltas)), deltas, 12)
    vals = [s.HAD[l] for l in HAD_LEVELS]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert s.EAD == np.mean(deltas) or abs(s.EAD - np.mean(deltas)) < 1e-12


@st.composite
def typed_graphs(draw):
    n = draw(st.integers(1, 8))
    K0 = draw(st.integers(1, min(n, 4)))
    types = draw(st.lists(st.integers(1, K0), min_size=n, max_size=n))
    types[:K0] = range(1, K0 + 1)
    vertices = [str(v) for v in range(n)]
    pairs = list(itertools.combinations(vertices, 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [e for e, keep in zip(pairs, mask) if keep]
    return ComparabilityGraph.from_edges(vertices, edges), dict(zip(vertices, types)), K0, pairs


@CASES
@given(typed_graphs())
def test_collapse_idempotent(case):
    g, tau, _, _ = case
    tg = tau_collapse(g, tau)
    assert tau_collapse(tg) == tg
    assert frozenset().union(*(v.members for v in tg.vertices)) == frozenset(g.vertices)
    assert all(tg.types[a] != tg.types[b] for a, b in tg.edges)


@CASES
@given(typed_graphs(), st.integers(0, 10**6))
def test_identified_set_edge_monotone(case, pick):
    g, tau, K0, pairs = case
    missing = [e for e in pairs if not g.has_edge(*e)]
    if not missing:
        return
    extra = missing[pick % len(missing)]
    bigger = ComparabilityGraph.from_edges(g.vertices, list(g.edges) + [extra])
    assert identified_set(tau_collapse(g, tau), K0) <= identified_set(tau_collapse(bigger, tau), K0)
