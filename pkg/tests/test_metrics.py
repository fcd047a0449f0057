import numpy as np
import pytest

from grouporder.classifier import OrderedPartition
from grouporder.metrics import HAD_LEVELS, aggregate, discrepancy, summarize

P = lambda *groups: OrderedPartition(tuple(frozenset(g) for g in groups))


def _oracle(T1, T2):
    return np.mean([min(len(set(g).symmetric_difference(h)) for h in T2.groups) for g in T1.groups])


def test_self_discrepancy_zero():
    T = P("ab", "cde", "f")
    assert discrepancy(T, T).delta == 0.0


def test_small_example_and_reverse():
    T1, T2 = P("12", "3"), P("1", "23")
    rep = discrepancy(T1, T2)
    assert rep.per_group == (1, 1) and rep.delta == 1.0
    assert discrepancy(T2, T1).delta == 1.0


def test_asymmetry():
    T1, T2 = P("1234"), P("1", "234")
    assert discrepancy(T1, T2).delta == 1.0
    assert discrepancy(T2, T1).delta == 2.0


def test_one_group_against_singletons():
    n = 6
    assert discrepancy(P("abcdef"), P(*"abcdef")).delta == n - 1


def test_matches_enumeration():
    rng = np.random.default_rng(2)
    agents = "abcdefg"
    for _ in range(300):
        l1, l2 = rng.integers(1, 4, 7), rng.integers(1, 5, 7)
        T1 = OrderedPartition.from_labels(dict(zip(agents, l1.tolist())))
        T2 = OrderedPartition.from_labels(dict(zip(agents, l2.tolist())))
        assert discrepancy(T1, T2).delta == pytest.approx(_oracle(T1, T2))


def test_roster_mismatch():
    with pytest.raises(ValueError):
        discrepancy(P("ab"), P("abc"))


def test_aggregate_perfect():
    T = P("ab", "cd")
    s = aggregate(T, [(2, T)] * 5, n=4)
    assert (s.mean_K, s.EAD) == (2.0, 0.0) and all(v == 0 for v in s.HAD.values())


def test_had_two_replications():
    s = summarize([1, 3], [0.0, 6.0], n=12, lambdas=[0.25])
    assert s.HAD[0.25] == 0.5 and s.EAD == 3.0 and s.mean_K == 2.0


def test_had_nonincreasing_and_order_invariant():
    rng = np.random.default_rng(4)
    d = rng.uniform(0, 12, 50)
    k = rng.integers(1, 5, 50)
    s = summarize(k, d, 12)
    vals = [s.HAD[l] for l in HAD_LEVELS]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    perm = rng.permutation(50)
    assert summarize(k[perm], d[perm], 12).EAD == pytest.approx(s.EAD)


def test_aggregate_errors():
    with pytest.raises(ValueError):
        aggregate(P("ab"), [], n=2)
    with pytest.raises(ValueError):
        aggregate(P("ab"), [(1, P("ab"))], n=2, lambdas=[1.0])
