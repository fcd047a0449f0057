import io

import numpy as np
import pytest

from grouporder.data import (MarketObservation, MarketPanel, comparability_graph, load_panel,
                             pair_coverage, panel_to_csv, participant_set_histogram, read_panel,
                             write_panel)
from grouporder.errors import DuplicateEntryError, PanelParseError, PanelSchemaError

from conftest import panel_from_rows


def _read(text):
    return read_panel(io.StringIO(text))


def test_three_row_csv():
    p = _read("market_id,agent_id,outcome\nm1,a,1.5\nm1,b,2\nm2,b,3\n")
    assert p.roster == ("a", "b")
    assert p.n_markets == 2
    assert p.dim == 0
    assert [e[0] for e in p.markets[0].entries] == ["a", "b"]
    assert p.markets[1].entries == (("b", 3.0, ()),)


def test_empty_file_is_schema_error():
    with pytest.raises(PanelSchemaError):
        _read("")


def test_missing_column():
    with pytest.raises(PanelSchemaError, match="outcome"):
        _read("market_id,agent_id,y\nm1,a,1\n")


def test_duplicate_names_market_and_agent():
    with pytest.raises(DuplicateEntryError) as exc:
        _read("market_id,agent_id,outcome\nm1,a,1\nm1,b,2\nm1,b,3\n")
    assert exc.value.market_id == "m1" and exc.value.agent_id == "b"


def test_non_numeric_outcome_reports_row():
    with pytest.raises(PanelParseError) as exc:
        _read("market_id,agent_id,outcome\nm1,a,1\nm1,b,abc\n")
    assert exc.value.row == 3


def test_covariates_and_within_market_order():
    p = _read("market_id,agent_id,outcome,x1,x2\nm2,z,1,0.5,1\nm1,b,2,1,2\nm1,a,3,4,5\n")
    assert p.covariate_names == ("x1", "x2")
    assert p.roster == ("a", "b", "z")
    assert p.market_ids == ("m1", "m2")
    assert [e[0] for e in p.markets[0].entries] == ["b", "a"]
    assert p.markets[0].entries[1] == ("a", 3.0, (4.0, 5.0))


def test_load_panel_tsv(tmp_path):
    f = tmp_path / "p.tsv"
    f.write_text("market_id\tagent_id\toutcome\nm1\ta\t1\nm1\tb\t2\n")
    assert load_panel(f, "tsv").roster == ("a", "b")
    with pytest.raises(ValueError):
        load_panel(f, "xlsx")


def test_roundtrip_csv(tmp_path, rng):
    Y = rng.normal(size=(6, 3))
    Y[2, 1] = np.nan
    p = MarketPanel.from_dense(Y)
    f = tmp_path / "p.csv"
    write_panel(p, f)
    assert load_panel(f).same_as(p)
    assert panel_to_csv(p) == f.read_text()


def test_row_interleaving_does_not_matter():
    text = ["m1,a,1", "m2,b,2", "m1,b,3", "m2,c,4", "m3,a,5"]
    p1 = _read("market_id,agent_id,outcome\n" + "\n".join(text) + "\n")
    shuffled = [text[1], text[0], text[4], text[2], text[3]]  # within-market order kept
    p2 = _read("market_id,agent_id,outcome\n" + "\n".join(shuffled) + "\n")
    assert p1.same_as(p2)


def test_arrays_are_read_only(rng):
    p = MarketPanel.from_dense(rng.normal(size=(3, 2)))
    with pytest.raises(ValueError):
        p.outcome[0] = 1.0


def test_invariants_enforced():
    with pytest.raises(PanelSchemaError):
        MarketObservation("m", ())
    with pytest.raises(PanelSchemaError):
        MarketObservation("m", (("a", 1.0, (1.0,)), ("b", 1.0, ())))
    with pytest.raises(PanelSchemaError):
        MarketPanel.from_markets([MarketObservation("m", (("a", 1.0, ()),))], roster=["b"])


def test_full_participation_counts(rng):
    p = MarketPanel.from_dense(rng.normal(size=(7, 4)))
    cov = pair_coverage(p, 2)
    off = cov.counts[~np.eye(4, dtype=bool)]
    assert np.all(off == 7)
    assert np.all(np.diag(cov.counts) == 7)
    assert comparability_graph(cov).is_complete()


def test_figure2_style_counts():
    rows = [(f"m{k}", a, 1.0) for k in range(5) for a in ("1", "3")]
    rows += [("m9", "1", 1.0), ("m9", "4", 2.0), ("m8", "3", 1.0), ("m8", "4", 1.0)]
    cov = pair_coverage(panel_from_rows(rows), 3)
    pos = {a: k for k, a in enumerate(cov.roster)}
    assert cov.counts[pos["1"], pos["3"]] == 5
    assert cov.counts[pos["1"], pos["4"]] == 1
    assert cov.comparable[pos["1"], pos["3"]]
    assert not cov.comparable[pos["1"], pos["4"]]
    assert cov.counts[pos["1"], pos["1"]] == 6


def test_single_market_has_no_comparable_pairs():
    p = panel_from_rows([("m", a, 1.0) for a in "abc"])
    cov = pair_coverage(p, 2)
    assert cov.counts.max() <= 1
    assert not comparability_graph(cov).edges


def test_chain_fixture_gives_path_graph():
    rows = []
    for k in range(1, 5):
        for l in range(4):
            m = f"m{k}{l}"
            rows += [(m, str(k), 1.0), (m, str(k + 1), 2.0)]
    g = comparability_graph(pair_coverage(panel_from_rows(rows), 3))
    assert g.edges == {("1", "2"), ("2", "3"), ("3", "4"), ("4", "5")}


def test_threshold_validation_and_monotonicity(rng):
    Y = rng.normal(size=(30, 5))
    Y[rng.random(Y.shape) < 0.5] = np.nan
    Y[:, 0] = 1.0
    p = MarketPanel.from_dense(Y)
    with pytest.raises(ValueError):
        pair_coverage(p, 1)
    prev = None
    for t in range(2, 20):
        edges = comparability_graph(pair_coverage(p, t)).edges
        if prev is not None:
            assert edges <= prev
        prev = edges
    cov = pair_coverage(p, 2)
    assert np.array_equal(cov.counts, cov.counts.T)


def test_participant_set_histogram():
    rows = [("m1", "a", 1), ("m1", "b", 1), ("m2", "a", 1), ("m2", "b", 1), ("m3", "c", 1)]
    assert participant_set_histogram(panel_from_rows(rows)) == [(1, 1), (2, 1)]


def test_resample_keeps_market_content(rng):
    Y = rng.normal(size=(5, 3))
    Y[1, 2] = np.nan
    p = MarketPanel.from_dense(Y)
    q = p.resample([1, 1, 4])
    assert q.n_markets == 3
    assert q.markets[0].entries == p.markets[1].entries
    assert q.markets[1].entries == p.markets[1].entries
    assert q.markets[2].entries == p.markets[4].entries
