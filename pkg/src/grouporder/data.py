"""Market panel container, CSV ingestion and pair co-occurrence counts."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateEntryError, PanelParseError, PanelSchemaError
from .identification import ComparabilityGraph

REQUIRED_COLUMNS = ("market_id", "agent_id", "outcome")
DEFAULT_THRESHOLD = 30


@dataclass(frozen=True)
class MarketObservation:
    market_id: str
    entries: tuple[tuple[str, float, tuple[float, ...]], ...]

    def __post_init__(self):
        if not self.entries:
            raise PanelSchemaError(f"market {self.market_id!r} has no entries")
        dims = {len(e[2]) for e in self.entries}
        if len(dims) != 1:
            raise PanelSchemaError(f"market {self.market_id!r} mixes covariate dimensions")


class MarketPanel:
    """Long-format market observations indexed by dense integer ids.

    Rows are stored grouped by market (markets in ``market_ids`` order, rows
    within a market in input order). ``rows[l, i]`` gives the row index of
    agent ``i`` in market ``l`` or -1 when the agent is absent.
    """

    def __init__(self, roster, market_ids, market, agent, outcome, covariates,
                 covariate_names=()):
        self.roster = tuple(roster)
        self.market_ids = tuple(market_ids)
        self.covariate_names = tuple(covariate_names)
        self.market = np.asarray(market, dtype=np.intp)
        self.agent = np.asarray(agent, dtype=np.intp)
        self.outcome = np.asarray(outcome, dtype=float)
        cov = np.asarray(covariates, dtype=float)
        self.covariates = cov.reshape(len(self.outcome), -1) if cov.size else np.zeros((len(self.outcome), len(self.covariate_names)))
        self._validate()
        rows = np.full((self.n_markets, self.n_agents), -1, dtype=np.intp)
        rows[self.market, self.agent] = np.arange(len(self.outcome))
        self.rows = rows
        self.rows.setflags(write=False)
        for arr in (self.market, self.agent, self.outcome, self.covariates):
            arr.setflags(write=False)

    def _validate(self):
        if len(set(self.roster)) != len(self.roster):
            raise PanelSchemaError("roster has duplicate agent ids")
        if len(set(self.market_ids)) != len(self.market_ids):
            raise PanelSchemaError("duplicate market ids")
        n_rows = len(self.outcome)
        if not (len(self.market) == len(self.agent) == n_rows == len(self.covariates)):
            raise PanelSchemaError("row arrays have inconsistent lengths")
        if self.covariates.shape[1] != len(self.covariate_names):
            raise PanelSchemaError("covariate arity does not match covariate_names")
        if n_rows and (self.agent.min() < 0 or self.agent.max() >= len(self.roster)):
            raise PanelSchemaError("agent index outside roster")
        if n_rows and (self.market.min() < 0 or self.market.max() >= len(self.market_ids)):
            raise PanelSchemaError("market index outside market list")
        present = np.bincount(self.market, minlength=len(self.market_ids))
        if np.any(present == 0):
            raise PanelSchemaError("market without entries")
        key = self.market * max(len(self.roster), 1) + self.agent
        uniq, counts = np.unique(key, return_counts=True)
        if np.any(counts > 1):
            k = uniq[np.argmax(counts > 1)]
            m, a = divmod(int(k), max(len(self.roster), 1))
            raise DuplicateEntryError(self.market_ids[m], self.roster[a])

    @property
    def n_agents(self) -> int:
        return len(self.roster)

    @property
    def n_markets(self) -> int:
        return len(self.market_ids)

    @property
    def dim(self) -> int:
        return len(self.covariate_names)

    @property
    def presence(self) -> np.ndarray:
        return self.rows >= 0

    def agent_index(self, agent) -> int:
        if isinstance(agent, (int, np.integer)):
            return int(agent)
        try:
            return self.roster.index(agent)
        except ValueError:
            raise KeyError(f"unknown agent {agent!r}") from None

    @property
    def markets(self) -> list[MarketObservation]:
        out = []
        order = np.argsort(self.market, kind="stable")
        bounds = np.searchsorted(self.market[order], np.arange(self.n_markets + 1))
        for m in range(self.n_markets):
            idx = order[bounds[m]:bounds[m + 1]]
            entries = tuple(
                (self.roster[self.agent[r]], float(self.outcome[r]),
                 tuple(float(v) for v in self.covariates[r]))
                for r in idx)
            out.append(MarketObservation(self.market_ids[m], entries))
        return out

    @classmethod
    def from_markets(cls, markets: Iterable[MarketObservation], covariate_names=None, roster=None):
        markets = list(markets)
        if not markets:
            raise PanelSchemaError("panel has no markets")
        d = len(markets[0].entries[0][2])
        if covariate_names is None:
            covariate_names = tuple(f"x{k + 1}" for k in range(d))
        if roster is None:
            roster = sorted({e[0] for m in markets for e in m.entries})
        pos = {a: k for k, a in enumerate(roster)}
        mk, ag, y, x = [], [], [], []
        for l, m in enumerate(markets):
            for a, out, cov in m.entries:
                if a not in pos:
                    raise PanelSchemaError(f"agent {a!r} missing from roster")
                if len(cov) != d:
                    raise PanelSchemaError("all observations must share one covariate arity")
                mk.append(l)
                ag.append(pos[a])
                y.append(out)
                x.append(cov)
        return cls(roster, [m.market_id for m in markets], mk, ag, y,
                   np.asarray(x, dtype=float).reshape(len(y), d), covariate_names)

    @classmethod
    def from_dense(cls, outcomes, roster=None, market_ids=None):
        """Panel from an (L, n) outcome matrix; NaN marks absence, all-NaN rows are dropped."""
        Y = np.asarray(outcomes, dtype=float)
        L, n = Y.shape
        roster = tuple(roster) if roster is not None else tuple(f"a{k:0{len(str(n))}d}" for k in range(1, n + 1))
        market_ids = tuple(market_ids) if market_ids is not None else tuple(f"m{l:0{len(str(L))}d}" for l in range(1, L + 1))
        keep = ~np.all(np.isnan(Y), axis=1)
        if not keep.all():
            Y = Y[keep]
            market_ids = tuple(m for m, k in zip(market_ids, keep) if k)
        mk, ag = np.nonzero(~np.isnan(Y))
        return cls(roster, market_ids, mk, ag, Y[mk, ag], np.zeros((len(mk), 0)))

    def resample(self, market_index: Sequence[int]) -> "MarketPanel":
        """Panel built from the given markets (with repetition), ids suffixed by draw slot."""
        market_index = np.asarray(market_index, dtype=np.intp)
        sub = self.rows[market_index]
        new_m, cols = np.nonzero(sub >= 0)
        src = sub[new_m, cols]
        # keep within-market row order
        order = np.lexsort((src, new_m))
        new_m, src = new_m[order], src[order]
        width = len(str(len(market_index)))
        ids = [f"{self.market_ids[m]}#{k:0{width}d}" for k, m in enumerate(market_index)]
        return MarketPanel(self.roster, ids, new_m, self.agent[src], self.outcome[src],
                           self.covariates[src], self.covariate_names)

    def same_as(self, other: "MarketPanel") -> bool:
        return (self.roster == other.roster and self.market_ids == other.market_ids
                and self.covariate_names == other.covariate_names
                and np.array_equal(self.market, other.market)
                and np.array_equal(self.agent, other.agent)
                and np.array_equal(self.outcome, other.outcome)
                and np.array_equal(self.covariates, other.covariates))

    def __repr__(self):
        return f"MarketPanel(n_agents={self.n_agents}, n_markets={self.n_markets}, d={self.dim})"


def _parse_float(text, row, column):
    try:
        v = float(text)
    except ValueError:
        raise PanelParseError(f"non-numeric {column} {text!r}", row) from None
    if math.isnan(v):
        raise PanelParseError(f"missing {column}", row)
    return v


def read_panel(stream, delimiter=",") -> MarketPanel:
    reader = csv.reader(stream, delimiter=delimiter)
    header = next(reader, None)
    if header is None:
        raise PanelSchemaError("empty file: expected header market_id,agent_id,outcome,...")
    header = [h.strip() for h in header]
    if tuple(header[:3]) != REQUIRED_COLUMNS:
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise PanelSchemaError(f"missing column(s): {', '.join(missing)}")
        raise PanelSchemaError("header must start with market_id,agent_id,outcome")
    cov_names = tuple(header[3:])
    by_market: dict[str, list] = {}
    seen = set()
    for row_no, rec in enumerate(reader, start=2):
        if not rec or all(not f.strip() for f in rec):
            continue
        if len(rec) != len(header):
            raise PanelParseError(f"expected {len(header)} fields, got {len(rec)}", row_no)
        m, a = rec[0].strip(), rec[1].strip()
        if not m or not a:
            raise PanelParseError("empty market_id or agent_id", row_no)
        if (m, a) in seen:
            raise DuplicateEntryError(m, a)
        seen.add((m, a))
        y = _parse_float(rec[2], row_no, "outcome")
        x = tuple(_parse_float(v, row_no, c) for v, c in zip(rec[3:], cov_names))
        by_market.setdefault(m, []).append((a, y, x))
    if not by_market:
        raise PanelSchemaError("file has a header but no observations")
    markets = [MarketObservation(m, tuple(by_market[m])) for m in sorted(by_market)]
    return MarketPanel.from_markets(markets, cov_names)


def load_panel(path, format="csv", delimiter=None) -> MarketPanel:
    """Read a long-format panel file (``market_id,agent_id,outcome,x1..xd``).

    Markets are ordered by id and the roster is sorted, so the result does not
    depend on how rows of different markets are interleaved in the file.
    """
    fmt = format.lower()
    if fmt not in ("csv", "tsv"):
        raise ValueError(f"unsupported format {format!r}")
    if delimiter is None:
        delimiter = "\t" if fmt == "tsv" else ","
    with open(path, newline="", encoding="utf-8") as fh:
        return read_panel(fh, delimiter)


def write_panel(panel: MarketPanel, path_or_stream) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(REQUIRED_COLUMNS) + list(panel.covariate_names))
        for r in range(len(panel.outcome)):
            w.writerow([panel.market_ids[panel.market[r]], panel.roster[panel.agent[r]],
                        repr(float(panel.outcome[r]))] + [repr(float(v)) for v in panel.covariates[r]])

    if isinstance(path_or_stream, (str, Path)):
        with open(path_or_stream, "w", newline="", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(path_or_stream)


def panel_to_csv(panel: MarketPanel) -> str:
    buf = io.StringIO()
    write_panel(panel, buf)
    return buf.getvalue()


@dataclass(frozen=True, eq=False)
class PairCoverage:
    roster: tuple[str, ...]
    counts: np.ndarray
    threshold: int

    @property
    def comparable(self) -> np.ndarray:
        ok = self.counts >= self.threshold
        np.fill_diagonal(ok, False)
        return ok


def pair_coverage(panel: MarketPanel, threshold: int = DEFAULT_THRESHOLD) -> PairCoverage:
    if threshold < 2:
        raise ValueError("threshold must be >= 2")
    P = panel.presence.astype(np.int64)
    counts = P.T @ P
    counts.setflags(write=False)
    return PairCoverage(panel.roster, counts, int(threshold))


def comparability_graph(coverage: PairCoverage) -> ComparabilityGraph:
    ii, jj = np.nonzero(np.triu(coverage.comparable, 1))
    return ComparabilityGraph(coverage.roster,
                              frozenset((coverage.roster[i], coverage.roster[j]) for i, j in zip(ii, jj)))


def participant_set_histogram(panel: MarketPanel) -> list[tuple[int, int]]:
    """(times a participant set appears, number of distinct sets appearing that often)."""
    sets = Counter(frozenset(np.nonzero(row >= 0)[0].tolist()) for row in panel.rows)
    freq = Counter(sets.values())
    return sorted(freq.items())
