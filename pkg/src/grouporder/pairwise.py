"""Pairwise comparison statistics and their bootstrap p-values.

For an agent pair ``(i, j)`` every index kind reduces to a curve ``r_ij``
evaluated on a quadrature grid, positive where ``i`` looks like the higher
type. The three statistics are the integrals of ``max(r, 0)``,
``max(-r, 0)`` and ``|r|``. Bootstrap replicates resample the markets that
qualify for the pair, recompute the curve and recentre it at the original
estimate, which imposes the least favourable null.

Resampling is done with count weights: a draw is a ``(B, L_pair)`` matrix of
multinomial counts and each curve is a weighted functional of the pair's
market-level data, so all ``B`` replicates are evaluated with a handful of
array operations.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from ._kernels import cdf_bootstrap_integrals
from .data import MarketPanel
from .errors import (DegenerateSupportError, IncompatibleIndexError,
                     InsufficientDataError)
from .identification import ComparabilityGraph

UNDEFINED_DENOMINATOR = 1e-12
# compiled CDF bootstrap loop; the array path computes the same quantities
USE_COMPILED = True


@dataclass(frozen=True)
class ConditionalMean:
    """Difference of Nadaraya-Watson regressions of outcome on covariates."""

    label = "mean"


@dataclass(frozen=True)
class CdfDominance:
    """Difference of outcome distribution functions.

    ``orientation="value"`` compares ``P(B <= b)``, so stochastically larger
    outcomes mean a higher type. ``orientation="procurement"`` compares
    ``P(B >= b)``, so stochastically smaller outcomes mean a higher type.

    ``conditioning="joint"`` uses markets where both agents are present.
    ``conditioning="marginal"`` uses each agent's own markets, for designs
    where same-type agents never meet.
    """

    orientation: str = "value"
    conditioning: str = "joint"
    label = "cdf"

    def __post_init__(self):
        if self.orientation not in ("value", "procurement"):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.conditioning not in ("joint", "marginal"):
            raise ValueError(f"unknown conditioning {self.conditioning!r}")


@dataclass(frozen=True)
class PresenceMean:
    """Mean market-level outcome when exactly one of the two agents is present."""

    label = "presence"


IndexKind = Union[ConditionalMean, CdfDominance, PresenceMean]


def index_kind(name: str, orientation="value", conditioning="joint") -> IndexKind:
    if name == "mean":
        return ConditionalMean()
    if name == "cdf":
        return CdfDominance(orientation, conditioning)
    if name == "presence":
        return PresenceMean()
    raise ValueError(f"unknown index kind {name!r}")


def kind_to_dict(kind: IndexKind) -> dict:
    out = {"index": kind.label}
    if isinstance(kind, CdfDominance):
        out.update(orientation=kind.orientation, conditioning=kind.conditioning)
    return out


def kind_from_dict(d: dict) -> IndexKind:
    return index_kind(d["index"], d.get("orientation", "value"), d.get("conditioning", "joint"))


@dataclass(frozen=True)
class TestConfig:
    __test__ = False  # keep pytest from collecting this class

    draws: int = 199
    bandwidth_constant: float = 1.06
    bandwidth_exponent: float = -0.2
    grid_size: int = 100
    trim: tuple[float, float] = (0.05, 0.95)
    seed: int = 0

    def __post_init__(self):
        if self.draws < 1:
            raise ValueError("bootstrap draws must be >= 1")
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        lo, hi = self.trim
        if not 0 < lo < hi < 1:
            raise ValueError("trim quantiles must satisfy 0 < lo < hi < 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "trim", (float(lo), float(hi)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trim"] = list(self.trim)
        d["kernel"] = "epanechnikov"
        return d


@dataclass(frozen=True)
class PairTestResult:
    delta_plus: float
    delta_minus: float
    delta_zero: float
    p_plus: float
    p_minus: float
    p_zero: float
    n_joint: int


# --------------------------------------------------------------------------
# kernel regression


def epanechnikov(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _as_2d(x):
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def kernel_weights(x, grid, h) -> np.ndarray:
    """Product Epanechnikov weights ``K_h(x_l - g)``, shape ``(len(x), len(grid))``."""
    x, grid = _as_2d(x), _as_2d(grid)
    h = np.broadcast_to(np.asarray(h, dtype=float), (x.shape[1],))
    if np.any(h <= 0):
        raise ValueError("bandwidth must be positive")
    K = np.ones((x.shape[0], grid.shape[0]))
    for k in range(x.shape[1]):
        K *= epanechnikov((x[:, k, None] - grid[None, :, k]) / h[k]) / h[k]
    return K


def kernel_regression(x, y, grid, h) -> np.ndarray:
    """Nadaraya-Watson estimate at each grid point; NaN where the weights vanish."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("kernel_regression needs at least one point")
    K = kernel_weights(x, grid, h)
    den = K.sum(axis=0)
    num = y @ K
    out = np.full(den.shape, np.nan)
    ok = den >= UNDEFINED_DENOMINATOR
    out[ok] = num[ok] / den[ok]
    return out


# --------------------------------------------------------------------------
# pair problems: data for one pair, the grid, and a weighted curve evaluator


def _trapezoid_weights(lo, hi, G):
    w = np.full(G, (hi - lo) / (G - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _grid(pooled, cfg: TestConfig):
    lo, hi = np.quantile(pooled, cfg.trim)
    if not hi > lo:
        raise DegenerateSupportError(
            f"integration range collapses: {cfg.trim[0]:g} and {cfg.trim[1]:g} quantiles are both {lo:g}")
    return np.linspace(lo, hi, cfg.grid_size), _trapezoid_weights(lo, hi, cfg.grid_size)


class _Problem:
    n_units: int
    weights: np.ndarray  # quadrature weights

    def curve(self, W: np.ndarray) -> np.ndarray:
        """``r`` for each row of count weights ``W`` (shape ``(B, n_units)``)."""
        raise NotImplementedError

    def bootstrap(self, idx: np.ndarray, r_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Recentred (plus, minus, absolute) integrals for the drawn unit indices."""
        return _integrals(self.curve(counts_from_draws(idx, self.n_units)) - r_hat, self.weights)


class _ZeroProblem(_Problem):
    """Both agents' samples are one and the same point mass: ``r`` is identically zero."""

    def __init__(self, n_units):
        self.n_units = n_units
        self.weights = np.ones(1)

    def curve(self, W):
        return np.zeros((W.shape[0], 1))


class _EcdfColumn:
    """Weighted empirical CDF of one agent's outcomes at fixed grid points."""

    def __init__(self, units, values, grid, side):
        order = np.argsort(values, kind="stable")
        self.units = units[order]
        self.pos = np.searchsorted(values[order], grid, side=side)

    def __call__(self, W):
        cw = np.zeros((W.shape[0], len(self.units) + 1))
        np.cumsum(W[:, self.units], axis=1, out=cw[:, 1:])
        total = cw[:, -1:]
        with np.errstate(invalid="ignore", divide="ignore"):
            F = cw[:, self.pos] / total
        return F, total[:, 0] > 0


class _CdfProblem(_Problem):
    def __init__(self, units_i, y_i, units_j, y_j, n_units, grid, weights, orientation):
        side = "right" if orientation == "value" else "left"
        self.sign = 1.0 if orientation == "value" else -1.0
        self.n_units = n_units
        self.grid = grid
        self.weights = weights
        self.Fi = _EcdfColumn(units_i, y_i, grid, side)
        self.Fj = _EcdfColumn(units_j, y_j, grid, side)
        # first grid index whose indicator counts each unit, -1 where the agent is absent
        kernel_side = "left" if orientation == "value" else "right"
        self.bin_i = np.full(n_units, -1, dtype=np.int64)
        self.bin_j = np.full(n_units, -1, dtype=np.int64)
        self.bin_i[units_i] = np.searchsorted(grid, y_i, side=kernel_side)
        self.bin_j[units_j] = np.searchsorted(grid, y_j, side=kernel_side)
        self._base = None
        self._base = self.curve(np.ones((1, n_units)))

    def bootstrap(self, idx, r_hat):
        if not USE_COMPILED:
            return super().bootstrap(idx, r_hat)
        out = cdf_bootstrap_integrals(idx, self.bin_i, self.bin_j, len(self.grid), self.sign,
                                      np.ascontiguousarray(r_hat[0]), self.weights)
        return out[:, 0], out[:, 1], out[:, 2]

    def curve(self, W):
        Fi, oki = self.Fi(W)
        Fj, okj = self.Fj(W)
        r = self.sign * (Fj - Fi)
        bad = ~(oki & okj)
        if bad.any() and self._base is not None:
            # an agent drawn zero times: that replicate carries no information
            r[bad] = self._base[0]
        return r


class _MeanProblem(_Problem):
    def __init__(self, xi, yi, xj, yj, grid, weights, h):
        Ki = kernel_weights(xi, grid, h)
        Kj = kernel_weights(xj, grid, h)
        ok = (Ki.sum(axis=0) >= UNDEFINED_DENOMINATOR) & (Kj.sum(axis=0) >= UNDEFINED_DENOMINATOR)
        if not ok.any():
            raise InsufficientDataError("kernel regression undefined on the whole grid")
        self.Ki, self.Kj = Ki[:, ok], Kj[:, ok]
        self.KYi, self.KYj = self.Ki * yi[:, None], self.Kj * yj[:, None]
        self.grid = grid[ok]
        self.weights = weights[ok]
        self.n_units = len(yi)
        self._base = None
        self._base = self.curve(np.ones((1, self.n_units)))

    def curve(self, W):
        di, dj = W @ self.Ki, W @ self.Kj
        with np.errstate(invalid="ignore", divide="ignore"):
            r = (W @ self.KYi) / di - (W @ self.KYj) / dj
        bad = (di < UNDEFINED_DENOMINATOR) | (dj < UNDEFINED_DENOMINATOR)
        if bad.any() and self._base is not None:
            r = np.where(bad, self._base[0], r)
        return r


class _PresenceProblem(_Problem):
    def __init__(self, price, i_only):
        self.price = price
        self.i_only = i_only
        self.n_units = len(price)
        self.weights = np.ones(1)
        self._base = None
        self._base = self.curve(np.ones((1, self.n_units)))

    def curve(self, W):
        wi = W[:, self.i_only]
        wj = W[:, ~self.i_only]
        si, sj = wi.sum(axis=1), wj.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = (wi @ self.price[self.i_only]) / si - (wj @ self.price[~self.i_only]) / sj
        r = r[:, None]
        bad = (si == 0) | (sj == 0)
        if bad.any() and self._base is not None:
            r[bad] = self._base[0]
        return r


def _market_level_price(panel: MarketPanel) -> np.ndarray:
    lo = np.full(panel.n_markets, np.inf)
    hi = np.full(panel.n_markets, -np.inf)
    np.minimum.at(lo, panel.market, panel.outcome)
    np.maximum.at(hi, panel.market, panel.outcome)
    if np.any(hi > lo):
        m = int(np.argmax(hi > lo))
        raise IncompatibleIndexError(
            f"presence index needs one market-level outcome per market; market "
            f"{panel.market_ids[m]!r} carries several")
    return lo


def _build_problem(panel: MarketPanel, i: int, j: int, kind: IndexKind, cfg: TestConfig) -> _Problem:
    rows = panel.rows
    ri, rj = rows[:, i], rows[:, j]
    pi, pj = ri >= 0, rj >= 0

    if isinstance(kind, PresenceMean):
        qual = np.nonzero(pi ^ pj)[0]
        i_only = pi[qual]
        if i_only.sum() == 0 or (~i_only).sum() == 0:
            raise InsufficientDataError(
                f"pair ({panel.roster[i]}, {panel.roster[j]}): presence index needs markets with "
                f"each agent present without the other")
        price = _market_level_price(panel)[qual]
        if np.ptp(price) == 0:
            return _ZeroProblem(len(qual))
        return _PresenceProblem(price, i_only)

    if isinstance(kind, CdfDominance) and kind.conditioning == "marginal":
        qual = np.nonzero(pi | pj)[0]
        ui = np.nonzero(pi[qual])[0]
        uj = np.nonzero(pj[qual])[0]
        if len(ui) == 0 or len(uj) == 0:
            raise InsufficientDataError(
                f"pair ({panel.roster[i]}, {panel.roster[j]}): an agent has no markets")
        yi = panel.outcome[ri[qual][ui]]
        yj = panel.outcome[rj[qual][uj]]
        pooled = np.concatenate([yi, yj])
        if np.ptp(pooled) == 0:
            return _ZeroProblem(len(qual))
        grid, w = _grid(pooled, cfg)
        return _CdfProblem(ui, yi, uj, yj, len(qual), grid, w, kind.orientation)

    qual = np.nonzero(pi & pj)[0]
    if len(qual) == 0:
        raise InsufficientDataError(
            f"pair ({panel.roster[i]}, {panel.roster[j]}) shares no markets")
    yi = panel.outcome[ri[qual]]
    yj = panel.outcome[rj[qual]]
    units = np.arange(len(qual))

    if isinstance(kind, CdfDominance):
        pooled = np.concatenate([yi, yj])
        if np.ptp(pooled) == 0:
            return _ZeroProblem(len(qual))
        grid, w = _grid(pooled, cfg)
        return _CdfProblem(units, yi, units, yj, len(qual), grid, w, kind.orientation)

    if isinstance(kind, ConditionalMean):
        if panel.dim < 1:
            raise IncompatibleIndexError("conditional-mean index needs at least one covariate")
        xi = panel.covariates[ri[qual]]
        xj = panel.covariates[rj[qual]]
        pooled = np.vstack([xi, xj])
        axes, wts = [], []
        for k in range(panel.dim):
            g, w = _grid(pooled[:, k], cfg)
            axes.append(g)
            wts.append(w)
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.column_stack([m.ravel() for m in mesh])
        weights = wts[0]
        for w in wts[1:]:
            weights = np.multiply.outer(weights, w)
        # spread from the pooled sample, rate from the number of joint markets
        h = cfg.bandwidth_constant * pooled.std(axis=0, ddof=1) * len(qual) ** cfg.bandwidth_exponent
        return _MeanProblem(xi, yi, xj, yj, grid, weights.ravel(), h)

    raise TypeError(f"unknown index kind {kind!r}")


def _integrals(r, w):
    plus = np.maximum(r, 0.0) @ w
    minus = np.maximum(-r, 0.0) @ w
    # |r| = max(r, 0) + max(-r, 0) pointwise, so the absolute integral is the sum
    return plus, minus, plus + minus


# --------------------------------------------------------------------------
# public operations


def _resolve(panel, agent):
    return panel.agent_index(agent)


def statistic_triplet(panel: MarketPanel, i, j, kind: IndexKind, cfg: TestConfig = TestConfig(),
                      grid=None) -> tuple[float, float, float]:
    """``(delta_plus, delta_minus, delta_zero)`` for the ordered pair ``(i, j)``.

    ``grid`` overrides the trimmed quantile grid for the CDF index (joint
    conditioning only); it is used to compare statistics across data sets on
    a common support.
    """
    i, j = _resolve(panel, i), _resolve(panel, j)
    if grid is not None:
        if not (isinstance(kind, CdfDominance) and kind.conditioning == "joint"):
            raise ValueError("a fixed grid is only supported for the joint CDF index")
        qual = np.nonzero((panel.rows[:, i] >= 0) & (panel.rows[:, j] >= 0))[0]
        if len(qual) == 0:
            raise InsufficientDataError("pair shares no markets")
        grid = np.asarray(grid, dtype=float)
        w = np.empty(len(grid))
        d = np.diff(grid)
        w[:-1] = d / 2
        w[1:] += d / 2
        w[-1] = d[-1] / 2 if len(d) else 0.0
        units = np.arange(len(qual))
        prob = _CdfProblem(units, panel.outcome[panel.rows[qual, i]], units,
                           panel.outcome[panel.rows[qual, j]], len(qual), grid, w, kind.orientation)
    else:
        prob = _build_problem(panel, i, j, kind, cfg)
    r = prob.curve(np.ones((1, prob.n_units)))
    plus, minus, zero = _integrals(r, prob.weights)
    return float(plus[0]), float(minus[0]), float(zero[0])


def _agent_key(agent_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(str(agent_id).encode("utf-8"), digest_size=8).digest(), "little")


def pair_rng(seed: int, a: str, b: str) -> np.random.Generator:
    """Stream for the unordered pair ``{a, b}``; row ``k`` of its draws is replicate ``k``."""
    lo, hi = sorted((str(a), str(b)))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_agent_key(lo), _agent_key(hi)))
    return np.random.default_rng(ss)


def draw_units(rng: np.random.Generator, n_units: int, draws: int) -> np.ndarray:
    """``(draws, n_units)`` unit indices; row ``b`` is bootstrap replicate ``b``."""
    return rng.integers(0, n_units, size=(draws, n_units))


def counts_from_draws(idx: np.ndarray, n_units: int) -> np.ndarray:
    draws = idx.shape[0]
    flat = (idx + (np.arange(draws) * n_units)[:, None]).ravel()
    return np.bincount(flat, minlength=draws * n_units).reshape(draws, n_units).astype(float)


TIE_TOLERANCE = 1e-12


def _pvalue(boot, observed):
    # ECDF-based statistics tie exactly in exact arithmetic; count rounding-level
    # near-ties as ties so the result does not depend on summation order
    tol = TIE_TOLERANCE * (1.0 + abs(observed))
    return (1.0 + np.count_nonzero(boot >= observed - tol)) / (len(boot) + 1.0)


def bootstrap_pvalues(panel: MarketPanel, i, j, kind: IndexKind, cfg: TestConfig = TestConfig()) -> PairTestResult:
    """Statistics and recentred-bootstrap p-values for the ordered pair ``(i, j)``.

    The draws depend only on ``(cfg.seed, {i, j})``, so ``(i, j)`` and
    ``(j, i)`` see the same replicates and ``p_minus(i, j) == p_plus(j, i)``.
    """
    if cfg.draws < 1:
        raise ValueError("bootstrap draws must be >= 1")
    i, j = _resolve(panel, i), _resolve(panel, j)
    a, b = (i, j) if panel.roster[i] <= panel.roster[j] else (j, i)
    prob = _build_problem(panel, a, b, kind, cfg)
    r = prob.curve(np.ones((1, prob.n_units)))
    plus, minus, zero = (float(v[0]) for v in _integrals(r, prob.weights))
    idx = draw_units(pair_rng(cfg.seed, panel.roster[a], panel.roster[b]), prob.n_units, cfg.draws)
    bp, bm, bz = prob.bootstrap(idx, r)
    pp, pm, pz = _pvalue(bp, plus), _pvalue(bm, minus), _pvalue(bz, zero)
    if a != i:
        plus, minus = minus, plus
        pp, pm = pm, pp
    return PairTestResult(plus, minus, zero, pp, pm, pz, prob.n_units)


@dataclass(eq=False)
class PValueMatrices:
    """Pairwise p-values (and statistics) over a roster; NaN marks untested pairs."""

    roster: tuple[str, ...]
    p_plus: np.ndarray
    p_minus: np.ndarray
    p_zero: np.ndarray
    delta_plus: np.ndarray
    delta_minus: np.ndarray
    delta_zero: np.ndarray
    n_joint: np.ndarray
    n_markets: int = 0
    config: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.roster)

    @property
    def tested(self) -> np.ndarray:
        t = ~np.isnan(self.p_zero)
        np.fill_diagonal(t, False)
        return t

    @property
    def complete(self) -> bool:
        off = ~np.eye(self.n, dtype=bool)
        return bool(self.tested[off].all())

    def permuted(self, order) -> "PValueMatrices":
        """Same matrices over the roster reordered as ``order`` (list of agent ids)."""
        pos = {a: k for k, a in enumerate(self.roster)}
        ix = np.array([pos[a] for a in order], dtype=np.intp)
        sub = lambda M: M[np.ix_(ix, ix)]
        return PValueMatrices(tuple(order), sub(self.p_plus), sub(self.p_minus), sub(self.p_zero),
                              sub(self.delta_plus), sub(self.delta_minus), sub(self.delta_zero),
                              sub(self.n_joint), self.n_markets, dict(self.config))

    @classmethod
    def from_pvalues(cls, roster, p_plus, p_minus=None, p_zero=None, n_markets=0):
        """Wrap given p-value matrices (statistics left undefined)."""
        p_plus = np.array(p_plus, dtype=float)
        p_minus = p_plus.T.copy() if p_minus is None else np.array(p_minus, dtype=float)
        p_zero = np.minimum(p_plus, p_minus) if p_zero is None else np.array(p_zero, dtype=float)
        nan = np.full_like(p_plus, np.nan)
        for M in (p_plus, p_minus, p_zero):
            np.fill_diagonal(M, np.nan)
        return cls(tuple(roster), p_plus, p_minus, p_zero, nan, nan.copy(), nan.copy(),
                   np.zeros(p_plus.shape, dtype=np.int64), n_markets)

    def to_dict(self) -> dict:
        def mat(M):
            return [[None if np.isnan(v) else float(v) for v in row] for row in M]
        return {
            "roster": list(self.roster),
            "n_markets": int(self.n_markets),
            "p_plus": mat(self.p_plus),
            "p_minus": mat(self.p_minus),
            "p_zero": mat(self.p_zero),
            "delta_plus": mat(self.delta_plus),
            "delta_minus": mat(self.delta_minus),
            "delta_zero": mat(self.delta_zero),
            "n_joint": [[int(v) for v in row] for row in self.n_joint],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PValueMatrices":
        def mat(rows):
            return np.array([[np.nan if v is None else v for v in row] for row in rows], dtype=float)
        n = len(d["roster"])
        empty = [[None] * n for _ in range(n)]
        return cls(tuple(d["roster"]), mat(d["p_plus"]), mat(d["p_minus"]), mat(d["p_zero"]),
                   mat(d.get("delta_plus", empty)), mat(d.get("delta_minus", empty)),
                   mat(d.get("delta_zero", empty)),
                   np.array(d.get("n_joint", [[0] * n] * n), dtype=np.int64),
                   int(d.get("n_markets", 0)), dict(d.get("config", {})))


def pvalue_matrices(panel: MarketPanel, graph: ComparabilityGraph | None, kind: IndexKind,
                    cfg: TestConfig = TestConfig(), require_complete: bool = True,
                    workers: int = 1) -> PValueMatrices:
    """Test every comparable pair.

    With ``graph=None`` all pairs are tested. When the graph is complete and
    ``require_complete`` is set, pairs without enough data raise one
    ``InsufficientDataError`` naming all of them; otherwise such pairs are
    left as NaN.
    """
    n = panel.n_agents
    pos = {a: k for k, a in enumerate(panel.roster)}
    if graph is None:
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        complete = True
    else:
        if tuple(graph.vertices) != panel.roster:
            if set(graph.vertices) != set(panel.roster):
                raise ValueError("graph vertices do not match the panel roster")
        pairs = sorted(tuple(sorted((pos[a], pos[b]))) for a, b in graph.edges)
        complete = graph.is_complete()

    def run(pair):
        try:
            return pair, bootstrap_pvalues(panel, pair[0], pair[1], kind, cfg), None
        except InsufficientDataError as exc:
            return pair, None, exc

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, pairs))
    else:
        results = [run(p) for p in pairs]

    shape = (n, n)
    out = {k: np.full(shape, np.nan) for k in
           ("p_plus", "p_minus", "p_zero", "delta_plus", "delta_minus", "delta_zero")}
    n_joint = np.zeros(shape, dtype=np.int64)
    failed = []
    for (i, j), res, exc in results:
        if res is None:
            failed.append((panel.roster[i], panel.roster[j], str(exc)))
            continue
        out["p_plus"][i, j] = out["p_minus"][j, i] = res.p_plus
        out["p_minus"][i, j] = out["p_plus"][j, i] = res.p_minus
        out["p_zero"][i, j] = out["p_zero"][j, i] = res.p_zero
        out["delta_plus"][i, j] = out["delta_minus"][j, i] = res.delta_plus
        out["delta_minus"][i, j] = out["delta_plus"][j, i] = res.delta_minus
        out["delta_zero"][i, j] = out["delta_zero"][j, i] = res.delta_zero
        n_joint[i, j] = n_joint[j, i] = res.n_joint
    if failed and complete and require_complete:
        listing = "; ".join(f"({a}, {b})" for a, b, _ in failed)
        raise InsufficientDataError(f"{len(failed)} pair(s) lack data: {listing}")
    config = {"kind": kind_to_dict(kind), "test": cfg.to_dict()}
    return PValueMatrices(panel.roster, n_joint=n_joint, n_markets=panel.n_markets, config=config, **out)
