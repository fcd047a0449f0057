"""Synthetic auction panels, Monte Carlo studies and the two-step experiment.

Bids are drawn directly from group-specific normal distributions; no
equilibrium bidding is modelled. Under full participation every agent bids in
every market. Under random-pairs participation each market draws two distinct
groups and one agent from each, with outcomes truncated to a common support.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import optimize, stats

from .classifier import ClassifierConfig, OrderedPartition
from .data import MarketPanel
from .errors import DataError, NumericalError
from .metrics import HAD_LEVELS, Summary, discrepancy, summarize
from .pairwise import CdfDominance, TestConfig
from .pipeline import PipelineConfig, run_pipeline

log = logging.getLogger(__name__)

BASE_MEAN = 2.0
DEFAULT_SIGMA = 0.5
TRUNCATION_Z = 1.96

# named designs: (n, K0, agents per group)
DESIGNS = {
    "S1": (12, 2, 6),
    "S2": (12, 4, 3),
    "S3": (40, 2, 20),
    "S4": (40, 4, 10),
}


@dataclass(frozen=True)
class DgpNormalBids:
    group_sizes: tuple[int, ...]
    mu: tuple[float, ...]
    sigma: float = DEFAULT_SIGMA
    L: int = 400
    participation: str = "full"  # or "pairs"
    shuffle: bool = True  # random assignment of types to roster positions

    def __post_init__(self):
        object.__setattr__(self, "group_sizes", tuple(int(g) for g in self.group_sizes))
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        if len(self.group_sizes) != len(self.mu):
            raise ValueError("one mean per group required")
        if any(g < 1 for g in self.group_sizes):
            raise ValueError("group sizes must be positive")
        if any(b <= a for a, b in zip(self.mu, self.mu[1:])):
            raise ValueError("group means must be strictly increasing")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.L < 1:
            raise ValueError("L must be positive")
        if self.participation not in ("full", "pairs"):
            raise ValueError(f"unknown participation {self.participation!r}")
        if self.participation == "pairs" and self.K0 < 2:
            raise ValueError("random-pairs participation needs at least two groups")

    @property
    def n(self) -> int:
        return sum(self.group_sizes)

    @property
    def K0(self) -> int:
        return len(self.group_sizes)

    @property
    def bounds(self) -> tuple[float, float]:
        m = float(np.mean(self.mu))
        return m - TRUNCATION_Z * self.sigma, m + TRUNCATION_Z * self.sigma

    def to_dict(self) -> dict:
        d = asdict(self)
        d["group_sizes"] = list(self.group_sizes)
        d["mu"] = list(self.mu)
        return d


def design(name: str, L: int = 400, d_mu: float = 0.6, sigma: float = DEFAULT_SIGMA,
           participation: str = "full", **kw) -> DgpNormalBids:
    n, K0, nk = DESIGNS[name]
    mu = tuple(BASE_MEAN + k * d_mu for k in range(K0))
    return DgpNormalBids((nk,) * K0, mu, sigma, L, participation, **kw)


def custom_design(group_sizes, L=400, d_mu=0.6, sigma=DEFAULT_SIGMA, participation="full",
                  **kw) -> DgpNormalBids:
    mu = tuple(BASE_MEAN + k * d_mu for k in range(len(group_sizes)))
    return DgpNormalBids(tuple(group_sizes), mu, sigma, L, participation, **kw)


def _agent_ids(n):
    width = max(2, len(str(n)))
    return tuple(f"b{k:0{width}d}" for k in range(1, n + 1))


def _market_ids(L):
    width = max(3, len(str(L)))
    return tuple(f"m{l:0{width}d}" for l in range(1, L + 1))


def generate(dgp: DgpNormalBids, seed) -> tuple[MarketPanel, OrderedPartition]:
    """Panel and true ordered partition; ``seed`` is an int or a ``SeedSequence``."""
    rng = np.random.default_rng(seed)
    roster = _agent_ids(dgp.n)
    types = np.repeat(np.arange(dgp.K0), dgp.group_sizes)
    if dgp.shuffle:
        types = rng.permutation(types)
    truth = OrderedPartition(tuple(frozenset(roster[i] for i in np.nonzero(types == k)[0])
                                   for k in range(dgp.K0)))
    mu = np.asarray(dgp.mu)

    if dgp.participation == "full":
        Y = mu[types][None, :] + dgp.sigma * rng.standard_normal((dgp.L, dgp.n))
        return MarketPanel.from_dense(Y, roster, _market_ids(dgp.L)), truth

    members = [np.nonzero(types == k)[0] for k in range(dgp.K0)]
    groups = np.argsort(rng.random((dgp.L, dgp.K0)), axis=1)[:, :2]
    picks = rng.random((dgp.L, 2))
    agents = np.empty((dgp.L, 2), dtype=np.intp)
    for c in range(2):
        for k in range(dgp.K0):
            sel = groups[:, c] == k
            agents[sel, c] = members[k][np.floor(picks[sel, c] * len(members[k])).astype(np.intp)]
    means = mu[groups]
    if dgp.sigma > 0:
        lo, hi = dgp.bounds
        a = (lo - means) / dgp.sigma
        b = (hi - means) / dgp.sigma
        Y = stats.truncnorm.rvs(a, b, loc=means, scale=dgp.sigma, random_state=rng)
    else:
        Y = means.astype(float)
    market = np.repeat(np.arange(dgp.L), 2)
    panel = MarketPanel(roster, _market_ids(dgp.L), market, agents.ravel(), Y.ravel(),
                        np.zeros((2 * dgp.L, 0)))
    return panel, truth


def default_kind(dgp: DgpNormalBids) -> CdfDominance:
    # ascending mean = ascending type; same-group agents never meet under random pairs
    return CdfDominance("value", "joint" if dgp.participation == "full" else "marginal")


def replication_seeds(seed: int, rep: int) -> tuple[np.random.SeedSequence, int]:
    """(data seed sequence, bootstrap seed) for replication ``rep``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(rep),))
    data_ss, boot_ss = ss.spawn(2)
    return data_ss, int(boot_ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class Replication:
    rep: int
    k_hat: int | None
    delta: float | None
    error: str | None = None


@dataclass
class MonteCarloResult:
    dgp: DgpNormalBids
    summary: Summary | None
    replications: list[Replication]
    config: dict = field(default_factory=dict)

    @property
    def failures(self) -> int:
        return sum(r.error is not None for r in self.replications)

    def table_row(self) -> dict:
        s = self.summary
        row = {"n": self.dgp.n, "L": self.dgp.L,
               "D_mu": (self.dgp.mu[1] - self.dgp.mu[0]) if self.dgp.K0 > 1 else 0.0,
               "K0": self.dgp.K0,
               "mean_K": s.mean_K if s else math.nan, "EAD": s.EAD if s else math.nan}
        for lam in HAD_LEVELS:
            row[f"HAD_{round(lam * 100):02d}"] = s.HAD.get(lam, math.nan) if s else math.nan
        return row


def _one_replication(dgp, cfg: PipelineConfig, seed, rep) -> Replication:
    data_ss, boot_seed = replication_seeds(seed, rep)
    panel, truth = generate(dgp, data_ss)
    run_cfg = replace(cfg, test=replace(cfg.test, seed=boot_seed))
    try:
        res = run_pipeline(panel, run_cfg)
    except (DataError, NumericalError) as exc:
        return Replication(rep, None, None, f"{type(exc).__name__}: {exc}")
    return Replication(rep, res.selection.k_hat, discrepancy(truth, res.selection.partition).delta)


def run_montecarlo(dgp: DgpNormalBids, replications: int = 200, cfg: PipelineConfig | None = None,
                   seed: int = 0, workers: int = 1) -> MonteCarloResult:
    """Repeat generate -> classify -> score; failed replications are counted and skipped."""
    if replications < 1:
        raise ValueError("need at least one replication")
    if cfg is None:
        cfg = PipelineConfig(kind=default_kind(dgp))
    reps = range(replications)
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            out = list(ex.map(_one_replication, [dgp] * replications, [cfg] * replications,
                              [seed] * replications, reps))
    else:
        out = [_one_replication(dgp, cfg, seed, r) for r in reps]
    ok = [r for r in out if r.error is None]
    for r in out:
        if r.error is not None:
            log.warning("replication %d skipped: %s", r.rep, r.error)
    summary = summarize([r.k_hat for r in ok], [r.delta for r in ok], dgp.n) if ok else None
    config = {"dgp": dgp.to_dict(), "replications": replications, "seed": seed,
              "test": cfg.test.to_dict(), "failures": len(out) - len(ok)}
    return MonteCarloResult(dgp, summary, out, config)


# --------------------------------------------------------------------------
# two-step estimation


def truncated_moments(mu, sigma, lo, hi):
    """First and second raw moments of N(mu, sigma^2) truncated to [lo, hi]."""
    mu = np.asarray(mu, dtype=float)
    a, b = (lo - mu) / sigma, (hi - mu) / sigma
    m, v = stats.truncnorm.stats(a, b, loc=mu, scale=sigma, moments="mv")
    return m, v + m * m


def estimate_theta(panel: MarketPanel, labels: dict, K: int) -> np.ndarray:
    """(mu_1..mu_K, sigma) matching within-group first and second moments.

    The model moments are those of the truncated normal whose support is
    ``mean(mu) +/- 1.96 sigma``. With zero within-group spread the sample
    means are returned with ``sigma = 0``.
    """
    lab = np.array([labels[a] for a in panel.roster])[panel.agent]
    m1 = np.zeros(K)
    m2 = np.zeros(K)
    for k in range(K):
        y = panel.outcome[lab == k + 1]
        if len(y) == 0:
            raise DataError(f"group {k + 1} has no observations")
        m1[k], m2[k] = y.mean(), (y * y).mean()
    resid_var = np.array([panel.outcome[lab == k + 1].var() for k in range(K)])
    pooled = float(np.mean(resid_var))
    if pooled == 0.0:
        return np.append(m1, 0.0)

    def moments_gap(theta):
        mu, sigma = theta[:K], theta[K]
        lo, hi = mu.mean() - TRUNCATION_Z * sigma, mu.mean() + TRUNCATION_Z * sigma
        e1, e2 = truncated_moments(mu, sigma, lo, hi)
        return np.concatenate([m1 - e1, m2 - e2])

    start = np.append(m1, math.sqrt(pooled))
    fit = optimize.least_squares(moments_gap, start, xtol=1e-12, ftol=1e-12, gtol=1e-12,
                                 bounds=(np.append(np.full(K, -np.inf), 1e-8), np.inf))
    return fit.x


@dataclass(frozen=True)
class TwoStepConfig:
    dgp: DgpNormalBids
    replications: int = 200
    test: TestConfig = TestConfig()
    classifier: ClassifierConfig = ClassifierConfig()

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if self.dgp.participation != "pairs":
            raise ValueError("the two-step experiment uses random-pairs participation")


@dataclass
class TwoStepReport:
    theta_true: np.ndarray
    theta_hat: np.ndarray  # (R, K0 + 1); NaN where the estimated groups cannot be matched
    theta_tilde: np.ndarray
    k_hat: np.ndarray
    agree: np.ndarray
    errors: list = field(default_factory=list)

    @property
    def agreement_rate(self) -> float:
        return float(np.mean(self.agree))

    def _nanmean(self, values) -> np.ndarray:
        # columns with no matched estimate stay NaN without a warning
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(values, axis=0)

    def bias(self, which="tilde") -> np.ndarray:
        est = self.theta_tilde if which == "tilde" else self.theta_hat
        return self._nanmean(est - self.theta_true)

    def mse(self, which="tilde") -> np.ndarray:
        est = self.theta_tilde if which == "tilde" else self.theta_hat
        return self._nanmean((est - self.theta_true) ** 2)

    def to_dict(self) -> dict:
        K0 = len(self.theta_true) - 1
        names = [f"mu_{k + 1}" for k in range(K0)] + ["sigma"]
        nan_none = lambda a: [None if not np.isfinite(v) else float(v) for v in a]
        return {
            "parameters": names,
            "theta_true": nan_none(self.theta_true),
            "agreement_rate": self.agreement_rate,
            "mean_K_hat": float(np.mean(self.k_hat)),
            "true_groups": {"bias": nan_none(self.bias("tilde")), "mse": nan_none(self.mse("tilde"))},
            "estimated_groups": {"bias": nan_none(self.bias("hat")), "mse": nan_none(self.mse("hat"))},
            "replications": [
                {"K_hat": int(k), "agree": bool(a), "theta_hat": nan_none(h), "theta_tilde": nan_none(t)}
                for k, a, h, t in zip(self.k_hat, self.agree, self.theta_hat, self.theta_tilde)
            ],
            "errors": list(self.errors),
            "note": "outcomes are treated as observed costs; theta matches truncated-normal moments",
        }


def two_step_experiment(cfg: TwoStepConfig, seed: int = 0) -> TwoStepReport:
    dgp = cfg.dgp
    K0 = dgp.K0
    theta_true = np.append(np.asarray(dgp.mu), dgp.sigma)
    kind = default_kind(dgp)
    hats, tildes, ks, agree, errors = [], [], [], [], []
    for rep in range(cfg.replications):
        data_ss, boot_seed = replication_seeds(seed, rep)
        panel, truth = generate(dgp, data_ss)
        tilde = estimate_theta(panel, truth.labels(), K0)
        hat = np.full(K0 + 1, np.nan)
        k_hat = 0
        try:
            res = run_pipeline(panel, PipelineConfig(kind, replace(cfg.test, seed=boot_seed), cfg.classifier))
            part = res.selection.partition
            k_hat = part.K
            est = estimate_theta(panel, part.labels(), part.K)
            m = min(part.K, K0)
            hat[:m] = est[:m]
            hat[K0] = est[part.K]
        except (DataError, NumericalError) as exc:
            errors.append(f"replication {rep}: {type(exc).__name__}: {exc}")
        hats.append(hat)
        tildes.append(tilde)
        ks.append(k_hat)
        agree.append(k_hat == K0 and np.array_equal(hat, tilde))
    return TwoStepReport(theta_true, np.array(hats), np.array(tildes), np.array(ks),
                         np.array(agree), errors)
