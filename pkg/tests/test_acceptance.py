"""Acceptance criteria at their stated tolerances; each prints one PASS/FAIL line."""

import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from grouporder.cli import main
from grouporder.confidence import confidence_sets
from grouporder.data import MarketPanel
from grouporder.identification import ComparabilityGraph, check_identified, observationally_equivalent
from grouporder.pairwise import CdfDominance, TestConfig, bootstrap_pvalues
from grouporder.pipeline import PipelineConfig, run_pipeline
from grouporder.classifier import select_K
from grouporder.simulation import (TwoStepConfig, custom_design, default_kind, design, generate,
                                   replication_seeds, run_montecarlo, two_step_experiment)

from oracles import forced_pvalues, ordered_partitions

R = 200
B = 199
SEED = 0


def _mc(dgp):
    res = run_montecarlo(dgp, R, PipelineConfig(kind=default_kind(dgp), test=TestConfig(draws=B)), seed=SEED)
    return res.summary, res.failures


@pytest.mark.slow
def test_criterion_1_single_group(acceptance):
    ok, parts = True, []
    for L in (100, 400):
        s, fails = _mc(custom_design((12,), L=L))
        good = s.mean_K <= 1.05 and s.EAD <= 0.05
        ok &= good
        parts.append(f"L={L}: mean K={s.mean_K:.3f} (<=1.05) EAD={s.EAD:.3f} (<=0.05) failures={fails}")
    acceptance(1, ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_2_strong_separation(acceptance):
    ok, parts = True, []
    for name, K0, (lo, hi), ead_max in (("S1", 2, (1.95, 2.05), 0.05), ("S2", 4, (3.85, 4.05), 0.15)):
        s, fails = _mc(design(name, L=400, d_mu=0.6))
        good = lo <= s.mean_K <= hi and s.EAD <= ead_max
        ok &= good
        parts.append(f"K0={K0}: mean K={s.mean_K:.3f} in [{lo}, {hi}] EAD={s.EAD:.3f} (<={ead_max}) "
                     f"failures={fails}")
    acceptance(2, ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_3_weak_separation(acceptance):
    s, fails = _mc(design("S2", L=100, d_mu=0.2))
    ok = 2.8 <= s.mean_K <= 3.7 and 0.8 <= s.EAD <= 2.2
    acceptance(3, ok, f"mean K={s.mean_K:.3f} in [2.8, 3.7] EAD={s.EAD:.3f} in [0.8, 2.2] failures={fails}")
    assert ok


def _fixture(name):
    return json.loads(resources.files("grouporder.fixtures").joinpath(name).read_text())


def test_criterion_4_identification_golden(acceptance):
    g3 = _fixture("figure3_graph.json")
    g3 = ComparabilityGraph.from_edges(g3["vertices"], g3["edges"])
    ta, tb = _fixture("figure3_tau_a.json"), _fixture("figure3_tau_b.json")
    fig3 = observationally_equivalent(g3, ta, tb) and not check_identified(g3, tb).identified
    g4 = _fixture("figure4_graph.json")
    rep4 = check_identified(ComparabilityGraph.from_edges(g4["vertices"], g4["edges"]),
                            _fixture("figure4_tau.json"))
    fig4 = not rep4.identified and rep4.n_star == {"2", "3", "4", "5"}
    complete = []
    for K0 in (2, 3, 4):
        vs = [str(v) for v in range(1, 9)]
        complete.append(check_identified(ComparabilityGraph.complete(vs),
                                         {v: 1 + k % K0 for k, v in enumerate(vs)}).identified)
    ok = fig3 and fig4 and all(complete)
    acceptance(4, ok, f"path-graph pair indistinguishable/not identified={fig3}; six-vertex case not identified "
                      f"with N*={sorted(rep4.n_star)}; complete graphs K0=2,3,4 identified={complete}")
    assert ok


@pytest.mark.slow
def test_criterion_5_forced_pvalue_oracle(acceptance):
    checked, wrong = 0, []
    for n in range(1, 8):
        roster = [f"a{k}" for k in range(n)]
        for truth in ordered_partitions(roster):
            sel = select_K(roster, forced_pvalues(truth, roster, eps=1e-12), L=400)
            checked += 1
            if (sel.k_hat, sel.partition) != (truth.K, truth):
                wrong.append(truth.to_lists())
    ok = not wrong
    acceptance(5, ok, f"{checked} ordered partitions over n<=7, mismatches={len(wrong)}")
    assert ok


@pytest.mark.slow
def test_criterion_6_null_calibration(acceptance):
    reps, p0 = 500, []
    for r in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence(SEED, spawn_key=(6, r)))
        panel = MarketPanel.from_dense(rng.normal(2.0, 0.5, (200, 2)))
        p0.append(bootstrap_pvalues(panel, 0, 1, CdfDominance(), TestConfig(draws=B, seed=r)).p_zero)
    p0 = np.array(p0)
    mean, rate = p0.mean(), np.mean(p0 <= 0.05)
    ok = 0.40 <= mean <= 0.60 and 0.02 <= rate <= 0.10
    acceptance(6, ok, f"mean p0={mean:.3f} in [0.40, 0.60]; rejection rate={rate:.3f} in [0.02, 0.10]")
    assert ok


@pytest.mark.slow
def test_criterion_7_two_step(acceptance):
    dgp = custom_design((4, 4, 4, 4), L=400, d_mu=0.4, participation="pairs")
    rep = two_step_experiment(TwoStepConfig(dgp, replications=R, test=TestConfig(draws=B)), seed=SEED)
    bias = rep.bias("tilde")[:4]
    ok = rep.agreement_rate >= 0.95 and np.all(np.abs(bias) <= 0.08)
    acceptance(7, ok, f"P(theta_hat == theta_tilde)={rep.agreement_rate:.3f} (>=0.95), mean K={rep.k_hat.mean():.3f}; "
                      f"true-group mu bias={np.round(bias, 4).tolist()} (|.|<=0.08)")
    assert ok


@pytest.mark.slow
def test_criterion_8_confidence_coverage(acceptance):
    dgp = design("S1", L=200, d_mu=0.2)
    covered = np.zeros((R, dgp.K0), dtype=bool)
    k_hats = []
    for r in range(R):
        data_ss, boot_seed = replication_seeds(SEED, r)
        panel, truth = generate(dgp, data_ss)
        cfg = PipelineConfig(kind=default_kind(dgp), test=TestConfig(draws=B, seed=boot_seed))
        base = run_pipeline(panel, cfg)
        k_hats.append(base.selection.k_hat)
        ks = range(1, min(base.selection.k_hat, dgp.K0) + 1)
        sets = confidence_sets(panel, ks, cfg, alpha=0.05, B2=99, seed=boot_seed, base=base)
        for k in ks:
            covered[r, k - 1] = truth.groups[k - 1] <= sets[k].set
    cov = covered.mean(axis=0)
    ok = bool(np.all(cov >= 0.90))
    acceptance(8, ok, f"coverage by group={np.round(cov, 3).tolist()} (>=0.90), mean K={np.mean(k_hats):.3f}")
    assert ok


def _run_all(d: Path) -> dict[str, bytes]:
    for old in d.iterdir():
        old.unlink()
    panel = d / "panel.csv"
    cmds = [
        ["simulate", "--design", "S1", "--L", "60", "--Dmu", "1.0", "--seed", "7", "--out", panel],
        ["pvalues", "--input", panel, "--draws", "19", "--seed", "2", "--histogram", d / "h.csv",
         "--out", d / "pv.json"],
        ["classify", "--pvalues", d / "pv.json", "--out", d / "cl.json"],
        ["identify", "--fixture", "figure4", "--out", d / "id.json"],
        ["confidence", "--input", panel, "--group-index", "1", "--draws", "3", "--pvalue-draws", "9",
         "--out", d / "cs.json"],
        ["montecarlo", "--design", "S1", "--L", "40", "--reps", "2", "--draws", "9", "--out", d / "mc.csv"],
        ["twostep", "--group-sizes", "2,2", "--L", "60", "--reps", "2", "--draws", "9", "--out", d / "ts.json"],
    ]
    for c in cmds:
        assert main([str(a) for a in c]) == 0, c
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_criterion_9_determinism(tmp_path, acceptance):
    # identical inputs include identical paths, so both runs share one directory
    a = _run_all(tmp_path)
    b = _run_all(tmp_path)
    same = [k for k in a if a[k] == b.get(k)]
    ok = set(a) == set(b) and len(same) == len(a)
    acceptance(9, ok, f"{len(same)}/{len(a)} output files byte-identical across reruns "
                      f"(single platform: {sys.platform})")
    assert ok


@pytest.mark.slow
def test_criterion_10_property_suites(acceptance):
    suite = Path(__file__).with_name("test_properties.py")
    proc = subprocess.run([sys.executable, "-m", "pytest", str(suite), "-q", "-p", "no:cacheprovider"],
                          capture_output=True, text=True, cwd=suite.parent.parent)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0
    acceptance(10, ok, f"standalone property run (1000 cases per suite): {tail}")
    assert ok
