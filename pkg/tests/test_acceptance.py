"""End-to-end acceptance suite. Each test prints one PASS/FAIL line."""

import hashlib
import json
import math
import os
import resource
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from conftest import SCHEMA, TYPES, random_hin, random_metapath, random_risk
from hinrisk.creditmodel import chi2_sf, fit_logistic, score, significance_stars
from hinrisk.evalharness import roc_auc, timestamp_sweep
from hinrisk.hin import Node
from hinrisk.metapath import match_instances, parse_metapath
from hinrisk.mpfeatures import HeteSimEngine, countsim_mp, hetesim, hetesim_mp, naive_mp
from hinrisk.oracles import (
    oracle_auc,
    oracle_chi2_sf,
    oracle_countsim,
    oracle_hetesim,
    oracle_hetesim_feature,
    oracle_match,
    oracle_naive,
    oracle_nb,
)
from hinrisk.pipeline import PipelineConfig, evaluate
from hinrisk.riskbayes import NaiveBayesModel, gamma, posterior, posterior_complement
from hinrisk.synthgen import GenConfig, figure3_fixture, figure5_fixture, generate

RESULTS = []
SEEDS = range(20)


def verdict(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# -- 1, 2: worked examples ---------------------------------------------------------


def test_criterion_01_figure5_naive():
    t = time.perf_counter()
    g = figure5_fixture()
    p = parse_metapath("E-[control]->P-[shareholder]->E", SCHEMA)
    risk = {n: bool(v.risk_label) for n, v in g.nodes.items()}
    j, k = naive_mp(g, "J", p, risk, exact=True), naive_mp(g, "K", p, risk, exact=True)
    jf, kf = naive_mp(g, "J", p, risk), naive_mp(g, "K", p, risk)
    dt = time.perf_counter() - t
    ok = j == Fraction(3, 5) and k == Fraction(3, 4) and jf == 0.6 and kf == 0.75 and dt < 1.0
    verdict(1, ok, f"N_P(J)={j} N_P(K)={k} floats {jf}, {kf} in {dt * 1000:.1f} ms")


def test_criterion_02_figure3_instance():
    g = figure3_fixture()
    p = parse_metapath("E-[parent]->E-[report]->N", SCHEMA)
    found = [str(i) for i in match_instances(g, "v1", p)]
    ok = "v1·e1·v2·e9·v10" in found
    verdict(2, ok, f"instances from v1: {found}")


# -- 3: oracle equivalence -----------------------------------------------------------


def _close(a, b, tol):
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return abs(a - b) <= tol


def test_criterion_03_oracle_equivalence():
    t = time.perf_counter()
    n_graphs, bad = 500, []
    worst_h = worst_f = 0.0
    cells = 0
    for seed in range(n_graphs):
        g = random_hin(seed)
        risk = random_risk(g, seed)
        eng = HeteSimEngine(g)
        rng = np.random.default_rng(10_000 + seed)
        roots = [ty for ty in TYPES if g.nodes_of_type(ty)]
        for _ in range(2):
            p = random_metapath(rng, root=roots[int(rng.integers(len(roots)))], max_len=4)
            for x in g.nodes_of_type(p.root):
                mine = {(i.nodes, i.edges) for i in match_instances(g, x, p)}
                if mine != oracle_match(g, x, p):
                    bad.append((seed, "instances", x, str(p)))
                for s in g.nodes_of_type(p.terminal):
                    d = abs(hetesim(eng, x, s, p) - oracle_hetesim(g, x, s, p))
                    worst_h = max(worst_h, d)
                    if d > 1e-9:
                        bad.append((seed, "hetesim", x, s, str(p)))
                pairs = (
                    (naive_mp(g, x, p, risk), oracle_naive(g, x, p, risk)),
                    (countsim_mp(g, x, p), oracle_countsim(g, x, p)),
                    (hetesim_mp(g, eng, x, p, risk), oracle_hetesim_feature(g, x, p, risk)),
                )
                for a, b in pairs:
                    cells += 1
                    if not _close(a, b, 1e-12):
                        bad.append((seed, "feature", x, str(p), a, b))
                    elif not math.isnan(a):
                        worst_f = max(worst_f, abs(a - b))
    dt = time.perf_counter() - t
    ok = not bad and dt < 300
    verdict(
        3, ok,
        f"{n_graphs} graphs, {cells} feature cells, max HeteSim err {worst_h:.1e}, max feature err "
        f"{worst_f:.1e}, {len(bad)} mismatches, {dt:.1f} s",
    )


# -- 4: Bayes ------------------------------------------------------------------------


def random_model(rng):
    n_attrs = int(rng.integers(1, 11))
    registry, counts, tables, x = {}, {}, {}, {}
    for a in range(n_attrs):
        k = int(rng.integers(2, 6))
        levels = tuple(f"l{i}" for i in range(k))
        p0, p1 = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        registry[f"a{a}"] = levels
        counts[f"a{a}"] = (1, 1)
        tables[f"a{a}"] = {lv: (float(p0[i]), float(p1[i])) for i, lv in enumerate(levels)}
        x[f"a{a}"] = levels[int(rng.integers(k))]
    pi = float(rng.uniform(0.05, 0.95))
    return NaiveBayesModel("enterprise", 1.0, (1 - pi, pi), registry, counts, tables), x


def test_criterion_04_bayes():
    err = norm = 0.0
    for seed in range(1000):
        m, x = random_model(np.random.default_rng(seed))
        err = max(err, abs(posterior(m, x) - oracle_nb(m, x)))
        norm = max(norm, abs(posterior(m, x) + posterior_complement(m, x) - 1.0))
    E = SCHEMA.object_type("enterprise")

    def at(p):
        m = NaiveBayesModel("enterprise", 1.0, (0.5, 0.5), {"a": ("l", "h")}, {"a": (1, 1)},
                            {"a": {"l": (1 - p, p), "h": (p, 1 - p)}})
        node = Node("x", E, {"a": "l"})
        return posterior(m, node), gamma(m, node)

    p_half, g_half = at(0.5)
    p_up, g_up = at(0.5 + 1e-9)
    strict = p_half == 0.5 and g_half is False and p_up > 0.5 and g_up is True
    ok = err <= 1e-10 and norm <= 1e-12 and strict
    verdict(
        4, ok,
        f"1000 models: max |log-space - product| {err:.1e}, max |p + (1-p) - 1| {norm:.1e}, "
        f"gamma(0.5)={g_half} gamma(0.5+1e-9)={g_up}",
    )


# -- 5: MLE ------------------------------------------------------------------------------


def _fd(beta, design, y, h=1e-5):
    from hinrisk.creditmodel import log_likelihood

    g = np.zeros_like(beta)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        g[j] = (log_likelihood(beta + e, design, y) - log_likelihood(beta - e, design, y)) / (2 * h)
    return g


def test_criterion_05_mle():
    rng = np.random.default_rng(20240101)
    x = rng.normal(size=(50_000, 1))
    y = (rng.random(50_000) < 1 / (1 + np.exp(-(-1.0 + 2.0 * x[:, 0])))).astype(float)
    m = fit_logistic(x, y)
    design = m.standardized_design(x)
    g = score(m.coef_std, design, y)
    fd = _fd(m.coef_std, design, y)
    g_inf = float(np.max(np.abs(g)))
    fd_rel = float(np.max(np.abs(fd - g)) / max(1.0, g_inf))
    # a point away from the optimum, where the gradient is not ~0
    off = m.coef_std + np.array([0.3, -0.2])
    g_off = score(off, design, y)
    off_rel = float(np.max(np.abs(_fd(off, design, y) - g_off)) / np.max(np.abs(g_off)))
    b0, b1 = m.coef
    ok = m.converged and g_inf <= 1e-8 and fd_rel <= 1e-4 and off_rel <= 1e-4
    ok = ok and abs(b0 + 1.0) <= 0.05 and abs(b1 - 2.0) <= 0.05
    verdict(
        5, ok,
        f"beta=({b0:.4f}, {b1:.4f}), |grad|_inf={g_inf:.1e}, FD rel err {fd_rel:.1e} at optimum, "
        f"{off_rel:.1e} off optimum",
    )


# -- 6: Wald -------------------------------------------------------------------------------


def test_criterion_06_wald():
    p, _ = chi2_sf(3.841)
    ref = oracle_chi2_sf(3.841)
    probes = {
        0.0999: "*", 0.1: "", 0.0499: "**", 0.05: "*", 0.00999: "***", 0.01: "**", 0.000999: "****",
        0.001: "***",
    }
    stars_ok = all(significance_stars(q) == s for q, s in probes.items())
    ok = abs(p - 0.05) <= 0.0005 and abs(p - ref) <= 1e-10 and stars_ok
    verdict(6, ok, f"chi2(1) tail at 3.841 = {p:.6f} (oracle {ref:.6f}), star boundaries {'ok' if stars_ok else 'wrong'}")


# -- 7: AUC ----------------------------------------------------------------------------------


def test_criterion_07_auc():
    worst = 0.0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 200))
        y = rng.random(n) < rng.uniform(0.1, 0.9)
        y[0], y[1] = True, False
        s = np.round(rng.normal(size=n) + y * rng.uniform(0, 2), int(rng.integers(0, 3)))
        u = stats.mannwhitneyu(s[y], s[~y], alternative="two-sided").statistic / (y.sum() * (~y).sum())
        worst = max(worst, abs(roc_auc(s, y).auc - u))
    four = roc_auc([0.9, 0.8, 0.3, 0.2], [1, 0, 1, 0]).auc
    ok = worst <= 1e-12 and four == 0.75 and oracle_auc([0.9, 0.8, 0.3, 0.2], [1, 0, 1, 0]) == 0.75
    verdict(7, ok, f"max |trapezoid - Mann-Whitney| over 1000 draws {worst:.1e}, 4-point AUC {four}")


# -- 8, 9: directional synthetic results ------------------------------------------------------


@pytest.fixture(scope="module")
def seed_runs():
    runs = []
    for seed in SEEDS:
        cfg = GenConfig(seed=seed)
        g, _ = generate(cfg)
        pcfg = PipelineConfig(seed=seed)
        auc = evaluate(g, pcfg).report.auc
        recent, full = timestamp_sweep(g, [(cfg.cutoff, cfg.horizon), (0, cfg.horizon)], pcfg)
        runs.append((auc, recent.metric, full.metric))
    return runs


def test_criterion_08_method_ordering(seed_runs):
    wins = 0
    for auc, _, _ in seed_runs:
        cv = auc["SME CV"]
        beats = all(auc[m] >= cv + 0.05 for m in ("Naive MP", "CountSim MP", "HeteSim MP"))
        wins += beats and auc["HeteSim MP"] >= auc["Naive MP"]
    means = {m: np.mean([r[0][m] for r in seed_runs]) for m in seed_runs[0][0]}
    text = ", ".join(f"{m} {v:.3f}" for m, v in sorted(means.items()))
    verdict(8, wins >= 16, f"{wins}/20 seeds satisfy every MP family >= CV + 0.05 and HeteSim >= Naive; means {text}")


def test_criterion_09_sweep_direction(seed_runs):
    wins = sum(r > f for _, r, f in seed_runs)
    mr, mf = np.mean([r for _, r, _ in seed_runs]), np.mean([f for _, _, f in seed_runs])
    verdict(9, wins >= 16, f"recent window beats all history in {wins}/20 seeds (mean {mr:.3f} vs {mf:.3f})")


# -- 10, 11: end to end through the command line ------------------------------------------------


def _cli(*args):
    return subprocess.run([sys.executable, "-m", "hinrisk.cli", *args], capture_output=True, text=True)


def _tree(directory):
    out = {}
    for name in sorted(os.listdir(directory)):
        with open(os.path.join(directory, name), "rb") as fh:
            out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


def test_criterion_10_end_to_end_budget(tmp_path):
    t = time.perf_counter()
    a = _cli("synth", "--seed", "0", "--out", str(tmp_path / "data"))
    b = _cli("evaluate", "--data", str(tmp_path / "data"), "--seed", "0", "--out", str(tmp_path / "eval"))
    dt = time.perf_counter() - t
    peak_mb = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss / 1024
    summary = json.loads((tmp_path / "data" / "synth_config.json").read_text())
    n_nodes = sum(summary[k] for k in ("n_enterprise", "n_person", "n_commodity", "n_news"))
    rep = json.loads((tmp_path / "eval" / "report.json").read_text()) if b.returncode == 0 else {}
    methods = sorted(rep.get("methods", {}))
    ok = a.returncode == 0 and b.returncode == 0 and n_nodes == 10_000 and dt <= 60 and peak_mb <= 2048
    ok = ok and {"Naive MP", "CountSim MP", "HeteSim MP"} <= set(methods)
    verdict(
        10, ok,
        f"synth {n_nodes} nodes + 40 paths x 3 kinds + 5-fold eval in {dt:.1f} s on {os.cpu_count()} core(s), "
        f"peak RSS {peak_mb:.0f} MB",
    )


def test_criterion_11_reproducible(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"synth": {"n_enterprise": 300, "n_person": 800, "n_commodity": 300, "n_news": 600}}))
    trees = []
    for run in ("a", "b"):
        d, o = tmp_path / run / "data", tmp_path / run / "eval"
        rcs = [
            _cli("synth", "--config", str(cfg), "--seed", "9", "--out", str(d)).returncode,
            _cli("evaluate", "--config", str(cfg), "--data", str(d), "--seed", "9", "--out", str(o)).returncode,
        ]
        assert rcs == [0, 0]
        trees.append((_tree(d), _tree(o)))
    ok = trees[0] == trees[1]
    n = sum(len(t) for t in trees[0])
    verdict(11, ok, f"{n} artifacts across synth and evaluate, checksums {'identical' if ok else 'differ'}")
