"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Tolerances and runtime limits are the stated ones. Seeds are fixed and were
not tuned.
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

from mixrip.experiments import (ExperimentConfig, inequality_suite, omega_cubed_tail_experiment,
                                psi_mm_moment_experiment, psi_tail_experiment, rip_probability_experiment,
                                variance_experiment)
from mixrip.frequencies import FrequencyMatrix, WeightFunction, sample_frequencies, sample_iid, stream
from mixrip.kernels import KernelSpec, compute_c_kappa, mutual_coherence
from mixrip.mixtures import (LocationFamily, SignedMixture, dipole_decompose, mmd_norm, sample_secant,
                             sample_secant_pair)
from mixrip.ripbounds import (DomainSpec, PsiEvaluator, coherence_grid_oracle, delta_metric, dipole_grid_oracle,
                              lipschitz_bound, sketch_size)
from mixrip.sketch import SketchOperator, sketch_norm_sq


def _unbiased(spec, nu, omegas, w, block=1):
    """Mean of |<phi_w(omega), nu>|^2 and its SE; SE from block means for block-i.i.d. columns."""
    vals = np.abs(SketchOperator(FrequencyMatrix(omegas, "iid", 1, w), spec).feature_products(nu)) ** 2
    groups = vals.reshape(-1, block).mean(axis=1)
    return float(vals.mean()), float(groups.std(ddof=1) / math.sqrt(len(groups)))


def test_criterion_01_dirac_monopole_identity(acceptance_line):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for i in range(50):
        d = int(rng.integers(1, 6))
        scheme = "orthochi" if i % 2 else "iid"
        m = d * int(rng.integers(1, 200))
        spec = KernelSpec("dirac", float(rng.uniform(0.2, 5.0)), d)
        op = SketchOperator(sample_frequencies(spec, m, scheme, i), spec)
        ev = PsiEvaluator(op)
        theta = rng.uniform(-50, 50, (1, d))
        norm_sq = sketch_norm_sq(op(SignedMixture(theta, [1.0])))
        worst = max(worst, abs(ev.psi_m - 1.0), abs(norm_sq - 1.0))
    runtime = time.perf_counter() - t0
    ok = acceptance_line(1, worst <= 1e-12, f"Dirac/flat Psi_m = 1 and delta_M = 0, worst error {worst:.2e}",
                         runtime, 1.0)
    assert ok


def test_criterion_02_unbiasedness(acceptance_line):
    t0 = time.perf_counter()
    spec = KernelSpec("dirac", 1.0, 2)
    fam = LocationFamily(spec, 2.0, 0.0, 20.0)
    worst = 0.0
    for i in range(20):
        nu = sample_secant(2, fam, stream(202, i))
        om = sample_iid(spec, WeightFunction.flat(), 100_000, 1000 + i).omegas
        mean, se = _unbiased(spec, nu, om, WeightFunction.flat())
        worst = max(worst, abs(mean - mmd_norm(nu, spec) ** 2) / se)
    runtime = time.perf_counter() - t0
    ok = acceptance_line(2, worst <= 4.0, f"20 secants, worst |mean - ||nu||^2| = {worst:.2f} SE (<= 4)",
                         runtime, 30.0)
    assert ok


def test_criterion_03_variance_figure(acceptance_line):
    res = variance_experiment(ExperimentConfig(seed=1))
    by = {a["name"]: a["passed"] for a in res.assertions}
    cl = [row[4] for row in res.rows]
    text = (f"(a) classical in [{min(cl):.3f}, {max(cl):.3f}] {'ok' if by['classical_flat'] else 'FAIL'}; "
            f"(b) closed form {'ok' if by['mc_matches_closed_form'] else 'FAIL'}; "
            f"(c) k/7 - 1 {'ok' if by['lower_bound'] else 'FAIL'}")
    ok = acceptance_line(3, res.passed and len(res.rows) == 20, text, res.runtime, 300.0)
    assert ok


def test_criterion_04_psi_tail(acceptance_line):
    res = psi_tail_experiment(ExperimentConfig(seed=4, s=3.0, dims=[5, 100], samples=1_000_000))
    below = all(a["passed"] for a in res.assertions if a["name"].startswith("below_bernstein"))
    hoeff = res.extra["d100"]["min_hoeffding_eps_le_1"]
    ok = acceptance_line(4, below and hoeff >= 0.5,
                         f"empirical <= Bernstein everywhere: {below}; Hoeffding min over eps <= 1 at d=100: "
                         f"{hoeff:.4f} (>= 0.5)", res.runtime, 120.0)
    assert ok


def test_criterion_05_psi_mm_moment(acceptance_line):
    res = psi_mm_moment_experiment(ExperimentConfig(seed=5))
    low = min(row[4] for row in res.rows)
    ok = acceptance_line(5, res.passed and len(res.rows) == 30,
                         f"30 (weight, y) pairs, min estimate + 3 SE = {low:.4f} (>= 0.25)", res.runtime, 60.0)
    assert ok


def test_criterion_06_lipschitz(acceptance_line):
    t0 = time.perf_counter()
    spec = KernelSpec("gaussian", 1.0, 2)
    eps, hw = 1.0, 10.0
    ev = PsiEvaluator(SketchOperator(sample_frequencies(spec, 256, "iid", 6), spec))
    lip = lipschitz_bound(ev, compute_c_kappa(spec, eps))
    rng = np.random.default_rng(606)
    violations, worst = 0, 0.0
    for which in ("d", "mm", "md", "dd"):
        dom = DomainSpec(which, eps, hw, spec, superset=True)
        pts = np.empty((0, dom.n_vars))
        partners = np.empty((0, dom.n_vars))
        while len(pts) < 10_000:
            z, ok_z = dom.project(dom.seeds(4096, rng))
            scale = eps * 10.0 ** rng.uniform(-4, 1, (len(z), 1))
            zp, ok_p = dom.project(z + scale * rng.standard_normal(z.shape))
            keep = ok_z & ok_p
            pts, partners = np.vstack([pts, z[keep]]), np.vstack([partners, zp[keep]])
        pts, partners = pts[:10_000], partners[:10_000]
        diff = np.abs(ev.evaluate(which, pts) - ev.evaluate(which, partners))
        dist = delta_metric(which, spec, pts, partners)
        violations += int(np.sum(diff > lip * dist))
        worst = max(worst, float(np.max(diff / (lip * dist))))
    runtime = time.perf_counter() - t0
    ok = acceptance_line(6, violations == 0, f"4 x 10^4 pairs, {violations} violations, max ratio {worst:.2e}",
                         runtime, 60.0)
    assert ok


def test_criterion_07_reduction_identities(acceptance_line):
    t0 = time.perf_counter()
    spec = KernelSpec("gaussian", 1.0, 1)
    omegas = np.array([[0.3, -0.7, 1.1, 2.0, -1.6, 0.05, 2.5, -0.9]])
    ev = PsiEvaluator(SketchOperator(FrequencyMatrix(omegas, "iid", 1), spec))
    orc = dipole_grid_oracle(ev, 1.0, n_alpha=1001, n_x=1000)
    gap = abs(orc.delta_full - max(orc.delta_m, orc.delta_dhat))
    coh = coherence_grid_oracle(ev, 1.0, 4.0)
    ratio_ok = 1.0 - 1e-12 <= coh.ratio <= 3.0 + 1e-12
    runtime = time.perf_counter() - t0
    ok = acceptance_line(7, gap <= 1e-3 and ratio_ok,
                         f"dipole identity gap {gap:.2e} on {orc.n_points} points; coherence ratio "
                         f"{coh.ratio:.4f} over {coh.n_configs} configurations", runtime, 120.0)
    assert ok


def test_criterion_08_deterministic_domination(acceptance_line):
    res = rip_probability_experiment(ExperimentConfig(seed=8, d=2, k=2, s=1.0, eps=8.0, ms=[4096],
                                                      schemes=["iid"], replicates=200, secants=500))
    dominated = next(a for a in res.assertions if a["name"] == "domination")["passed"]
    rows = [r for r in res.rows if r[5] < 1]
    gap = min(r[3] - r[4] for r in rows) if rows else float("nan")
    ok = acceptance_line(8, dominated and len(rows) == 200,
                         f"{len(rows)} draws with c < 1, empirical <= bound in all: {dominated}, "
                         f"min margin {gap:.3f}", res.runtime, 600.0)
    assert ok


def test_criterion_09_inequality_ledger(acceptance_line):
    res = inequality_suite(ExperimentConfig(seed=9))
    text = ", ".join(f"{r[0]} {r[2]}/{r[1]}" for r in res.rows)
    ok = acceptance_line(9, res.passed, f"violations: {text}", res.runtime, 60.0)
    assert ok


def test_criterion_10_quasi_pythagorean(acceptance_line):
    t0 = time.perf_counter()
    k = 3
    spec = KernelSpec("dirac", 1.0, 2)
    fam = LocationFamily(spec, 3.0, 0.0, 40.0)
    mu = mutual_coherence(spec, fam.epsilon, k, restarts=64, rng=10).mu_hat
    c = (2 * k - 1) * mu
    lo, hi = 1.0 / (1.0 + c), 1.0 / (1.0 - c)
    rng = stream(10, 1)
    bad, sums = 0, []
    for _ in range(1000):
        p, q = sample_secant_pair(k, fam, rng, near_prob=0.5)
        norm = mmd_norm(p - q, spec)
        total = sum((dp.norm(spec) / norm) ** 2 for dp in dipole_decompose(p, q, fam))
        sums.append(total)
        bad += not (lo <= total <= hi)
    runtime = time.perf_counter() - t0
    ok = acceptance_line(10, bad == 0 and c < 1,
                         f"c = {c:.4f}, sum alpha^2 in [{min(sums):.4f}, {max(sums):.4f}] within "
                         f"[{lo:.4f}, {hi:.4f}], {bad} violations", runtime, 60.0)
    assert ok


def test_criterion_11_structured_scheme(acceptance_line):
    t0 = time.perf_counter()
    d, s = 4, 1.5
    spec = KernelSpec("dirac", s, d)
    om = sample_frequencies(spec, 40_000, "orthochi", 11).omegas
    # one column per block gives independent draws
    ks = stats.kstest(om[0, ::d] * s, "norm").pvalue
    fam = LocationFamily(spec, 2.0, 0.0, 20.0)
    worst = 0.0
    for i in range(20):
        nu = sample_secant(2, fam, stream(1100, i))
        big = sample_frequencies(spec, 100_000, "orthochi", 1200 + i).omegas
        mean, se = _unbiased(spec, nu, big, WeightFunction.flat(), block=d)
        worst = max(worst, abs(mean - mmd_norm(nu, spec) ** 2) / se)
    runtime = time.perf_counter() - t0
    ok = acceptance_line(11, ks >= 0.01 and worst <= 4.0,
                         f"KS p-value {ks:.3f} (>= 0.01); unbiasedness worst {worst:.2f} SE (<= 4)", runtime, 60.0)
    assert ok


def test_criterion_12_sketch_size_scaling(acceptance_line):
    t0 = time.perf_counter()
    s, d, tau = 1.0, 10, 0.2
    eps = 4.0 * s * math.sqrt(math.log(5 * math.e * 16))
    ms = {k: sketch_size("DiracMix", k=k, d=d, tau=tau, s=s, eps=eps, diam=10 * eps).m for k in (2, 4, 8, 16)}
    ratios = [ms[2 * k] / ms[k] for k in (2, 4, 8)]
    runtime = time.perf_counter() - t0
    ok = acceptance_line(12, all(3 <= r <= 5 for r in ratios),
                         "m(2k)/m(k) = " + ", ".join(f"{r:.3f}" for r in ratios) + " (in [3, 5])", runtime, 1.0)
    assert ok


def test_criterion_13_omega_cubed_tail(acceptance_line):
    res = omega_cubed_tail_experiment(ExperimentConfig(seed=13))
    text = ", ".join(f"tau={r[0]:g}: {r[3]:.4f} <= {r[2]:.2e}" for r in res.rows)
    ok = acceptance_line(13, res.passed and len(res.rows) == 5, text, res.runtime, 60.0)
    assert ok
