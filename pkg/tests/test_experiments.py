import json
import math

import numpy as np
import pytest

from mixrip.errors import ConfigurationError
from mixrip.experiments import (ExperimentConfig, figure_weights, inequality_suite, legacy_lower_bound_experiment,
                                omega_cubed_tail_experiment, psi_mm_moment, psi_tail_curve, rip_probability_experiment,
                                variance_closed_form, variance_experiment, weight_lower_bound_profile)
from mixrip.frequencies import WeightFunction, sample_iid
from mixrip.kernels import KernelSpec


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ExperimentConfig(seed=None)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(seed=1, kmax=0)
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"seed": 1, "colour": "red"})
    cfg = ExperimentConfig.from_dict({"seed": 3, "m": 10})
    assert cfg.get("m", 5) == 10 and cfg.get("k", 7) == 7


def test_variance_closed_form_single_dipole():
    """k = 1: nu = pi_0 - pi_eps, so m Var = E4 / ||nu||^4 - 1 in closed form."""
    spec = KernelSpec("dirac", 1.0, 1)
    eps = 2.0
    theta = np.array([[0.0], [eps]])
    u = np.array([1.0, -1.0])
    kap = math.exp(-eps**2 / 2)
    norm2 = 2 * (1 - kap)
    # sum over (a,b,c,d) of signs times kappa(theta_a - theta_b + theta_c - theta_d)
    e4 = 0.0
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    lag = theta[a, 0] - theta[b, 0] + theta[c, 0] - theta[d, 0]
                    e4 += u[a] * u[b] * u[c] * u[d] * math.exp(-lag**2 / 2)
    assert variance_closed_form(spec, theta, u) == pytest.approx(e4 / norm2**2 - 1)
    # far-apart limit: E4 -> 4 + 2, norm -> 2, so m Var -> 1/2
    assert variance_closed_form(spec, np.array([[0.0], [50.0]]), u) == pytest.approx(0.5)


def test_variance_experiment_small(tmp_path):
    res = variance_experiment(ExperimentConfig(seed=2, kmax=3, replicates=4000, m=20))
    assert len(res.rows) == 3
    assert res.columns[0] == "k"
    assert any(a["name"] == "mc_matches_closed_form" and a["passed"] for a in res.assertions)
    csv_path, json_path = res.write(tmp_path)
    assert csv_path.name == "variance-2.csv"
    meta = json.loads(json_path.read_text())
    assert meta["config"]["seed"] == 2 and meta["config"]["kmax"] == 3


def test_variance_experiment_is_deterministic(tmp_path):
    cfg = dict(seed=5, kmax=2, replicates=500, m=10)
    a = variance_experiment(ExperimentConfig(**cfg))
    b = variance_experiment(ExperimentConfig(**cfg))
    a.write(tmp_path / "a")
    b.write(tmp_path / "b")
    assert (tmp_path / "a" / "variance-5.csv").read_bytes() == (tmp_path / "b" / "variance-5.csv").read_bytes()


def test_psi_tail_curve_properties():
    c = psi_tail_curve(KernelSpec("gaussian", 3.0, 5), 100_000, 0, grid=20)
    assert c.b_psi == pytest.approx((1 + 2 / 9) ** 2.5)
    assert np.all(np.diff(c.empirical) <= 0)
    assert np.all(c.empirical <= c.bernstein)
    assert abs(c.mean_psi - 1) < 4 * c.se_mean
    with pytest.raises(ValueError):
        psi_tail_curve(KernelSpec("dirac", 1.0, 2), 10, 0)


def test_psi_variance_formula_by_quadrature():
    """V_psi against a direct one-dimensional computation of E psi^2 - 1."""
    s, d = 2.0, 1
    c = psi_tail_curve(KernelSpec("gaussian", s, d), 10, 0, grid=2)
    # psi = B exp(-w^2), w ~ N(0, 1/s^2): E psi^2 = B^2 / sqrt(1 + 4/s^2)
    b = math.sqrt(1 + 2 / s**2)
    assert c.v_psi == pytest.approx(b * b / math.sqrt(1 + 4 / s**2) - 1)


def test_figure_weights_are_compatible():
    spec = KernelSpec("dirac", 1.0, 2)
    ws = figure_weights(spec)
    assert set(ws) == {"w0", "w1", "w2"}
    for w in ws.values():
        assert w.is_compatible(spec)


def test_psi_mm_moment_large_lag_flat_weight():
    spec = KernelSpec("dirac", 1.0, 2)
    om = sample_iid(spec, WeightFunction.flat(), 200_000, 0).omegas
    est, se = psi_mm_moment(spec, WeightFunction.flat(), np.array([40.0, 0.0]), 1.0, om)
    assert abs(est - 0.5) < 4 * se
    with pytest.raises(ValueError):
        psi_mm_moment(spec, WeightFunction.flat(), np.array([0.5, 0.0]), 1.0, om)


def test_omega_cubed_tail_bound_example():
    res = omega_cubed_tail_experiment(ExperimentConfig(seed=0, replicates=2000, taus=[1.0]))
    tau, thr, bound = res.rows[0][:3]
    assert thr == pytest.approx(4 * (2**1.5 * math.sqrt(8 / math.pi) + 1))
    assert bound == pytest.approx(math.exp(-8))
    assert res.extra["exact_mean"] == pytest.approx(3 * math.sqrt(math.pi / 2))


def test_inequality_suite_passes_with_audit():
    res = inequality_suite(ExperimentConfig(seed=1, samples=20_000))
    assert res.passed
    assert [r[0] for r in res.rows] == ["exp_inequality", "ratio_bound_2d", "ratio_bound_1d", "alpha_bound",
                                        "alpha_prime_bound", "chi2_mgf"]
    assert all(r[5] == 100 for r in res.rows)


def test_weight_profile_and_legacy_experiment():
    spec = KernelSpec("dirac", 1.0, 1)
    r = np.array([0.5, 10.0])
    assert np.allclose(weight_lower_bound_profile(spec, WeightFunction.flat(), r), [1.0, 10.0])
    res = legacy_lower_bound_experiment(ExperimentConfig(seed=0))
    assert res.passed
    assert res.extra["flat"] == "infinite" and res.extra["quadratic"] == "finite"


def test_rip_probability_small():
    res = rip_probability_experiment(ExperimentConfig(seed=0, ms=[256, 1024], schemes=["iid", "orthochi"],
                                                      replicates=3, secants=20, budget=32, refine=2, max_iter=5))
    assert len(res.rows) == 12
    assert any(a["name"] == "domination" and a["passed"] for a in res.assertions)
    assert set(res.extra["fractions"]) == {"iid-256", "iid-1024", "orthochi-256", "orthochi-1024"}
