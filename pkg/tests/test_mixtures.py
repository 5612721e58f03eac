import numpy as np
import pytest

from mixrip.errors import ConfigurationError, SeparationError
from mixrip.kernels import KernelSpec
from mixrip.mixtures import (Dipole, LocationFamily, Mixture, SignedMixture, dipole_decompose, mmd_inner, mmd_norm,
                             sample_mixture, sample_secant, sample_secant_pair, secants_to_csv)


@pytest.fixture
def family():
    return LocationFamily(KernelSpec("dirac", 1.0, 2), 2.0, 0.0, 30.0)


def brute_mmd2(nu, spec):
    total = 0.0
    for a, wa in zip(nu.centers, nu.weights):
        for b, wb in zip(nu.centers, nu.weights):
            total += wa * wb * spec.base_norm_sq() * spec.kernel_bar(a - b)
    return total


def test_mmd_matches_double_sum():
    spec = KernelSpec("gaussian", 0.7, 2)
    rng = np.random.default_rng(0)
    nu = SignedMixture(rng.normal(size=(5, 2)), rng.normal(size=5))
    assert mmd_norm(nu, spec) ** 2 == pytest.approx(brute_mmd2(nu, spec), rel=1e-12)
    assert mmd_inner(nu, nu, spec) == pytest.approx(brute_mmd2(nu, spec), rel=1e-12)


def test_dirac_pair_distance():
    spec = KernelSpec("dirac", 1.0, 1)
    nu = SignedMixture([[0.0], [1.0]], [1.0, -1.0])
    assert mmd_norm(nu, spec) ** 2 == pytest.approx(2 * (1 - np.exp(-0.5)))


def test_signed_mixture_algebra_and_serialization():
    a = SignedMixture([[0.0, 1.0]], [0.5])
    b = SignedMixture([[2.0, 1.0]], [0.25])
    diff = a - b
    assert diff.weights.tolist() == [0.5, -0.25]
    assert (a + b).weights.tolist() == [0.5, 0.25]
    assert diff.scaled(2.0).weights.tolist() == [1.0, -0.5]
    back = SignedMixture.from_list(diff.to_list())
    assert np.array_equal(back.centers, diff.centers) and np.array_equal(back.weights, diff.weights)


def test_mixture_requires_probability_weights():
    with pytest.raises(ValueError):
        Mixture([[0.0]], [0.5])
    with pytest.raises(ValueError):
        Mixture([[0.0], [1.0]], [1.5, -0.5])


def test_separation_check(family):
    p = Mixture([[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5])
    assert p.separation_violations(family)
    with pytest.raises(SeparationError):
        p.check_separated(family)


def test_sampled_mixtures_are_separated(family):
    rng = np.random.default_rng(1)
    for _ in range(10):
        p = sample_mixture(4, family, rng)
        assert not p.separation_violations(family)
        assert np.all((p.centers >= 0) & (p.centers <= 30))


def test_sampler_reports_impossible_packing():
    fam = LocationFamily(KernelSpec("dirac", 1.0, 1), 2.0, 0.0, 3.0)
    with pytest.raises(ConfigurationError):
        sample_mixture(5, fam, 0, budget=200)


def test_dipole_norm_and_normalization():
    spec = KernelSpec("dirac", 1.0, 1)
    dp = Dipole(np.array([0.0]), np.array([0.5]), 0.6)
    expected = np.sqrt(1 + 0.36 - 2 * 0.6 * np.exp(-0.125))
    assert dp.norm(spec) == pytest.approx(expected)
    assert dp.normalized(spec).norm(spec) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        Dipole(np.array([0.0]), None, 0.5)


def test_decomposition_reconstructs_difference(family):
    rng = np.random.default_rng(2)
    spec = family.spec
    for _ in range(20):
        p, q = sample_secant_pair(3, family, rng, near_prob=0.7)
        parts = dipole_decompose(p, q, family)
        total = parts[0].as_signed_mixture()
        for dp in parts[1:]:
            total = total + dp.as_signed_mixture()
        assert mmd_norm(total - (p - q), spec) < 1e-9
        for i, a in enumerate(parts):
            assert a.rho(family) <= 1.0
            for b in parts[i + 1:]:
                assert a.separated_from(b, family)


def test_secant_is_normalized(family):
    nu = sample_secant(2, family, 5)
    assert mmd_norm(nu, family.spec) == pytest.approx(1.0)


def test_secants_csv(tmp_path, family):
    nus = [sample_secant(2, family, i) for i in range(3)]
    path = tmp_path / "s.csv"
    secants_to_csv(nus, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("secant,term,weight,c0,c1")
    assert len(lines) == 1 + sum(len(n.weights) for n in nus)
