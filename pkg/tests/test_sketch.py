import numpy as np
import pytest

from mixrip.frequencies import WeightFunction, sample_frequencies, sample_iid
from mixrip.kernels import KernelSpec
from mixrip.mixtures import SignedMixture, mmd_norm
from mixrip.sketch import (ComplexSketch, SketchOperator, sketch_inner, sketch_norm_sq, sketch_points,
                           sketch_signed_mixture)


def test_dirac_flat_monopole_has_unit_norm():
    spec = KernelSpec("dirac", 1.0, 3)
    op = SketchOperator(sample_frequencies(spec, 257, "iid", 0), spec)
    nu = SignedMixture([[1.0, -2.0, 0.5]], [1.0])
    assert sketch_norm_sq(op(nu)) == pytest.approx(1.0, abs=1e-12)


def test_sketch_matches_explicit_features():
    spec = KernelSpec("gaussian", 1.3, 2)
    w = WeightFunction.radial(lambda r: 1.0 / (1.0 + r)).normalized(spec)
    op = SketchOperator(sample_iid(spec, w, 64, 1), spec)
    nu = SignedMixture([[0.0, 1.0], [2.0, -1.0]], [0.7, -0.4])
    om = op.omegas
    feats = np.exp(-0.5 * np.sum(om**2, axis=0)) / w(om.T, spec)
    expected = (0.7 * np.exp(1j * (np.array([0.0, 1.0]) @ om))
                - 0.4 * np.exp(1j * (np.array([2.0, -1.0]) @ om))) * feats / np.sqrt(64)
    assert np.allclose(op(nu).values, expected)


def test_point_sketch_converges_to_mixture_sketch():
    spec = KernelSpec("gaussian", 1.0, 1)
    op = SketchOperator(sample_frequencies(spec, 16, "iid", 2), spec)
    pts = np.random.default_rng(0).normal(loc=0.5, size=(400_000, 1))
    target = sketch_signed_mixture(op, SignedMixture([[0.5]], [1.0]))
    assert np.max(np.abs(sketch_points(op, pts).values - target.values)) < 0.01


def test_large_sketch_norm_approaches_mmd():
    spec = KernelSpec("dirac", 1.0, 2)
    op = SketchOperator(sample_frequencies(spec, 200_000, "iid", 3), spec)
    nu = SignedMixture([[0.0, 0.0], [0.8, 0.2]], [1.0, -1.0])
    assert sketch_norm_sq(op(nu)) == pytest.approx(mmd_norm(nu, spec) ** 2, rel=0.02)


def test_inner_product_is_hermitian():
    a = ComplexSketch([1 + 2j, 3j])
    b = ComplexSketch([2 - 1j, 1.0])
    assert sketch_inner(a, b) == pytest.approx(np.conj(sketch_inner(b, a)))
    assert sketch_inner(a, a).real == pytest.approx(sketch_norm_sq(a))
    with pytest.raises(ValueError):
        sketch_inner(a, ComplexSketch([1.0]))


def test_sketch_serialization(tmp_path):
    sk = ComplexSketch([1 + 2j, -0.5 + 1e-17j])
    sk.to_binary(tmp_path / "s.bin")
    assert np.array_equal(ComplexSketch.from_binary(tmp_path / "s.bin").values, sk.values)
    sk.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "index,re,im"


def test_dimension_mismatch_rejected():
    spec = KernelSpec("dirac", 1.0, 2)
    op = SketchOperator(sample_frequencies(spec, 4, "iid", 0), spec)
    with pytest.raises(ValueError):
        op(SignedMixture([[0.0, 0.0, 0.0]], [1.0]))
