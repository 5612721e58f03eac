"""Weighted random Fourier sketches of signed mixtures."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .frequencies import SKETCH_PAYLOAD, FrequencyMatrix, read_container, write_container
from .kernels import KernelSpec
from .mixtures import SignedMixture

__all__ = [
    "SketchOperator",
    "ComplexSketch",
    "sketch_signed_mixture",
    "sketch_points",
    "sketch_inner",
    "sketch_norm_sq",
]


@dataclass(eq=False)
class SketchOperator:
    """Linear map ``nu -> (1/sqrt(m)) (<phi_j, nu>)_j`` with ``phi_j = e^{i omega_j . x} / w(omega_j)``."""

    freqs: FrequencyMatrix
    spec: KernelSpec

    def __post_init__(self):
        if self.freqs.d != self.spec.dim:
            raise ValueError("frequency dimension does not match the kernel")
        om = self.freqs.omegas.T
        self.inv_weight = 1.0 / self.freqs.weight(om, self.spec)
        self.charfun = self.spec.base_charfun(om)
        # |<pi_0, phi_w>|^2 / ||pi_0||^2
        self.psi = (self.charfun * self.inv_weight) ** 2 / self.spec.base_norm_sq()

    @property
    def m(self) -> int:
        return self.freqs.m

    @property
    def omegas(self) -> np.ndarray:
        return self.freqs.omegas

    def _phases(self, centers: np.ndarray) -> np.ndarray:
        centers = np.atleast_2d(np.asarray(centers, float))
        if centers.shape[1] != self.spec.dim:
            raise ValueError("dimension mismatch between mixture and sketch")
        return np.exp(1j * (centers @ self.omegas))

    def feature_products(self, nu: SignedMixture) -> np.ndarray:
        """Per-frequency ``<phi_w(omega_j), nu>`` without the ``1/sqrt(m)`` factor."""
        return (nu.weights @ self._phases(nu.centers)) * self.charfun * self.inv_weight

    def __call__(self, nu: SignedMixture) -> "ComplexSketch":
        return sketch_signed_mixture(self, nu)


@dataclass(eq=False)
class ComplexSketch:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, complex)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __add__(self, other: "ComplexSketch") -> "ComplexSketch":
        return ComplexSketch(self.values + other.values)

    def __sub__(self, other: "ComplexSketch") -> "ComplexSketch":
        return ComplexSketch(self.values - other.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["index", "re", "im"])
            for j, v in enumerate(self.values):
                wr.writerow([j, f"{v.real:.17g}", f"{v.imag:.17g}"])

    def to_binary(self, path, seed: int = 0) -> None:
        write_container(path, np.vstack([self.values.real, self.values.imag]), SKETCH_PAYLOAD, seed)

    @classmethod
    def from_binary(cls, path) -> "ComplexSketch":
        kind, _, payload = read_container(path)
        if kind != SKETCH_PAYLOAD or payload.shape[0] != 2:
            raise ValueError("container does not hold a sketch")
        return cls(payload[0] + 1j * payload[1])


def sketch_signed_mixture(op: SketchOperator, nu: SignedMixture) -> ComplexSketch:
    """Closed-form sketch of a signed mixture of translated base measures."""
    return ComplexSketch(op.feature_products(nu) / np.sqrt(op.m))


def sketch_points(op: SketchOperator, X) -> ComplexSketch:
    """Empirical sketch ``(1/n) sum_i Phi(x_i)`` of a point cloud."""
    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[0] == 0:
        raise ValueError("empty point set")
    feats = op._phases(X).mean(axis=0) * op.inv_weight
    return ComplexSketch(feats / np.sqrt(op.m))


def sketch_inner(a: ComplexSketch, b: ComplexSketch) -> complex:
    """Hermitian inner product ``a^T conj(b)``."""
    if len(a) != len(b):
        raise ValueError("sketch length mismatch")
    return complex(np.sum(a.values * np.conj(b.values)))


def sketch_norm_sq(a: ComplexSketch) -> float:
    return float(np.sum(a.values.real**2 + a.values.imag**2))
