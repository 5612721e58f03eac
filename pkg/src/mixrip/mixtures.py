"""Separated mixtures of translated base measures, dipoles and secants.

All geometry uses the kernel's Mahalanobis norm ``||.||_a``; the separation
function is ``rho(t, t') = ||t - t'||_a / eps``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SeparationError
from .kernels import KernelSpec

__all__ = [
    "LocationFamily",
    "SignedMixture",
    "Mixture",
    "Dipole",
    "mmd_inner",
    "mmd_norm",
    "dipole_decompose",
    "sample_mixture",
    "sample_secant_pair",
    "sample_secant",
    "secants_to_csv",
]

ZERO_DIPOLE = 1e-14


@dataclass(frozen=True, eq=False)
class LocationFamily:
    """Translates of a base measure with separation radius ``epsilon``.

    ``low`` and ``high`` bound the sampling box ``[low, high]^d`` used for
    the parameter set.
    """

    spec: KernelSpec
    epsilon: float
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.high > self.low:
            raise ValueError("empty sampling box")

    @property
    def dim(self) -> int:
        return self.spec.dim

    def rho(self, a, b) -> np.ndarray:
        return self.spec.norm_a(np.asarray(a, float) - np.asarray(b, float)) / self.epsilon

    @property
    def diameter(self) -> float:
        """Diameter of the box under ``||.||_a``."""
        side = self.high - self.low
        d = self.dim
        if self.spec.is_identity:
            return float(side * np.sqrt(d))
        if d <= 12:
            corners = np.array(np.meshgrid(*[[0.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
            diffs = (corners[:, None, :] - corners[None, :, :]).reshape(-1, d) * side
            return float(self.spec.norm_a(diffs).max())
        lam = np.linalg.eigvalsh(self.spec.sigma_matrix).min()
        return float(side * np.sqrt(d / lam))

    def to_dict(self) -> dict:
        return {"kernel": self.spec.to_dict(), "epsilon": self.epsilon, "low": self.low, "high": self.high}


@dataclass(frozen=True, eq=False)
class SignedMixture:
    """Finite signed combination ``sum_i w_i pi_{theta_i}``."""

    centers: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, float))
        w = np.atleast_1d(np.asarray(self.weights, float))
        if c.shape[0] != w.shape[0]:
            raise ValueError("centers and weights differ in length")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def __sub__(self, other: "SignedMixture") -> "SignedMixture":
        return SignedMixture(np.vstack([self.centers, other.centers]),
                             np.concatenate([self.weights, -other.weights]))

    def __add__(self, other: "SignedMixture") -> "SignedMixture":
        return SignedMixture(np.vstack([self.centers, other.centers]),
                             np.concatenate([self.weights, other.weights]))

    def scaled(self, factor: float) -> "SignedMixture":
        return SignedMixture(self.centers, self.weights * factor)

    def to_list(self) -> list:
        return [{"center": c.tolist(), "weight": float(w)} for c, w in zip(self.centers, self.weights)]

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    @classmethod
    def from_list(cls, items) -> "SignedMixture":
        return cls([it["center"] for it in items], [it["weight"] for it in items])


class Mixture(SignedMixture):
    """Probability mixture with nonnegative weights summing to one."""

    def __init__(self, centers, weights):
        super().__init__(centers, weights)
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")

    def separation_violations(self, family: LocationFamily, factor: float = 2.0):
        """Pairs ``(i, j, rho)`` with ``rho < factor``."""
        out = []
        n = len(self.weights)
        for i in range(n):
            for j in range(i + 1, n):
                r = float(family.rho(self.centers[i], self.centers[j]))
                if r < factor:
                    out.append((i, j, r))
        return out

    def check_separated(self, family: LocationFamily, factor: float = 2.0):
        bad = self.separation_violations(family, factor)
        if bad:
            i, j, r = bad[0]
            raise SeparationError(
                f"centers {i} and {j} are {r:.6g} apart in units of eps (need >= {factor})")


def _gram(a: np.ndarray, b: np.ndarray, spec: KernelSpec) -> np.ndarray:
    diff = spec.whiten(a)[:, None, :] - spec.whiten(b)[None, :, :]
    return np.exp(-np.sum(diff**2, axis=-1) / spec.sigma**2)


def mmd_inner(a: SignedMixture, b: SignedMixture, spec: KernelSpec) -> float:
    """Kernel-mean-embedding inner product of two signed mixtures."""
    if a.dim != spec.dim or b.dim != spec.dim:
        raise ValueError("dimension mismatch between mixtures and kernel")
    return float(spec.base_norm_sq() * (a.weights @ _gram(a.centers, b.centers, spec) @ b.weights))


def mmd_norm(a: SignedMixture, spec: KernelSpec) -> float:
    return float(np.sqrt(max(mmd_inner(a, a, spec), 0.0)))


@dataclass(frozen=True, eq=False)
class Dipole:
    """``amplitude * sign * (pi_theta1 - alpha pi_theta2)`` with ``alpha`` in [0, 1].

    ``alpha = 0`` is a monopole and ``theta2`` is then ignored.
    """

    theta1: np.ndarray
    theta2: np.ndarray | None
    alpha: float
    sign: int = 1
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "theta1", np.asarray(self.theta1, float))
        if self.theta2 is not None:
            object.__setattr__(self, "theta2", np.asarray(self.theta2, float))
        elif self.alpha != 0.0:
            raise ValueError("a dipole with alpha > 0 needs theta2")

    @property
    def is_monopole(self) -> bool:
        return self.alpha == 0.0

    def as_signed_mixture(self) -> SignedMixture:
        c = self.amplitude * self.sign
        if self.is_monopole:
            return SignedMixture(self.theta1[None, :], [c])
        return SignedMixture(np.vstack([self.theta1, self.theta2]), [c, -c * self.alpha])

    def norm(self, spec: KernelSpec) -> float:
        return mmd_norm(self.as_signed_mixture(), spec)

    def normalized(self, spec: KernelSpec) -> "Dipole":
        n = self.norm(spec)
        return Dipole(self.theta1, self.theta2, self.alpha, self.sign, self.amplitude / n)

    def rho(self, family: LocationFamily) -> float:
        return 0.0 if self.is_monopole else float(family.rho(self.theta1, self.theta2))

    def nodes(self) -> list:
        return [self.theta1] if self.is_monopole else [self.theta1, self.theta2]

    def separated_from(self, other: "Dipole", family: LocationFamily) -> bool:
        return all(family.rho(a, b) >= 1.0 for a in self.nodes() for b in other.nodes())


def _dipole_from_weights(t1, w1, t2, w2) -> Dipole:
    """Dipole ``w1 pi_t1 - w2 pi_t2`` for nonnegative ``w1, w2``."""
    if t2 is None or w2 == 0:
        return Dipole(t1, None, 0.0, 1, w1)
    if t1 is None or w1 == 0:
        return Dipole(t2, None, 0.0, -1, w2)
    if w1 >= w2:
        return Dipole(t1, t2, w2 / w1, 1, w1)
    return Dipole(t2, t1, w1 / w2, -1, w2)


def dipole_decompose(p: Mixture, q: Mixture, family: LocationFamily) -> list[Dipole]:
    """Split ``p - q`` into pairwise 1-separated dipoles.

    Each center of ``q`` is paired with the center of ``p`` lying within one
    separation unit, if any. Unpaired centers become monopoles; dipoles whose
    kernel norm is negligible are dropped.
    """
    p.check_separated(family)
    q.check_separated(family)
    spec = family.spec
    used_p = set()
    parts = []
    for j, (tq, wq) in enumerate(zip(q.centers, q.weights)):
        r = family.rho(p.centers, tq)
        i = int(np.argmin(r))
        if r[i] <= 1.0 and i not in used_p:
            used_p.add(i)
            parts.append(_dipole_from_weights(p.centers[i], p.weights[i], tq, wq))
        else:
            parts.append(_dipole_from_weights(None, 0.0, tq, wq))
    for i, (tp, wp) in enumerate(zip(p.centers, p.weights)):
        if i not in used_p:
            parts.append(_dipole_from_weights(tp, wp, None, 0.0))
    return [dp for dp in parts if dp.amplitude > 0 and dp.norm(spec) >= ZERO_DIPOLE]


def sample_mixture(k: int, family: LocationFamily, rng, budget: int = 10_000, near=None,
                   near_prob: float = 0.0) -> Mixture:
    """Draw a 2-separated k-mixture by dart throwing in the sampling box.

    With probability ``near_prob`` each proposal is placed within one
    separation unit of a random center of ``near`` (a reference mixture),
    which produces close pairs and hence genuine dipoles in ``p - q``.
    """
    if k < 1:
        raise ValueError("k must be positive")
    rng = np.random.default_rng(rng)
    d = family.dim
    centers: list[np.ndarray] = []
    tries = 0
    while len(centers) < k:
        tries += 1
        if tries > budget:
            raise ConfigurationError(
                f"could not place {k} centers with separation 2*eps={2 * family.epsilon:g} "
                f"in the box [{family.low:g}, {family.high:g}]^{d} after {budget} attempts")
        if near is not None and rng.uniform() < near_prob:
            base = near.centers[rng.integers(len(near.weights))]
            z = rng.standard_normal(d)
            z *= rng.uniform() ** (1.0 / d) / np.linalg.norm(z)
            cand = base + family.spec.unwhiten(z * family.epsilon)
            if np.any(cand < family.low) or np.any(cand > family.high):
                continue
        else:
            cand = rng.uniform(family.low, family.high, d)
        if all(family.rho(cand, c) >= 2.0 for c in centers):
            centers.append(cand)
    weights = rng.dirichlet(np.ones(k))
    return Mixture(np.array(centers), weights)


def sample_secant_pair(k: int, family: LocationFamily, rng, near_prob: float = 0.5,
                       budget: int = 10_000, max_retries: int = 100):
    """Two 2-separated k-mixtures with a non-negligible difference."""
    rng = np.random.default_rng(rng)
    for _ in range(max_retries):
        p = sample_mixture(k, family, rng, budget)
        q = sample_mixture(k, family, rng, budget, near=p, near_prob=near_prob)
        if mmd_norm(p - q, family.spec) > 1e-8:
            return p, q
    raise ConfigurationError("secant sampler produced only negligible differences")


def sample_secant(k: int, family: LocationFamily, rng, near_prob: float = 0.5,
                  budget: int = 10_000) -> SignedMixture:
    """Normalized secant ``(p - q) / ||p - q||`` between two sampled k-mixtures."""
    p, q = sample_secant_pair(k, family, rng, near_prob, budget)
    diff = p - q
    return diff.scaled(1.0 / mmd_norm(diff, family.spec))


def secants_to_csv(secants, path) -> None:
    """Write secants as rows ``(secant, term, weight, c_0, ..., c_{d-1})``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        d = secants[0].dim if secants else 0
        wr.writerow(["secant", "term", "weight"] + [f"c{i}" for i in range(d)])
        for s_id, sec in enumerate(secants):
            for t_id, (c, w) in enumerate(zip(sec.centers, sec.weights)):
                wr.writerow([s_id, t_id, f"{w:.17g}"] + [f"{v:.17g}" for v in c])
