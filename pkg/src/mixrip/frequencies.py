"""Frequency distributions, weight functions and (structured) frequency samplers.

Frequencies live in the dual space. With ``Sigma = L L^T`` the flat-weight
law is ``N(0, Sigma^{-1} / s^2)``, sampled as ``L^{-T} z / s`` with ``z``
standard normal. Radial weight functions are functions of the dual norm
``||omega||_* = sqrt(omega^T Sigma omega)``.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, special, stats

from .errors import ConfigurationError
from .kernels import KernelSpec

__all__ = [
    "WeightFunction",
    "FrequencyMatrix",
    "LegacyCheck",
    "fwht",
    "sample_iid",
    "sample_structured",
    "sample_frequencies",
    "check_legacy_condition",
    "stream",
    "SCHEMES",
    "write_container",
    "read_container",
]

SCHEMES = {"iid": 0, "orthochi": 1, "hd": 2}
SKETCH_PAYLOAD = 255
MAGIC = b"MXRP"
VERSION = 1
HEADER = struct.Struct("<4sIIIBQ")
IID_CHUNK = 1024
N_QUAD = 2048


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sub-stream ``index`` of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _radius_pdf(spec: KernelSpec, r):
    """Density of ``||omega||_*`` when omega follows the kernel's spectral law."""
    s = spec.scale
    return s * stats.chi.pdf(s * np.asarray(r, float), spec.dim)


def _radius_max(spec: KernelSpec) -> float:
    return (np.sqrt(spec.dim) + 12.0) / spec.scale


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Positive radial weight ``w(omega) = scale * profile(||omega||_*)``.

    ``kind == "flat"`` is the constant 1. Tabulated profiles are linearly
    interpolated and held constant beyond the last radius.
    """

    kind: str = "flat"
    radii: np.ndarray | None = None
    values: np.ndarray | None = None
    scale: float = 1.0
    name: str = "flat"

    def __post_init__(self):
        if self.kind not in ("flat", "radial"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "radial":
            r = np.asarray(self.radii, float)
            v = np.asarray(self.values, float)
            if r.shape != v.shape or r.ndim != 1 or np.any(np.diff(r) <= 0):
                raise ValueError("radial table needs increasing radii and matching values")
            if np.any(v <= 0) or not np.all(np.isfinite(v)):
                raise ValueError("weight function must be strictly positive")
            object.__setattr__(self, "radii", r)
            object.__setattr__(self, "values", v)
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def flat(cls) -> "WeightFunction":
        return cls()

    @classmethod
    def radial(cls, profile, r_max: float = 1e3, n: int = 8192, name: str = "radial") -> "WeightFunction":
        """Tabulate ``profile(r)`` on a grid that is linear near 0 and geometric beyond 1."""
        half = n // 2
        grid = np.concatenate([np.linspace(0.0, 1.0, half, endpoint=False),
                               np.geomspace(1.0, max(r_max, 2.0), n - half)])
        return cls("radial", grid, np.asarray(profile(grid), float), 1.0, name)

    @property
    def is_flat(self) -> bool:
        return self.kind == "flat"

    def of_radius(self, r) -> np.ndarray:
        r = np.asarray(r, float)
        if self.is_flat:
            return np.full(r.shape, self.scale)
        return self.scale * np.interp(r, self.radii, self.values)

    def __call__(self, omega, spec: KernelSpec) -> np.ndarray:
        """Weight of frequencies stored along the last axis."""
        return self.of_radius(spec.dual_norm(omega))

    def compatibility(self, spec: KernelSpec) -> float:
        """``int w^2 dkappa_hat`` by Gauss-Legendre quadrature on the radius."""
        if self.is_flat:
            return self.scale**2
        x, wq = special.roots_legendre(N_QUAD)
        hi = _radius_max(spec)
        r = 0.5 * hi * (x + 1.0)
        return float(0.5 * hi * np.sum(wq * self.of_radius(r) ** 2 * _radius_pdf(spec, r)))

    def is_compatible(self, spec: KernelSpec, tol: float = 1e-3) -> bool:
        return abs(self.compatibility(spec) - 1.0) <= tol

    def normalized(self, spec: KernelSpec) -> "WeightFunction":
        """Rescale so that the weighted spectral law has unit mass."""
        c = self.compatibility(spec) / self.scale**2
        return WeightFunction(self.kind, self.radii, self.values, 1.0 / np.sqrt(c), self.name)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "name": self.name, "scale": self.scale}


@dataclass(eq=False)
class FrequencyMatrix:
    omegas: np.ndarray
    scheme: str
    block_size: int
    weight: WeightFunction = field(default_factory=WeightFunction.flat)
    seed: int = 0

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, float)
        if self.omegas.ndim != 2:
            raise ValueError("omegas must be a d x m matrix")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.block_size < 1 or self.m % self.block_size:
            raise ValueError("m must be a multiple of the block size")

    @property
    def d(self) -> int:
        return self.omegas.shape[0]

    @property
    def m(self) -> int:
        return self.omegas.shape[1]

    def to_binary(self, path) -> None:
        write_container(path, self.omegas, SCHEMES[self.scheme], self.seed)

    @classmethod
    def from_binary(cls, path, weight: WeightFunction | None = None) -> "FrequencyMatrix":
        scheme_code, seed, payload = read_container(path)
        names = {v: k for k, v in SCHEMES.items()}
        if scheme_code not in names:
            raise ValueError("container does not hold a frequency matrix")
        scheme = names[scheme_code]
        d = payload.shape[0]
        return cls(payload, scheme, 1 if scheme == "iid" else d, weight or WeightFunction.flat(), seed)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["j"] + [f"omega{i}" for i in range(self.d)])
            for j in range(self.m):
                wr.writerow([j] + [f"{v:.17g}" for v in self.omegas[:, j]])


def write_container(path, payload: np.ndarray, kind: int, seed: int) -> None:
    """Little-endian header followed by the column-major float64 payload."""
    payload = np.asarray(payload, "<f8")
    d, m = payload.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, d, m, kind, int(seed) & 0xFFFFFFFFFFFFFFFF))
        fh.write(payload.ravel(order="F").tobytes())


def read_container(path):
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise ValueError("truncated header")
        magic, version, d, m, kind, seed = HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError("not a frequency container")
        if version != VERSION:
            raise ValueError(f"unsupported container version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != d * m:
        raise ValueError("payload size does not match header")
    return kind, seed, data.reshape((d, m), order="F").astype(float)


def _color(spec: KernelSpec, z: np.ndarray) -> np.ndarray:
    """Map standard-normal columns to ``N(0, Sigma^{-1})`` columns."""
    if spec.is_identity:
        return z
    return linalg.solve_triangular(spec.chol.T, z, lower=False)


def _radial_sampler(spec: KernelSpec, w: WeightFunction, n_grid: int = 8192):
    hi = _radius_max(spec)
    r = np.linspace(0.0, hi, n_grid)
    dens = w.of_radius(r) ** 2 * _radius_pdf(spec, r)
    cdf = integrate.cumulative_trapezoid(dens, r, initial=0.0)
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return cdf[keep], r[keep]


def sample_iid(spec: KernelSpec, w: WeightFunction, m: int, seed: int) -> FrequencyMatrix:
    """Independent frequencies from ``w^2 kappa_hat``.

    Columns are generated in chunks of ``IID_CHUNK``, each from its own
    sub-stream, so the result does not depend on how the work is split and
    the first ``m'`` columns of a draw equal a draw of size ``m'``.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if not w.is_compatible(spec):
        raise ConfigurationError(f"weight {w.name!r} is not compatible with the kernel "
                                 f"(integral {w.compatibility(spec):.6g}); normalize it first")
    d = spec.dim
    table = None if w.is_flat else _radial_sampler(spec, w)
    cols = []
    for b, start in enumerate(range(0, m, IID_CHUNK)):
        n = min(IID_CHUNK, m - start)
        g = stream(seed, b)
        # column-major draw: a shorter matrix is a prefix of a longer one
        if table is None:
            z = g.standard_normal((n, d)).T
            cols.append(_color(spec, z) / spec.scale)
        else:
            # one extra normal per column drives the radius through its CDF
            z = g.standard_normal((n, d + 1)).T
            u = special.ndtr(z[-1])
            z = z[:-1]
            rad = np.interp(u, *table)
            direction = z / np.linalg.norm(z, axis=0)
            cols.append(_color(spec, direction * rad))
    omegas = np.concatenate(cols, axis=1) if cols else np.zeros((d, 0))
    return FrequencyMatrix(omegas, "iid", 1, w, seed)


def fwht(v) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the first axis.

    Returns a new array; the butterfly needs ``d log2 d`` additions.
    """
    a = np.array(v, dtype=float)
    n = a.shape[0]
    if n < 1 or n & (n - 1):
        raise ValueError("length must be a power of two")
    rest = a.shape[1:]
    h = 1
    while h < n:
        a = a.reshape((n // (2 * h), 2, h) + rest)
        x, y = a[:, 0], a[:, 1]
        a = np.stack([x + y, x - y], axis=1)
        h *= 2
    return a.reshape((n,) + rest)


def _chi_radii(g: np.random.Generator, d: int) -> np.ndarray:
    return np.sqrt(g.gamma(d / 2.0, 2.0, size=d))


def _orthochi_block(g: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(g.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))[None, :]
    return q * _chi_radii(g, d)[None, :]


def _hd_block(g: np.random.Generator, d: int) -> np.ndarray:
    m = np.eye(d)
    for _ in range(3):
        m = fwht(g.choice([-1.0, 1.0], size=d)[:, None] * m)
    m /= d**1.5
    return m * _chi_radii(g, d)[None, :]


def sample_structured(spec: KernelSpec, m: int, scheme: str, seed: int,
                      w: WeightFunction | None = None) -> FrequencyMatrix:
    """Block-i.i.d. frequencies built from ``d x d`` structured blocks.

    ``orthochi``: Haar orthogonal columns scaled by chi_d radii, exactly
    Gaussian marginals. ``hd``: three Rademacher-Hadamard rounds with chi_d
    column norms, approximately Gaussian marginals, ``d`` a power of two.
    """
    w = WeightFunction.flat() if w is None else w
    if not w.is_flat:
        raise ConfigurationError("structured frequencies support the flat weight only")
    d = spec.dim
    if scheme not in ("orthochi", "hd"):
        raise ConfigurationError(f"unknown structured scheme {scheme!r}")
    if m % d:
        raise ConfigurationError(f"m={m} is not a multiple of d={d}")
    if scheme == "hd" and d & (d - 1):
        raise ConfigurationError(f"the Hadamard scheme needs d a power of two, got {d}")
    make = _orthochi_block if scheme == "orthochi" else _hd_block
    blocks = [make(stream(seed, b), d) for b in range(m // d)]
    z = np.concatenate(blocks, axis=1) if blocks else np.zeros((d, 0))
    return FrequencyMatrix(_color(spec, z) / spec.scale, scheme, d, w, seed)


def sample_frequencies(spec: KernelSpec, m: int, scheme: str, seed: int,
                       w: WeightFunction | None = None) -> FrequencyMatrix:
    w = WeightFunction.flat() if w is None else w
    if scheme == "iid":
        return sample_iid(spec, w, m, seed)
    return sample_structured(spec, m, scheme, seed, w)


@dataclass
class LegacyCheck:
    classification: str
    slope: float
    radii: np.ndarray
    values: np.ndarray


def check_legacy_condition(spec: KernelSpec, w: WeightFunction, r_max: float = 1e6,
                           n: int = 600, slope_tol: float = 0.05) -> LegacyCheck:
    """Classify ``sup |<phi_w, pi_0>| max(1, r, r^2)`` as finite or infinite.

    The product is evaluated along a log-spaced radius grid; a positive
    log-log slope over the last decade signals unbounded growth.
    """
    r = np.geomspace(1e-3, r_max, n)
    g = np.exp(-0.5 * r**2) if spec.base_kind == "gaussian" else np.ones_like(r)
    vals = g / w.of_radius(r) * np.maximum(1.0, np.maximum(r, r * r))
    tail = r >= r_max / 10.0
    with np.errstate(divide="ignore"):
        lv = np.log(vals[tail])
    if not np.all(np.isfinite(lv)):
        slope = -np.inf
    else:
        slope = float(np.polyfit(np.log(r[tail]), lv, 1)[0])
    return LegacyCheck("infinite" if slope > slope_tol else "finite", slope, r, vals)
