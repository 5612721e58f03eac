"""Gaussian shift-invariant kernels on mixtures of translated base measures.

Two base measures are supported: a Dirac mass at the origin and a centred
Gaussian N(0, Sigma). The kernel on the data space is
``exp(-||x - x'||^2_Sigma / (2 s^2))`` (Sigma = I for the Dirac base). Between
translates of the base measure the kernel reduces to a radial profile
``exp(-r^2 / sigma^2)`` of the Mahalanobis distance ``r``, which is what every
other module works with.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg, optimize, special

__all__ = [
    "KernelSpec",
    "SmoothnessProfile",
    "CoherenceEstimate",
    "normalized_kernel",
    "base_norm_sq",
    "alpha_profile",
    "compute_c_kappa",
    "coherence_threshold",
    "coherence_certificate",
    "dipole_pair_inner",
    "mutual_coherence",
]

DIRAC = "dirac"
GAUSSIAN = "gaussian"


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Gaussian kernel of scale ``s`` for a location family on R^d.

    Parameters
    ----------
    base_kind : {"dirac", "gaussian"}
        Base measure translated by the location parameter.
    scale : float
        Kernel bandwidth ``s > 0``.
    dim : int
        Ambient dimension ``d``.
    covariance : array_like, optional
        Covariance of the Gaussian base (ignored, and forced to identity, for
        the Dirac base). Defaults to the identity.
    """

    base_kind: str
    scale: float
    dim: int
    covariance: np.ndarray | None = field(default=None)

    def __post_init__(self):
        kind = str(self.base_kind).lower()
        if kind not in (DIRAC, GAUSSIAN):
            raise ValueError(f"unknown base kind {self.base_kind!r}")
        object.__setattr__(self, "base_kind", kind)
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise ValueError("scale must be a positive finite number")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("dim must be a positive integer")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "scale", float(self.scale))
        if self.covariance is not None:
            cov = np.array(self.covariance, dtype=float)
            if cov.shape != (self.dim, self.dim):
                raise ValueError(f"covariance must be {self.dim}x{self.dim}")
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * np.abs(cov).max()):
                raise ValueError("covariance must be symmetric")
            if kind == DIRAC and not np.allclose(cov, np.eye(self.dim)):
                raise ValueError("the Dirac base uses the Euclidean norm; drop the covariance")
            cov.setflags(write=False)
            object.__setattr__(self, "covariance", cov)
        # fail early on a non positive definite matrix
        _ = self.chol

    # -- geometry ---------------------------------------------------------
    @property
    def is_identity(self) -> bool:
        return self.covariance is None or np.array_equal(self.covariance, np.eye(self.dim))

    @cached_property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor ``L`` with ``Sigma = L L^T``."""
        if self.is_identity:
            return np.eye(self.dim)
        try:
            return linalg.cholesky(self.covariance, lower=True)
        except linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc

    @property
    def sigma_matrix(self) -> np.ndarray:
        return np.eye(self.dim) if self.covariance is None else np.array(self.covariance)

    def _check_last_axis(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ValueError(f"expected vectors of dimension {self.dim}, got shape {x.shape}")
        return x

    def whiten(self, x) -> np.ndarray:
        """Map parameter-space vectors (last axis) to coordinates where ``||.||_a`` is Euclidean."""
        x = self._check_last_axis(x)
        if self.is_identity:
            return x
        flat = x.reshape(-1, self.dim).T
        out = linalg.solve_triangular(self.chol, flat, lower=True).T
        return out.reshape(x.shape)

    def unwhiten(self, z) -> np.ndarray:
        z = self._check_last_axis(z)
        if self.is_identity:
            return z
        return z @ self.chol.T

    def norm_a(self, x) -> np.ndarray:
        """Mahalanobis norm ``||x||_Sigma`` (Euclidean for the Dirac base) along the last axis."""
        return np.linalg.norm(self.whiten(x), axis=-1)

    def dual_norm(self, omega) -> np.ndarray:
        """Dual norm ``sqrt(w^T Sigma w)`` of frequencies stored along the last axis."""
        omega = self._check_last_axis(omega)
        if self.is_identity:
            return np.linalg.norm(omega, axis=-1)
        return np.linalg.norm(omega @ self.chol, axis=-1)

    # -- radial profile ---------------------------------------------------
    @property
    def sigma(self) -> float:
        """Width of the radial profile ``exp(-r^2 / sigma^2)``."""
        s = self.scale
        if self.base_kind == DIRAC:
            return np.sqrt(2.0) * s
        return np.sqrt(2.0 * (2.0 + s * s))

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.exp(-(r / self.sigma) ** 2)

    def one_minus_profile(self, r) -> np.ndarray:
        """``1 - exp(-r^2/sigma^2)`` without cancellation at small ``r``."""
        r = np.asarray(r, dtype=float)
        return -np.expm1(-(r / self.sigma) ** 2)

    def kernel_bar(self, x) -> np.ndarray:
        return self.profile(self.norm_a(x))

    def base_norm_sq(self) -> float:
        if self.base_kind == DIRAC:
            return 1.0
        return float((1.0 + 2.0 / self.scale**2) ** (-self.dim / 2.0))

    def base_charfun(self, omega) -> np.ndarray:
        """Characteristic function of the base measure at frequencies on the last axis."""
        omega = self._check_last_axis(omega)
        if self.base_kind == DIRAC:
            return np.ones(omega.shape[:-1])
        return np.exp(-0.5 * self.dual_norm(omega) ** 2)

    def data_kernel(self, x) -> np.ndarray:
        """Kernel on the data space, ``exp(-||x||_Sigma^2 / 2 s^2)``."""
        return np.exp(-0.5 * (self.norm_a(x) / self.scale) ** 2)

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        out = {"base_kind": self.base_kind, "s": self.scale, "d": self.dim}
        if not self.is_identity:
            out["sigma_matrix"] = np.asarray(self.covariance).tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "KernelSpec":
        allowed = {"base_kind", "s", "d", "sigma_matrix"}
        extra = set(obj) - allowed
        if extra:
            raise ValueError(f"unknown kernel keys: {sorted(extra)}")
        cov = obj.get("sigma_matrix")
        return cls(obj["base_kind"], obj["s"], obj["d"], None if cov is None else np.asarray(cov, float))

    @classmethod
    def from_json(cls, text: str) -> "KernelSpec":
        return cls.from_dict(json.loads(text))


def normalized_kernel(spec: KernelSpec, x) -> np.ndarray:
    """Normalized kernel between ``pi_0`` and ``pi_x``; equals 1 only at ``x = 0``."""
    out = spec.kernel_bar(x)
    return float(out) if np.ndim(out) == 0 else out


def base_norm_sq(spec: KernelSpec) -> float:
    """Squared kernel-mean-embedding norm of the base measure."""
    return spec.base_norm_sq()


def _alpha_parts(sigma: float, r: np.ndarray):
    t = (r / sigma) ** 2
    v = -np.expm1(-t)
    # 1 - e^{-t}(1 + t), with a Taylor series where it cancels
    num = np.where(t < 1e-3, t**2 / 2 - t**3 / 3 + t**4 / 8 - t**5 / 30, v - t * np.exp(-t))
    return v, num


def alpha_profile(sigma, r):
    """Return ``alpha(r) = r / sqrt(1 - exp(-r^2/sigma^2))`` and its derivative.

    ``sigma`` may be a float, an array broadcasting against ``r`` or a
    :class:`KernelSpec`. The removable singularity
    at ``r = 0`` is filled with ``alpha(0) = sigma`` and ``alpha'(0) = 0``.
    """
    if isinstance(sigma, KernelSpec):
        sigma = sigma.sigma
    sigma = np.asarray(sigma, dtype=float)
    r_in = np.asarray(r, dtype=float)
    if np.any(r_in < 0) or not np.all(np.isfinite(r_in)):
        raise ValueError("r must be non-negative and finite")
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    sigma, r_in = np.broadcast_arrays(sigma, r_in)
    v, num = _alpha_parts(sigma, r_in)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(r_in > 0, r_in / np.sqrt(v), sigma)
        dalpha = np.where(r_in > 0, num / v**1.5, 0.0)
    if r_in.ndim == 0:
        return float(alpha), float(dalpha)
    return alpha, dalpha


@dataclass(frozen=True)
class SmoothnessProfile:
    sigma: float
    R: float
    c_kappa: float
    argmax: float

    @property
    def cap(self) -> float:
        """Closed-form upper bound ``max(1, sqrt3 R^2, sqrt3 sigma^2)``."""
        return max(1.0, np.sqrt(3.0) * self.R**2, np.sqrt(3.0) * self.sigma**2)


def compute_c_kappa(spec, R: float, n_grid: int = 10_000) -> SmoothnessProfile:
    """Smoothness constant ``sup_{0<r<=R} max(1, alpha^2, alpha'^2)``.

    A log-spaced grid on ``(1e-6 sigma, R]`` locates the maximiser, which is
    then polished by bounded scalar minimisation on the bracketing cell.
    """
    sigma = spec.sigma if isinstance(spec, KernelSpec) else float(spec)
    if not R > 0:
        raise ValueError("R must be positive")
    lo = min(1e-6 * sigma, R)
    grid = np.geomspace(lo, R, n_grid)
    a, da = alpha_profile(sigma, grid)
    vals = np.maximum(1.0, np.maximum(a * a, da * da))
    # the r -> 0 limit of alpha^2 is sigma^2
    vals0 = max(1.0, sigma * sigma)
    i = int(np.argmax(vals))
    best, arg = float(vals[i]), float(grid[i])
    if 0 < i < n_grid - 1:
        def neg(r):
            aa, dd = alpha_profile(sigma, r)
            return -max(1.0, aa * aa, dd * dd)

        res = optimize.minimize_scalar(neg, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                       options={"xatol": 1e-12 * R})
        if -res.fun > best:
            best, arg = float(-res.fun), float(res.x)
    if vals0 > best:
        best, arg = vals0, 0.0
    return SmoothnessProfile(sigma=float(sigma), R=float(R), c_kappa=best, argmax=arg)


# -- coherence ---------------------------------------------------------------

def coherence_threshold(spec: KernelSpec, k: int) -> float:
    """Separation above which the closed-form coherence certificate applies."""
    width = spec.scale if spec.base_kind == DIRAC else np.sqrt(spec.scale**2 + 2.0)
    return float(width * 4.0 * np.sqrt(np.log(np.e * k)))


def coherence_certificate(spec: KernelSpec, epsilon: float, k: int):
    """Return ``12 / (16 (2k-1))`` when ``epsilon`` clears the threshold, else None."""
    if epsilon >= coherence_threshold(spec, k) * (1 - 1e-12):
        return 12.0 / (16.0 * (2 * k - 1))
    return None


def dipole_pair_inner(sigma: float, alpha, alpha_p, x, xp, y):
    """Inner product of two normalized dipoles in whitened coordinates.

    The first dipole is ``pi_0 - alpha pi_x``, the second
    ``pi_y - alpha_p pi_{y + xp}``, both scaled to unit kernel norm.
    Arrays broadcast over leading axes; the last axis holds coordinates.
    The numerator is expanded around ``kappa(y)`` so that derivative-like
    dipoles (``x, xp -> 0``) keep full relative accuracy.
    """
    x, xp, y = (np.asarray(v, float) for v in (x, xp, y))
    u = np.asarray(alpha, float)
    v = np.asarray(alpha_p, float)
    s2 = sigma * sigma
    dot = lambda a, b: np.sum(a * b, axis=-1)  # noqa: E731
    nx2, nxp2 = dot(x, x), dot(xp, xp)
    beta = np.expm1(-(2 * dot(y, xp) + nxp2) / s2)
    gamma = np.expm1(-(nx2 - 2 * dot(y, x)) / s2)
    eta = np.expm1(2 * dot(x, xp) / s2)
    num = ((1 - u) * (1 - v) - v * (1 - u) * beta - u * (1 - v) * gamma
           + u * v * (beta * gamma + (1 + beta) * (1 + gamma) * eta))
    num = num * np.exp(-dot(y, y) / s2)
    n1 = (1 - u) ** 2 - 2 * u * np.expm1(-nx2 / s2)
    n2 = (1 - v) ** 2 - 2 * v * np.expm1(-nxp2 / s2)
    return num / np.sqrt(n1 * n2)


@dataclass
class CoherenceEstimate:
    mu_hat: float
    certificate: float | None
    epsilon: float
    k: int
    restarts: int
    argmax: dict
    is_lower_bound: bool = True

    def to_dict(self) -> dict:
        return {"mu_hat": self.mu_hat, "certificate": self.certificate, "epsilon": self.epsilon,
                "k": self.k, "restarts": self.restarts, "argmax": self.argmax,
                "is_lower_bound": self.is_lower_bound}


def _pair_value(p, q: int, sigma2: float, eps: float):
    """Scalar objective for the coherence search: (|inner|, constraint gap)."""
    u = min(max(p[0], 0.0), 1.0)
    v = min(max(p[1], 0.0), 1.0)
    x = p[2:2 + q]
    xp = p[2 + q:2 + 2 * q]
    y = p[2 + 2 * q:2 + 3 * q]
    nx2 = sum(t * t for t in x)
    nxp2 = sum(t * t for t in xp)
    yx = sum(y[i] * x[i] for i in range(q))
    yxp = sum(y[i] * xp[i] for i in range(q))
    xxp = sum(x[i] * xp[i] for i in range(q))
    na2 = sum(t * t for t in y)
    nb2 = na2 + 2 * yxp + nxp2
    nc2 = na2 - 2 * yx + nx2
    nd2 = nb2 + nc2 - na2 - 2 * xxp
    gap = max(0.0, math.sqrt(nx2) - eps) + max(0.0, math.sqrt(nxp2) - eps)
    for n2 in (na2, nb2, nc2, nd2):
        gap += max(0.0, eps - math.sqrt(max(n2, 0.0)))
    if gap > 0 or nx2 == 0.0 or nxp2 == 0.0:
        return 0.0, gap if gap > 0 else 1.0
    beta = math.expm1(-(2 * yxp + nxp2) / sigma2)
    gamma = math.expm1(-(nx2 - 2 * yx) / sigma2)
    eta = math.expm1(2 * xxp / sigma2)
    num = ((1 - u) * (1 - v) - v * (1 - u) * beta - u * (1 - v) * gamma
           + u * v * (beta * gamma + (1 + beta) * (1 + gamma) * eta))
    num *= math.exp(-na2 / sigma2)
    n1 = (1 - u) ** 2 - 2 * u * math.expm1(-nx2 / sigma2)
    n2 = (1 - v) ** 2 - 2 * v * math.expm1(-nxp2 / sigma2)
    return abs(num) / math.sqrt(n1 * n2), 0.0


def mutual_coherence(spec: KernelSpec, epsilon: float, k: int = 1, restarts: int = 64,
                     rng=None, maxiter: int = 200) -> CoherenceEstimate:
    """Estimate the worst inner product between two 1-separated normalized dipoles.

    Multi-start Nelder-Mead over ``(alpha, alpha', x, x', y)`` in whitened
    coordinates of dimension ``min(d, 3)`` (four points span at most three
    dimensions). Dipole lengths are searched on a logit scale so the
    derivative-like limit ``x -> 0`` is reachable. The value found is a lower
    estimate of the supremum; the closed-form certificate is returned
    alongside when it applies.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    rng = np.random.default_rng(rng)
    sigma = spec.sigma
    eps = float(epsilon)
    q = min(spec.dim, 3)
    big = 1e3
    sigma2 = sigma * sigma
    n_par = 3 * q + 4

    def geometry(p):
        lx, dx = p[2], p[3:3 + q]
        lxp, dxp = p[3 + q], p[4 + q:4 + 2 * q]
        y = p[4 + 2 * q:]
        nx, nxp = np.linalg.norm(dx), np.linalg.norm(dxp)
        if nx == 0 or nxp == 0:
            return None
        x = eps * special.expit(min(max(lx, -30.0), 30.0)) * dx / nx
        xp = eps * special.expit(min(max(lxp, -30.0), 30.0)) * dxp / nxp
        return np.concatenate([p[:2], x, xp, y])

    def objective(p):
        g = geometry(p)
        if g is None:
            return big
        val, gap = _pair_value(g.tolist(), q, sigma2, eps)
        return big * (1.0 + gap) if gap > 0 else -val

    def start(i):
        e1 = np.zeros(q)
        e1[0] = 1.0
        if i < 4:
            # collinear configurations at minimal separation
            u, v = (1.0, 1.0, 0.0, 1.0)[i], (1.0, 0.0, 0.0, 1.0)[i]
            lx = (-8.0, 0.0, 0.0, 3.0)[i]
            return np.concatenate([[u, v, lx], -e1, [lx], e1, 1.0001 * eps * e1])
        u, v = rng.uniform(0, 1, 2)
        lx, lxp = rng.uniform(-8.0, 4.0, 2)
        dx, dxp = rng.standard_normal(q), rng.standard_normal(q)
        for _ in range(1000):
            y = rng.standard_normal(q)
            y *= eps * rng.uniform(1.0, 2.5) / np.linalg.norm(y)
            p = np.concatenate([[u, v, lx], dx, [lxp], dxp, y])
            if objective(p) < big:
                return p
        return p

    best_val, best_p = 0.0, None
    opts = {"maxiter": maxiter * n_par, "maxfev": maxiter * n_par, "xatol": 1e-10,
            "fatol": 1e-15, "adaptive": True}
    for i in range(restarts):
        p0 = start(i)
        if objective(p0) >= big:
            continue
        res = optimize.minimize(objective, p0, method="Nelder-Mead", options=opts)
        # a second simplex from the first optimum escapes premature collapse
        res2 = optimize.minimize(objective, res.x, method="Nelder-Mead", options=opts)
        for p in (res2.x, res.x, p0):
            val = objective(p)
            if val < big and -val > best_val:
                best_val, best_p = -val, p
    argmax = {}
    if best_p is not None:
        g = geometry(best_p)
        argmax = {"alpha": float(np.clip(g[0], 0, 1)), "alpha_p": float(np.clip(g[1], 0, 1)),
                  "x": g[2:2 + q].tolist(), "x_p": g[2 + q:2 + 2 * q].tolist(),
                  "y": g[2 + 2 * q:].tolist()}
    return CoherenceEstimate(mu_hat=float(best_val), certificate=coherence_certificate(spec, eps, k),
                             epsilon=eps, k=int(k), restarts=int(restarts), argmax=argmax)
