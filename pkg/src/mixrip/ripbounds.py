"""Deterministic restricted-isometry bounds for sketches of separated mixtures.

The restricted isometry constant of a sketch over normalized secants is
controlled by the sketch's action on monopoles and dipoles. Each of those
quantities is the supremum of an empirical mean ``Psi_l(z) = (1/m) sum_j
psi(omega_j) f_l(z | omega_j)`` over a Euclidean parameter domain. This
module evaluates those means, searches their suprema, assembles the bound,
and provides the Lipschitz, covering-number and sketch-size formulas used
by the probabilistic statements.

Packed parameters: a point of the ``d`` or ``mm`` domain is a ``d``-vector,
a point of ``md`` is ``(x, y)`` concatenated and a point of ``dd`` is
``(x1, x2, y)`` concatenated. ``x`` slots are dipole offsets
(``0 < ||x||_a <= eps``) and ``y`` slots are lags between separated nodes
(``||y||_a >= eps``).
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special
from scipy.stats import qmc

from .errors import PreconditionError
from .kernels import DIRAC, GAUSSIAN, KernelSpec, SmoothnessProfile, compute_c_kappa, mutual_coherence
from .mixtures import LocationFamily, mmd_norm, sample_secant_pair
from .sketch import SketchOperator, sketch_norm_sq, sketch_signed_mixture

__all__ = [
    "WHICH",
    "psi",
    "f_ell",
    "PsiEvaluator",
    "big_psi",
    "big_psi_m",
    "big_psi_0",
    "DomainSpec",
    "SupResult",
    "sup_search",
    "BoundAssembly",
    "assemble_bound",
    "RipReport",
    "rip_report",
    "lipschitz_bound",
    "delta_metric",
    "covering_bound",
    "log_covering_bound",
    "v_k",
    "SketchSize",
    "sketch_size",
    "rip_probability_bound",
    "empirical_delta_sk",
    "DipoleGridOracle",
    "dipole_grid_oracle",
    "CoherenceGridOracle",
    "coherence_grid_oracle",
]

WHICH = ("d", "mm", "md", "dd")
_SLOTS = {"d": "x", "mm": "y", "md": "xy", "dd": "xxy"}
CHUNK = 1 << 20  # entries of the (points x frequencies) work array


def _check_which(which: str) -> str:
    if which not in _SLOTS:
        raise ValueError(f"unknown domain {which!r}; expected one of {WHICH}")
    return which


# -- per-frequency kernels ---------------------------------------------------

def psi(spec: KernelSpec, w, omega) -> np.ndarray:
    """``|<pi_0, phi_w(omega)>|^2 / ||pi_0||^2`` for frequencies on the last axis."""
    omega = np.asarray(omega, float)
    return (spec.base_charfun(omega) / w(omega, spec)) ** 2 / spec.base_norm_sq()


def _unpack(which: str, spec: KernelSpec, z):
    """Split packed points into per-slot ``(n, d)`` blocks."""
    if isinstance(z, tuple):
        z = np.concatenate([np.atleast_1d(np.asarray(v, float)) for v in z], axis=-1)
    z = np.asarray(z, float)
    single = z.ndim == 1
    z2 = np.atleast_2d(z)
    d, n_slots = spec.dim, len(_SLOTS[which])
    if z2.ndim != 2 or z2.shape[1] != n_slots * d:
        raise ValueError(f"domain {which!r} expects {n_slots * d} coordinates, got shape {z.shape}")
    return [z2[:, i * d:(i + 1) * d] for i in range(n_slots)], single


def _dipole_gap(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    """``1 - kappa_bar(x)``, rejecting ``x = 0``."""
    q = spec.one_minus_profile(spec.norm_a(x))
    if np.any(q <= 0):
        raise ValueError("x = 0 in a dipole slot")
    return q


def _f_matrix(which: str, spec: KernelSpec, parts, omegas: np.ndarray) -> np.ndarray:
    proj = [p @ omegas for p in parts]
    if which == "d":
        q = _dipole_gap(spec, parts[0])
        return 2.0 * np.sin(0.5 * proj[0]) ** 2 / q[:, None]
    if which == "mm":
        return np.cos(proj[0])
    if which == "md":
        px, py = proj
        den = np.sqrt(2.0 * _dipole_gap(spec, parts[0]))
        return 2.0 * np.sin(0.5 * px) * np.sin(py + 0.5 * px) / den[:, None]
    p1, p2, py = proj
    den = np.sqrt(2.0 * _dipole_gap(spec, parts[0])) * np.sqrt(2.0 * _dipole_gap(spec, parts[1]))
    return 4.0 * np.sin(0.5 * p1) * np.sin(0.5 * p2) * np.cos(py + 0.5 * (p2 - p1)) / den[:, None]


def f_ell(which: str, spec: KernelSpec, z, omega) -> np.ndarray:
    """Closed-form ``f_l(z | omega)``.

    Parameters
    ----------
    which : {"d", "mm", "md", "dd"}
    spec : KernelSpec
    z : array_like
        Packed point(s), shape ``(n_slots * d,)`` or ``(n, n_slots * d)``,
        or a tuple of slot vectors.
    omega : array_like
        A frequency ``(d,)`` or a matrix ``(d, m)`` of frequency columns.

    Returns
    -------
    ndarray
        Shape ``(n, m)`` with singleton axes dropped for single inputs.
    """
    parts, single = _unpack(_check_which(which), spec, z)
    om = np.asarray(omega, float)
    one_freq = om.ndim == 1
    out = _f_matrix(which, spec, parts, om.reshape(spec.dim, -1))
    if one_freq:
        out = out[:, 0]
    return out[0] if single else out


@dataclass(eq=False)
class PsiEvaluator:
    """Cached per-frequency quantities of a sketching operator.

    ``threads > 1`` splits large evaluations into chunks run on a thread
    pool; results do not depend on the thread count.
    """

    op: SketchOperator
    threads: int = 1

    def __post_init__(self):
        if self.op.m < 1:
            raise ValueError("the operator has no frequencies")
        self.spec = self.op.spec
        self.omegas = self.op.omegas
        self.psi = np.array(self.op.psi, float)
        if np.any(self.psi <= 0):
            raise ValueError("psi must be positive at every frequency")
        self.mean_weights = self.psi / self.op.m
        dn = self.spec.dual_norm(self.omegas.T)
        self.f0 = dn + dn**2 + dn**3

    @property
    def m(self) -> int:
        return self.op.m

    @property
    def psi_m(self) -> float:
        return float(np.mean(self.psi))

    @property
    def psi_0(self) -> float:
        return float(np.mean(self.psi * self.f0))

    def evaluate(self, which: str, z) -> np.ndarray | float:
        """Empirical mean ``Psi_l(z)`` for one or many packed points."""
        parts, single = _unpack(_check_which(which), self.spec, z)
        n = parts[0].shape[0]
        rows = max(1, CHUNK // self.m)
        spans = [(a, min(a + rows, n)) for a in range(0, n, rows)]

        def run(span):
            a, b = span
            return _f_matrix(which, self.spec, [p[a:b] for p in parts], self.omegas) @ self.mean_weights

        if self.threads > 1 and len(spans) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                pieces = list(pool.map(run, spans))
        else:
            pieces = [run(s) for s in spans]
        out = np.concatenate(pieces) if pieces else np.zeros(0)
        return float(out[0]) if single else out

    def deviation(self, which: str, z) -> np.ndarray | float:
        """Search objective: ``|1 - Psi_d|`` on the ``d`` domain, ``|Psi_l|`` otherwise."""
        val = self.evaluate(which, z)
        return np.abs(1.0 - val) if which == "d" else np.abs(val)


def big_psi(which: str, z, evaluator: PsiEvaluator):
    return evaluator.evaluate(which, z)


def big_psi_m(evaluator: PsiEvaluator) -> float:
    return evaluator.psi_m


def big_psi_0(evaluator: PsiEvaluator) -> float:
    return evaluator.psi_0


# -- domains and supremum search -----------------------------------------------

@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Search domain for one of the four empirical processes.

    ``Theta - Theta`` is the box ``[-half_width, half_width]^d``; ``x`` slots
    range over ``{0 < ||x||_a <= eps}`` within it and ``y`` slots over
    ``{||y||_a >= eps}`` within it. By default the ``md`` and ``dd``
    domains also require every cross-node lag (``y + x`` for ``md``;
    ``y + x2``, ``y - x1`` and ``y - x1 + x2`` for ``dd``) to lie in the box
    with ``||.||_a >= eps``, so both dipoles are separated. ``superset=True``
    drops these constraints and searches the full products, which can only
    increase the supremum.
    """

    which: str
    eps: float
    half_width: float
    spec: KernelSpec
    superset: bool = False

    def __post_init__(self):
        _check_which(self.which)
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if "y" in self.slots and self.eps > self.diameter:
            raise ValueError(f"degenerate domain: eps={self.eps:g} exceeds the diameter {self.diameter:g}")

    @classmethod
    def from_family(cls, which: str, family: LocationFamily, superset: bool = False) -> "DomainSpec":
        return cls(which, family.epsilon, family.high - family.low, family.spec, superset)

    @property
    def slots(self) -> str:
        return _SLOTS[self.which]

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def n_vars(self) -> int:
        return len(self.slots) * self.dim

    @property
    def diameter(self) -> float:
        """Diameter of the parameter box under ``||.||_a``."""
        return LocationFamily(self.spec, self.eps, 0.0, self.half_width).diameter

    def covering_number(self, tau: float) -> float:
        return covering_bound(self.dim, self.diameter, tau)

    def project(self, z):
        """Map raw points onto the domain; also return a feasibility mask."""
        z = np.array(z, float, ndmin=2)
        d, eps, hw = self.dim, self.eps, self.half_width
        out = np.clip(z, -hw, hw)
        ok = np.ones(len(out), bool)
        e1 = np.zeros(d)
        e1[0] = 1.0
        for i, kind in enumerate(self.slots):
            sl = slice(i * d, (i + 1) * d)
            w = self.spec.whiten(out[:, sl])
            r = np.linalg.norm(w, axis=1)
            if kind == "x":
                tiny = 1e-9 * eps
                w = np.where((r > eps)[:, None], w * (eps / np.maximum(r, tiny))[:, None], w)
                small = r < tiny
                if small.any():
                    dirs = np.where((r[small] > 0)[:, None], w[small] / np.maximum(r[small], 1e-300)[:, None], e1)
                    w[small] = dirs * tiny
                out[:, sl] = self.spec.unwhiten(w)
            else:
                small = r < eps
                if small.any():
                    dirs = np.where((r[small] > 0)[:, None], w[small] / np.maximum(r[small], 1e-300)[:, None], e1)
                    w[small] = dirs * eps
                out[:, sl] = np.clip(self.spec.unwhiten(w), -hw, hw)
                ok &= self.spec.norm_a(out[:, sl]) >= eps * (1 - 1e-12)
        if not self.superset:
            for lag in self._cross_lags(out):
                ok &= (self.spec.norm_a(lag) >= eps * (1 - 1e-12)) & np.all(np.abs(lag) <= hw * (1 + 1e-12), axis=1)
        return out, ok

    def _cross_lags(self, z: np.ndarray) -> list:
        d = self.dim
        if self.which == "md":
            return [z[:, :d] + z[:, d:2 * d]]
        if self.which == "dd":
            x1, x2, y = z[:, :d], z[:, d:2 * d], z[:, 2 * d:]
            return [y + x2, y - x1, y - x1 + x2]
        return []

    def seeds(self, n: int, rng=None) -> np.ndarray:
        """Space-filling starting points from a scrambled Sobol sequence.

        ``x`` slots use one coordinate for the radius ``r in (0, eps]`` and
        ``d`` for the direction (through the normal quantile function);
        ``y`` slots are uniform in the box before projection.
        """
        d = self.dim
        dims = sum(d + 1 if kind == "x" else d for kind in self.slots)
        sob = qmc.Sobol(dims, scramble=True, seed=np.random.default_rng(rng))
        u = sob.random_base2(max(0, math.ceil(math.log2(max(n, 1)))))[:n]
        cols, j = [], 0
        for kind in self.slots:
            if kind == "x":
                r = self.eps * np.maximum(u[:, j], 1e-9)
                g = special.ndtri(np.clip(u[:, j + 1:j + 1 + d], 1e-12, 1 - 1e-12))
                nrm = np.linalg.norm(g, axis=1, keepdims=True)
                g = np.where(nrm > 0, g / np.maximum(nrm, 1e-300), 1.0 / np.sqrt(d))
                cols.append(self.spec.unwhiten(g * r[:, None]))
                j += d + 1
            else:
                cols.append(self.half_width * (2.0 * u[:, j:j + d] - 1.0))
                j += d
        return self.project(np.hstack(cols))[0]

    def initial_steps(self, n_seeds: int) -> np.ndarray:
        steps = []
        for kind in self.slots:
            width = 2.0 * (self.eps if kind == "x" else self.half_width)
            steps.append(np.full(self.dim, width * max(n_seeds, 1) ** (-1.0 / self.n_vars)))
        return np.maximum(np.concatenate(steps), 1e-4 * self.eps)

    def unpack(self, z) -> dict:
        z = np.asarray(z, float)
        names = {"d": ("x",), "mm": ("y",), "md": ("x", "y"), "dd": ("x1", "x2", "y")}[self.which]
        return {nm: z[i * self.dim:(i + 1) * self.dim].tolist() for i, nm in enumerate(names)}


@dataclass
class SupResult:
    which: str
    value: float
    argmax: np.ndarray
    evaluations: int
    restarts: int
    iterations: int
    is_lower_bound: bool = True

    def to_dict(self, domain: DomainSpec | None = None) -> dict:
        arg = domain.unpack(self.argmax) if domain is not None else np.asarray(self.argmax).tolist()
        return {"which": self.which, "value": self.value, "argmax": arg, "evaluations": self.evaluations,
                "restarts": self.restarts, "iterations": self.iterations,
                "is_lower_bound": self.is_lower_bound}


def _objective(evaluator: PsiEvaluator, domain: DomainSpec, z: np.ndarray):
    z, ok = domain.project(z)
    vals = np.full(len(z), -np.inf)
    if ok.any():
        vals[ok] = evaluator.deviation(domain.which, z[ok])
    return z, vals


def sup_search(which: str, evaluator: PsiEvaluator, domain: DomainSpec, budget: int = 4096,
               refine: int = 32, rng=None, max_iter: int = 200, tol: float = 1e-7) -> SupResult:
    """Estimate the supremum of ``|1 - Psi_d|`` or ``|Psi_l|`` over a domain.

    Parameters
    ----------
    which : {"d", "mm", "md", "dd"}
        Must match ``domain.which``.
    evaluator : PsiEvaluator
    domain : DomainSpec
    budget : int
        Number of space-filling seeds.
    refine : int
        Number of best seeds polished by coordinate pattern search.
    rng : seed or Generator
        Drives the Sobol scrambling.
    max_iter : int
        Pattern-search iterations per refinement.
    tol : float
        Pattern search stops once every step falls below ``tol * eps``.

    Returns
    -------
    SupResult
        The best value found. It is a lower estimate of the supremum.
    """
    if _check_which(which) != domain.which:
        raise ValueError("domain does not match the requested process")
    if budget < 1:
        raise ValueError("budget must be positive")
    z0 = domain.seeds(budget, rng)
    z0, v0 = _objective(evaluator, domain, z0)
    n_eval = len(z0)
    order = np.argsort(-v0, kind="stable")[:max(1, min(refine, len(z0)))]
    pts, vals = z0[order].copy(), v0[order].copy()
    nv = domain.n_vars
    steps = np.tile(domain.initial_steps(budget), (len(pts), 1))
    floor = tol * domain.eps
    moves = np.concatenate([np.eye(nv), -np.eye(nv)])
    it = 0
    for it in range(1, max_iter + 1):
        active = np.flatnonzero(steps.max(axis=1) > floor)
        if active.size == 0:
            break
        cand = pts[active, None, :] + moves[None, :, :] * np.concatenate([steps[active], steps[active]], 1)[:, :, None]
        cz, cv = _objective(evaluator, domain, cand.reshape(-1, nv))
        n_eval += len(cz)
        cz = cz.reshape(len(active), 2 * nv, nv)
        cv = cv.reshape(len(active), 2 * nv)
        best = np.argmax(cv, axis=1)
        bv = cv[np.arange(len(active)), best]
        up = bv > vals[active] + 1e-15
        idx = active[up]
        pts[idx] = cz[up, best[up]]
        vals[idx] = bv[up]
        steps[active[~up]] *= 0.5
    k = int(np.argmax(vals))
    return SupResult(which, float(vals[k]), pts[k].copy(), n_eval, len(pts), it)


# -- bound assembly -------------------------------------------------------------

@dataclass
class BoundAssembly:
    bound: float
    prop2_bound: float
    delta_d: float
    mu_reduced: float
    mu_pairs: float
    defined: bool
    reason: str = ""


def assemble_bound(delta_m: float, delta_dhat: float, mu_mm: float, mu_md: float, mu_dd: float,
                   k: int, c: float, mu_full: float | None = None) -> BoundAssembly:
    """Combine monopole/dipole quantities into the bound on ``delta(S_k | A)``.

    ``bound = (c + max(delta_m, delta_dhat) + (6k - 3) max(mu_mm, mu_md, mu_dd)) / (1 - c)``.
    The intermediate form ``(c + delta_D + (2k - 1) mu_pairs) / (1 - c)`` uses
    ``mu_full`` for the coherence over all pairs of separated dipoles when
    given and ``3 max(mu_mm, mu_md, mu_dd)`` otherwise.
    """
    if k < 1:
        raise ValueError("k must be positive")
    vals = (delta_m, delta_dhat, mu_mm, mu_md, mu_dd, c)
    if any(not np.isfinite(v) or v < 0 for v in vals):
        raise ValueError("deltas, coherences and c must be finite and nonnegative")
    delta_d = max(delta_m, delta_dhat)
    mu_red = max(mu_mm, mu_md, mu_dd)
    mu_pairs = 3.0 * mu_red if mu_full is None else float(mu_full)
    if c >= 1:
        return BoundAssembly(math.nan, math.nan, delta_d, mu_red, mu_pairs, False,
                             f"c = {c:.6g} >= 1: bound undefined")
    bound = (c + delta_d + (6 * k - 3) * mu_red) / (1.0 - c)
    prop2 = (c + delta_d + (2 * k - 1) * mu_pairs) / (1.0 - c)
    return BoundAssembly(bound, prop2, delta_d, mu_red, mu_pairs, True)


def _finite_or_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite_or_none(obj.item())
    if isinstance(obj, np.ndarray):
        return _finite_or_none(obj.tolist())
    return obj


@dataclass
class RipReport:
    psi_m: float
    delta_m: float
    delta_dhat: float
    mu_mm: float
    mu_md: float
    mu_dd: float
    mu_hat: float
    c: float
    k: int
    bound_delta_sk: float
    prop2_bound: float
    defined: bool
    psi0: float
    c_kappa: float
    lipschitz: float
    m: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _finite_or_none(asdict(self))

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)


def lipschitz_bound(evaluator: PsiEvaluator, profile: SmoothnessProfile) -> float:
    """Lipschitz constant ``6 Psi_0(Omega) C_kappa`` shared by all four processes."""
    return 6.0 * evaluator.psi_0 * profile.c_kappa


def rip_report(op: SketchOperator, family: LocationFamily, k: int, mu_hat: float | None = None,
               budget: int = 4096, refine: int = 32, max_iter: int = 200, rng=None,
               coherence_restarts: int = 64, superset: bool = False) -> RipReport:
    """Run the full bound pipeline for one sketching operator.

    ``mu_hat`` is the kernel coherence used in ``c = (2k - 1) mu_hat``; it is
    estimated by :func:`mutual_coherence` when omitted. ``superset`` selects
    the unconstrained ``md`` and ``dd`` search domains (see :class:`DomainSpec`).
    """
    rng = np.random.default_rng(rng)
    ev = PsiEvaluator(op)
    eps = family.epsilon
    diag = {"superset_domains": superset}
    sups = {}
    for which in WHICH:
        dom = DomainSpec.from_family(which, family, superset)
        res = sup_search(which, ev, dom, budget, refine, rng, max_iter)
        sups[which] = res.value
        diag[which] = res.to_dict(dom)
    if mu_hat is None:
        coh = mutual_coherence(family.spec, eps, k, coherence_restarts, rng)
        mu_hat = coh.mu_hat
        diag["coherence"] = coh.to_dict()
    c = (2 * k - 1) * mu_hat
    delta_m = abs(1.0 - ev.psi_m)
    asm = assemble_bound(delta_m, sups["d"], sups["mm"], sups["md"], sups["dd"], k, c)
    if not asm.defined:
        diag["undefined"] = asm.reason
    prof = compute_c_kappa(family.spec, eps)
    return RipReport(ev.psi_m, delta_m, sups["d"], sups["mm"], sups["md"], sups["dd"], float(mu_hat), c, k,
                     asm.bound, asm.prop2_bound, asm.defined, ev.psi_0, prof.c_kappa,
                     lipschitz_bound(ev, prof), op.m, diag)


# -- metrics ------------------------------------------------------------------------

def _delta_d(spec: KernelSpec, x: np.ndarray, xp: np.ndarray) -> np.ndarray:
    r, rp = spec.norm_a(x), spec.norm_a(xp)
    return np.abs(r - rp) + spec.norm_a(x / r[:, None] - xp / rp[:, None])


def delta_metric(which: str, spec: KernelSpec, z, zp) -> np.ndarray | float:
    """Metric ``Delta_l`` on packed points of the domain ``which``.

    ``Delta_d(x, x') = | ||x||_a - ||x'||_a | + || x/||x||_a - x'/||x'||_a ||_a``
    on dipole slots and ``||y - y'||_a`` on lag slots, summed over slots.
    """
    parts, single = _unpack(_check_which(which), spec, z)
    parts_p, _ = _unpack(which, spec, zp)
    total = 0.0
    for kind, a, b in zip(_SLOTS[which], parts, parts_p):
        total = total + (_delta_d(spec, a, b) if kind == "x" else spec.norm_a(a - b))
    return float(total[0]) if single else total


def log_covering_bound(d: int, diameter: float, tau: float) -> float:
    if not tau > 0:
        raise ValueError("tau must be positive")
    if diameter < 0 or d < 1:
        raise ValueError("invalid dimension or diameter")
    return (3 * d + 2) * math.log1p(64.0 * (diameter + 1.0) / tau)


def covering_bound(d: int, diameter: float, tau: float) -> float:
    """Covering number bound ``(1 + 64 (D + 1) / tau)^(3d + 2)`` (inf on overflow)."""
    lg = log_covering_bound(d, diameter, tau)
    if lg >= 709.0:
        return math.inf
    return (1.0 + 64.0 * (diameter + 1.0) / tau) ** (3 * d + 2)


# -- sketch sizes ------------------------------------------------------------------

def v_k(k: int, c0_over_tau: float) -> float:
    """``512 k^2 ((C0/tau)^2 + (C0/tau)/3)``."""
    if k < 1:
        raise ValueError("k must be positive")
    return 512.0 * k * k * (c0_over_tau**2 + c0_over_tau / 3.0)


_COROLLARIES = {"gaussian": "gaussian", "gaussianmix": "gaussian", "dirac": "dirac",
                "diracmix": "dirac", "structured": "structured"}


@dataclass
class SketchSize:
    corollary: str
    base: str
    m: float
    v: float
    C: float
    C0: float
    prefactor: float
    mu: float
    c: float
    iterations: int


def _separation_width(base: str, s: float) -> float:
    return s if base == DIRAC else math.sqrt(s * s + 2.0)


def sketch_size(cor: str, *, k: int, d: int, tau: float, s: float, eps: float, diam: float,
                eta: float = 0.01, mu: float | None = None, base: str = DIRAC,
                rtol: float = 1e-6, max_iter: int = 100) -> SketchSize:
    """Sufficient sketch size ``m >= v ((3d+2) log(1 + C/tau) + log(prefactor/eta))``.

    Parameters
    ----------
    cor : {"GaussianMix", "DiracMix", "Structured"}
        Which guarantee to evaluate; ``Structured`` uses block-i.i.d.
        frequencies with blocks of size ``d`` and the kernel given by ``base``.
    k, d : int
        Mixture order and dimension.
    tau : float
        Slack in the RIP level ``(4c + tau) / (1 - c)``.
    s, eps, diam : float
        Kernel scale, separation and ``||.||_a``-diameter of the parameter set.
    eta : float
        Failure probability.
    mu : float, optional
        Coherence bound. Defaults to ``12 / (16 (10k - 1))``, valid once
        ``eps >= width * 4 sqrt(log(5 e k))``.
    base : {"dirac", "gaussian"}
        Base measure for the structured variant.

    Raises
    ------
    PreconditionError
        When ``mu >= 1/(10k)``, ``tau >= 1 - 5c`` or the separation is too small.
    """
    key = _COROLLARIES.get(str(cor).lower())
    if key is None:
        raise ValueError(f"unknown corollary {cor!r}")
    if key != "structured":
        base = key
    if base not in (DIRAC, GAUSSIAN):
        raise ValueError(f"unknown base {base!r}")
    if k < 1 or d < 1:
        raise ValueError("k and d must be positive")
    if not (tau > 0 and s > 0 and eps > 0 and diam >= 0 and 0 < eta <= 1):
        raise ValueError("tau, s, eps must be positive, diam nonnegative and eta in (0, 1]")
    if mu is None:
        need = _separation_width(base, s) * 4.0 * math.sqrt(math.log(5.0 * math.e * k))
        if eps < need * (1 - 1e-12):
            raise PreconditionError(f"separation eps >= {need:.6g} violated (eps = {eps:.6g})")
        mu = 12.0 / (16.0 * (10 * k - 1))
    if not mu < 1.0 / (10 * k):
        raise PreconditionError(f"mu < 1/(10k) = {1.0 / (10 * k):.6g} violated (mu = {mu:.6g})")
    c = (2 * k - 1) * mu
    if not tau < 1.0 - 5.0 * c:
        raise PreconditionError(f"tau < 1 - 5c = {1.0 - 5.0 * c:.6g} violated (tau = {tau:.6g})")
    block = d if key == "structured" else 1
    lin = max(1.0, math.sqrt(3.0) * eps * eps)
    if base == GAUSSIAN:
        b_psi = (1.0 + 2.0 / s**2) ** (d / 2.0)
        c0 = 7.0 * math.sqrt(3.0) * eps**2 * b_psi / s**2
        big_c = 43000.0 * eps**2 * b_psi * k * (1.0 + diam)
        prefactor = 11.0
    else:
        c0 = 7.0 * lin / s**2
        big_c = None
        prefactor = 10.0 + (d if key == "structured" else 1)
    v = block * v_k(k, c0 / tau)

    def c_of(m):
        if big_c is not None:
            return big_c
        return (6144.0 * (1.0 + 2.0 / s) ** 3 * lin * (2.0 * d**1.5 + math.sqrt(m / block) * tau**1.5)
                * k * (1.0 + diam))

    def formula(m):
        return v * ((3 * d + 2) * math.log1p(c_of(m) / tau) + math.log(prefactor / eta))

    m = formula(1.0)
    it = 0
    if big_c is None:
        for it in range(1, max_iter + 1):
            new = formula(m)
            done = abs(new - m) <= rtol * m
            m = new
            if done:
                break
    return SketchSize(key, base, m, v, c_of(m), c0, prefactor, mu, c, it)


def rip_probability_bound(m: float, v: float, C: float, tau: float, d: int, prefactor: float = 11.0) -> float:
    """``prefactor * exp(-m/v) * (1 + C/tau)^(3d+2)``, possibly above one (vacuous)."""
    lg = math.log(prefactor) - m / v + (3 * d + 2) * math.log1p(C / tau)
    return math.exp(lg) if lg < 709.0 else math.inf


# -- empirical restricted isometry ------------------------------------------------

def empirical_delta_sk(op: SketchOperator, k: int, n_secants: int, rng, family: LocationFamily,
                       near_prob: float = 0.5) -> float:
    """Largest ``| ||A nu||^2 - 1 |`` over sampled normalized secants.

    A lower estimate of the restricted isometry constant. Returns 0 for
    ``n_secants = 0`` (empty supremum).
    """
    if n_secants < 0:
        raise ValueError("n_secants must be nonnegative")
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(n_secants):
        p, q = sample_secant_pair(k, family, rng, near_prob)
        diff = p - q
        nu = diff.scaled(1.0 / mmd_norm(diff, op.spec))
        worst = max(worst, abs(sketch_norm_sq(sketch_signed_mixture(op, nu)) - 1.0))
    return worst


# -- dense one-dimensional oracles ---------------------------------------------------

@dataclass
class DipoleGridOracle:
    delta_full: float
    delta_m: float
    delta_dhat: float
    argmax_alpha: float
    argmax_x: float
    n_points: int


def dipole_grid_oracle(evaluator: PsiEvaluator, eps: float, n_alpha: int = 1001,
                       n_x: int = 1000) -> DipoleGridOracle:
    """Grid maximum of ``| ||A iota||^2 - 1 |`` over all normalized dipoles in 1-D.

    A dipole ``pi_0 - alpha pi_x`` has
    ``||A iota||^2 = ((1-alpha)^2 Psi_m + 2 alpha P(x)) / ((1-alpha)^2 + 2 alpha (1 - kappa_bar(x)))``
    with ``P(x) = (1/m) sum psi (1 - cos(omega x))``. The grid covers
    ``alpha in [0, 1]`` and ``0 < |x| <= eps``.
    """
    if evaluator.spec.dim != 1:
        raise ValueError("the grid oracle is one-dimensional")
    half = max(1, n_x // 2)
    pos = eps * np.arange(1, half + 1) / half
    x = np.concatenate([-pos[::-1], pos])
    om = evaluator.omegas[0]
    p = (2.0 * np.sin(0.5 * np.outer(x, om)) ** 2) @ evaluator.mean_weights
    q = evaluator.spec.one_minus_profile(np.abs(x))
    a = np.linspace(0.0, 1.0, n_alpha)[:, None]
    num = (1 - a) ** 2 * evaluator.psi_m + 2 * a * p[None, :]
    den = (1 - a) ** 2 + 2 * a * q[None, :]
    dev = np.abs(num / den - 1.0)
    i, j = np.unravel_index(np.argmax(dev), dev.shape)
    return DipoleGridOracle(float(dev[i, j]), abs(1.0 - evaluator.psi_m), float(np.max(np.abs(1.0 - p / q))),
                            float(a[i, 0]), float(x[j]), dev.size)


@dataclass
class CoherenceGridOracle:
    mu_full: float
    mu_mm: float
    mu_md: float
    mu_dd: float
    n_configs: int

    @property
    def mu_reduced(self) -> float:
        return max(self.mu_mm, self.mu_md, self.mu_dd)

    @property
    def ratio(self) -> float:
        return self.mu_full / self.mu_reduced


def coherence_grid_oracle(evaluator: PsiEvaluator, eps: float, length: float, n_eps: int = 20,
                          n_alpha: int = 11) -> CoherenceGridOracle:
    """Sketched coherences of 1-D dipole pairs on a lattice of step ``eps / n_eps``.

    Enumerates node quadruples ``theta_1, theta_2, theta_1', theta_2'`` in
    ``[0, length]`` with ``|theta_1 - theta_2|, |theta_1' - theta_2'| <= eps``
    and cross distances ``>= eps``. ``mu_full`` maximizes
    ``|Re <A iota, A iota'>|`` over dipole weights on an ``n_alpha`` grid
    (including 0 and 1); the reduced values restrict to monopole pairs,
    monopole/balanced-dipole pairs and balanced-dipole pairs.
    """
    if evaluator.spec.dim != 1:
        raise ValueError("the grid oracle is one-dimensional")
    h = eps / n_eps
    n_box = int(math.floor(length / h + 1e-9))
    if n_box < n_eps:
        raise ValueError("length must be at least eps")
    lags = np.arange(-2 * n_box, 2 * n_box + 1)
    table = np.cos(np.outer(lags * h, evaluator.omegas[0])) @ evaluator.mean_weights
    gap = evaluator.spec.one_minus_profile(np.abs(lags) * h)

    def G(i):
        return table[i + 2 * n_box]

    offs = np.concatenate([-np.arange(n_eps, 0, -1), np.arange(1, n_eps + 1)])
    ix, ixp, iy = np.meshgrid(offs, offs, np.arange(-n_box, n_box + 1), indexing="ij")
    ix, ixp, iy = ix.ravel(), ixp.ravel(), iy.ravel()
    # nodes relative to theta_1 = 0: theta_2 = -x, theta_1' = -y, theta_2' = -y - x'
    nodes = np.stack([np.zeros_like(ix), -ix, -iy, -iy - ixp])
    keep = nodes.max(axis=0) - nodes.min(axis=0) <= n_box
    for lag in (iy, iy + ixp, iy - ix, iy - ix + ixp):
        keep &= np.abs(lag) >= n_eps
    ix, ixp, iy = ix[keep], ixp[keep], iy[keep]
    if ix.size == 0:
        raise ValueError("no admissible configuration; increase length")
    a, b, c, dd = G(iy), G(iy + ixp), G(iy - ix), G(iy - ix + ixp)
    e, f = 1.0 - gap[ix + 2 * n_box], 1.0 - gap[ixp + 2 * n_box]

    def h_val(u, v):
        num = a - v * b - u * c + u * v * dd
        return np.abs(num / np.sqrt((1 + u * u - 2 * u * e) * (1 + v * v - 2 * v * f)))

    grid = np.linspace(0.0, 1.0, n_alpha)
    mu_full = max(float(h_val(u, v).max()) for u in grid for v in grid)
    mu_md = max(float(h_val(1.0, 0.0).max()), float(h_val(0.0, 1.0).max()))
    return CoherenceGridOracle(mu_full, float(np.abs(a).max()), mu_md, float(h_val(1.0, 1.0).max()), int(ix.size))
