"""End-to-end computations: Hall constants, entropies, expected spectra."""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Literal

import numpy as np
from filelock import FileLock

from . import __version__
from .eigenparam import (angles_to_eigenvalues, full_box_to_unit_cube,
                         jacobian_over_sqrt_det, region_to_unit_cube)
from .kernels import (DivergenceError, KernelSpec, bloch_ball_density,
                      bures_marginal_phi_n3, bures_marginal_theta_n3,
                      bures_theta_marginal_n2, pair_product,
                      quasi_theta_marginal_n2, quasi_theta_phi_n3,
                      bures_theta_phi_n3, redundancy_n2)
from .numbers import RecognitionReport, partial_sum_denominators, recognize_pi_rational
from .qmc import QmcConfig, integrate_qmc
from .quad import AdaptiveConfig, QuadratureEstimate, integrate_adaptive, integrate_iterated_1d

Method = Literal["adaptive", "qmc"]
Region = Literal["ordered", "full"]

# rel_tol per n for the adaptive engine, tighter than the accuracy we
# promise so the true error has margin
ADAPTIVE_REL_TOL = {2: 1e-12, 3: 1e-11, 4: 1e-10, 5: 1e-8, 6: 1e-4}
QMC_DEFAULTS = {
    2: QmcConfig(max_points=1_000_000, batch=100_000, rel_tol=1e-6),
    3: QmcConfig(max_points=4_000_000, batch=250_000, rel_tol=1e-5),
    4: QmcConfig(max_points=10_000_000, batch=500_000, rel_tol=1e-4),
    5: QmcConfig(max_points=10_000_000, batch=500_000, rel_tol=5e-4, min_points=10_000_000),
}
ADVISORY_FROM_N = 6
ENTROPY_FIT_MAX_DENOMINATOR = 10 ** 4


def default_adaptive(n: int, workers: int = 1) -> AdaptiveConfig:
    return AdaptiveConfig(rel_tol=ADAPTIVE_REL_TOL.get(n, 1e-4), workers=workers)


def default_qmc(n: int, workers: int = 1) -> QmcConfig:
    base = QMC_DEFAULTS.get(n, QmcConfig(max_points=50_000_000, batch=1_000_000, rel_tol=1e-3))
    return replace(base, workers=workers)


# ---------------------------------------------------------------------------
# results


@dataclass
class ConstantResult:
    spec: KernelSpec
    method: Method
    region: Region
    raw_integral: float
    constant: float
    ordering_multiplier: int
    estimate: QuadratureEstimate
    recognition: RecognitionReport | None = None
    advisory: bool = False

    @property
    def relative_error(self) -> float:
        return self.estimate.error_estimate / abs(self.raw_integral)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "method": self.method,
            "region": self.region,
            "raw_integral": self.raw_integral,
            "full_integral": self.raw_integral * self.ordering_multiplier,
            "constant": self.constant,
            "ordering_multiplier": self.ordering_multiplier,
            "estimate": self.estimate.to_dict(),
            "recognition": self.recognition.to_dict() if self.recognition else None,
            "advisory": self.advisory,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConstantResult":
        rec = d.get("recognition")
        return cls(
            spec=KernelSpec(**d["spec"]),
            method=d["method"],
            region=d["region"],
            raw_integral=d["raw_integral"],
            constant=d["constant"],
            ordering_multiplier=d["ordering_multiplier"],
            estimate=QuadratureEstimate.from_dict(d["estimate"]),
            recognition=RecognitionReport.from_dict(rec) if rec else None,
            advisory=d.get("advisory", False),
        )


@dataclass
class EntropyResult:
    n: int
    mean_entropy_nats: float
    error_estimate: float
    fit_numerator: int | None = None
    fit_denominator: int | None = None
    fit_residual: float | None = None
    estimate: QuadratureEstimate | None = None

    @property
    def fit(self) -> Fraction | None:
        if self.fit_denominator is None:
            return None
        return Fraction(self.fit_numerator, self.fit_denominator)

    def fit_expression(self) -> str | None:
        if self.fit is None:
            return None
        return f"{self.n}*log({self.n}) - {self.fit_numerator}/{self.fit_denominator}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimate"] = self.estimate.to_dict() if self.estimate else None
        d["fit_expression"] = self.fit_expression()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EntropyResult":
        d = {k: v for k, v in d.items() if k != "fit_expression"}
        if d.get("estimate"):
            d["estimate"] = QuadratureEstimate.from_dict(d["estimate"])
        return cls(**d)


# ---------------------------------------------------------------------------
# cache


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


class ResultCache:
    """Append-only JSON-lines store keyed by a digest of the inputs.

    Each line holds ``key``, ``kind``, ``inputs``, ``result`` and
    ``timestamp``; the last record for a key wins.  Writes go through a
    file lock so concurrent processes never interleave lines.
    """

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self.lock = FileLock(str(self.path) + ".lock")

    @staticmethod
    def key(kind: str, inputs: dict) -> str:
        return _digest({"kind": kind, "inputs": inputs, "version": __version__})

    def get(self, key: str) -> dict | None:
        if not self.path.exists():
            return None
        found = None
        with self.lock, self.path.open() as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec.get("key") == key:
                    found = rec["result"]
        return found

    def put(self, key: str, kind: str, inputs: dict, result: dict) -> None:
        rec = {"key": key, "kind": kind, "inputs": inputs, "result": result,
               "version": __version__, "timestamp": time.time()}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.lock, self.path.open("a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _cached(cache, kind, inputs, compute, load):
    if cache is None:
        return compute()
    k = cache.key(kind, inputs)
    hit = cache.get(k)
    if hit is not None:
        return load(hit)
    res = compute()
    cache.put(k, kind, inputs, res.to_dict())
    return res


# ---------------------------------------------------------------------------
# integrands


def _entropy(d):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(d > 0, d * np.log(np.where(d > 0, d, 1.0)), 0.0)
    return -t.sum(axis=1)


def _weights(spec, d, t, extras):
    k = pair_product(d, spec) * jacobian_over_sqrt_det(t, spec.n)
    if not extras:
        return k
    cols = [k]
    for e in extras:
        if e == "entropy":
            cols.append(k * _entropy(d))
        else:  # eigenvalue index
            cols.append(k * d[:, e])
    return np.stack(cols, axis=1)


def cube_integrand(spec: KernelSpec, region: Region = "ordered", extras=()):
    """Integrand on the unit cube for the adaptive engine."""
    n = spec.n

    def f(u):
        if region == "ordered":
            t, scale = region_to_unit_cube(u, n)
        else:
            t, scale = full_box_to_unit_cube(u)
        d = angles_to_eigenvalues(t, n)
        w = _weights(spec, d, t, extras)
        return w * (scale if np.ndim(w) == 1 else np.asarray(scale)[..., None])

    return f


def angle_integrand(spec: KernelSpec, region: Region = "full", extras=()):
    """Integrand on ``[0, pi]^(n-1)`` for the QMC engine."""
    n = spec.n
    k = n - 1

    def f(t):
        if region == "ordered":
            t, scale = region_to_unit_cube(t / np.pi, n)
            scale = scale / np.pi ** k
        else:
            scale = 1.0
        d = angles_to_eigenvalues(t, n)
        w = _weights(spec, d, t, extras)
        return w * (scale if np.ndim(w) == 1 else np.asarray(scale)[..., None])

    return f


def _pilot_scale(spec, region, extras, axis_order):
    """Rough magnitude of the integral, used to set an absolute floor."""
    cfg = AdaptiveConfig(rel_tol=1e-2, abs_tol=1e-300, max_evaluations=2_000_000)
    est = integrate_adaptive(cube_integrand(spec, region, extras), spec.n - 1, cfg, axis_order)
    return abs(est.value)


def _integrate(spec: KernelSpec, method: Method, region: Region, cfg, extras=(), axis_order=None):
    if spec.n < 2:
        raise ValueError("n must be at least 2")
    if method == "adaptive":
        cfg = cfg or default_adaptive(spec.n)
        scale = _pilot_scale(spec, region, extras, axis_order)
        # absolute floor well below the relative goal so it never dominates
        cfg = replace(cfg, abs_tol=min(cfg.abs_tol, max(scale, 1e-300) * cfg.rel_tol * 1e-2))
        return integrate_adaptive(cube_integrand(spec, region, extras), spec.n - 1, cfg, axis_order)
    if method == "qmc":
        cfg = cfg or default_qmc(spec.n)
        return integrate_qmc(angle_integrand(spec, region, extras), spec.n - 1, cfg)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# constants


def _check_divergence(spec: KernelSpec):
    if spec.n == 2 and spec.beta % 2:
        raise DivergenceError(f"odd exponent beta={spec.beta} diverges at n=2")


def hall_constant(spec: KernelSpec, method: Method = "adaptive", cfg=None, *,
                  region: Region | None = None, axis_order=None, recognize: bool = False,
                  cache: ResultCache | None = None, max_residual: float | None = None) -> ConstantResult:
    """Normalization constant of the eigenvalue density ``spec``.

    The adaptive engine integrates over the ordered region and multiplies by
    n!; QMC integrates the full angle box by default.  The constant is the
    reciprocal of the full-simplex integral.  Non-convergence is reported in
    ``estimate.converged``, not raised.
    """
    _check_divergence(spec)
    region = region or ("ordered" if method == "adaptive" else "full")
    mult = math.factorial(spec.n) if region == "ordered" else 1
    inputs = {"spec": spec.to_dict(), "method": method, "region": region,
              "cfg": cfg.to_dict() if cfg else None,
              "axis_order": list(axis_order) if axis_order is not None else None,
              "recognize": recognize, "max_residual": max_residual}

    def compute():
        est = _integrate(spec, method, region, cfg, axis_order=axis_order)
        full = est.value * mult
        if full == 0:
            raise DivergenceError("normalizing integral vanishes")
        res = ConstantResult(spec=spec, method=method, region=region, raw_integral=est.value,
                             constant=1.0 / full, ordering_multiplier=mult, estimate=est,
                             advisory=spec.n >= ADVISORY_FROM_N)
        if recognize:
            res.recognition = recognize_constant(res, max_residual)
        return res

    return _cached(cache, "hall", inputs, compute, ConstantResult.from_dict)


def recognize_constant(res: ConstantResult, max_residual: float | None = None) -> RecognitionReport | None:
    if max_residual is None:
        rel = res.estimate.error_estimate / abs(res.raw_integral)
        max_residual = max(1e-6, 5.0 * rel)
    seq = partial_sum_denominators(20)
    return recognize_pi_rational(res.constant, (0, 6), max_residual, sequence=seq)


def quasi_constant(n: int, method: Method = "adaptive", cfg=None, **kw) -> ConstantResult:
    """Identric-mean (quasi-Bures) eigenvalue constant; pair term 2 I(d_i, d_j)."""
    return hall_constant(KernelSpec(n, "identric", 2), method, cfg, **kw)


def variant_constant(n: int, beta: int, method: Method = "adaptive", cfg=None, **kw) -> ConstantResult:
    """Constant with the pair numerator ``|d_i - d_j|**beta``.

    Odd beta at n=2 raises :class:`DivergenceError`.
    """
    return hall_constant(KernelSpec(n, "arithmetic", beta), method, cfg, **kw)


def wallis_variant_n2(beta: int) -> float:
    """Closed form of the n=2 variant: 1 / integral of cos^beta over [0, pi]."""
    if beta % 2:
        raise DivergenceError("odd exponents diverge at n=2")
    # integral = pi * (beta-1)!! / beta!!
    num = math.prod(range(beta - 1, 0, -2))
    den = math.prod(range(beta, 0, -2))
    return den / (math.pi * num)


# ---------------------------------------------------------------------------
# entropy and expected eigenvalues


def fit_entropy(n: int, mean: float, max_denominator: int = ENTROPY_FIT_MAX_DENOMINATOR):
    """Closest p/q (q <= cap) to ``n log n - mean``; returns (p, q, residual)."""
    target = n * math.log(n) - mean
    fr = Fraction(target).limit_denominator(max_denominator)
    return fr.numerator, fr.denominator, abs(target - fr.numerator / fr.denominator)


def average_entropy(n: int, cfg=None, *, method: Method = "adaptive", beta: int = 2,
                    mean: str = "arithmetic", fit: bool = True,
                    cache: ResultCache | None = None) -> EntropyResult:
    """Mean von Neumann entropy (nats) under the normalized eigenvalue density."""
    spec = KernelSpec(n, mean, beta)
    _check_divergence(spec)
    inputs = {"spec": spec.to_dict(), "method": method, "cfg": cfg.to_dict() if cfg else None,
              "fit": fit}

    def compute():
        region = "ordered" if method == "adaptive" else "full"
        est = _integrate(spec, method, region, cfg, extras=("entropy",))
        if est.components is None:
            comps = [est.value, est.value]
            errs = [est.error_estimate] * 2
        else:
            comps, errs = est.components, est.component_errors
        z, s = comps
        value = s / z
        err = abs(value) * (errs[0] / abs(z) + errs[1] / abs(s)) if s else errs[1] / abs(z)
        res = EntropyResult(n=n, mean_entropy_nats=value, error_estimate=err, estimate=est)
        if fit:
            res.fit_numerator, res.fit_denominator, res.fit_residual = fit_entropy(n, value)
        return res

    return _cached(cache, "entropy", inputs, compute, EntropyResult.from_dict)


@dataclass
class SpectrumResult:
    n: int
    expected: list[float]
    errors: list[float]
    estimate: QuadratureEstimate

    def to_dict(self) -> dict:
        return {"n": self.n, "expected": self.expected, "errors": self.errors,
                "estimate": self.estimate.to_dict()}


def expected_eigenvalues(n: int, cfg=None, *, beta: int = 2, mean: str = "arithmetic") -> SpectrumResult:
    """Expected ordered spectrum d_1 >= ... >= d_n under the density."""
    spec = KernelSpec(n, mean, beta)
    _check_divergence(spec)
    est = _integrate(spec, "adaptive", "ordered", cfg, extras=tuple(range(n)))
    z, *rest = est.components
    zerr, *rerr = est.component_errors
    vals = [r / z for r in rest]
    errs = [abs(v) * (zerr / abs(z)) + e / abs(z) for v, e in zip(vals, rerr)]
    return SpectrumResult(n=n, expected=vals, errors=errs, estimate=est)


# ---------------------------------------------------------------------------
# density grids and the qubit redundancy constants

DENSITY_CASES = {
    "bures2": ("theta",),
    "quasi2": ("theta",),
    "bures3": ("theta", "phi", "theta-phi"),
    "quasi3": ("theta", "phi", "theta-phi"),
}


def _midpoints(lo, hi, k):
    return lo + (np.arange(k) + 0.5) * (hi - lo) / k


def _gauss(lo, hi, k=400):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def _quasi3_theta(theta):
    p, w = _gauss(0.0, math.pi)
    return np.array([np.dot(w, quasi_theta_phi_n3(np.full_like(p, t), p)) for t in np.atleast_1d(theta)])


def _quasi3_phi(phi):
    t, w = _gauss(0.0, math.pi)
    return np.array([np.dot(w, quasi_theta_phi_n3(t, np.full_like(t, p))) for p in np.atleast_1d(phi)])


def density_grid(case: str, marginal: str = "theta", grid: int = 256) -> dict:
    """Sample a closed-form density on a midpoint grid.

    Returns ``{"columns": [...], "rows": [[...], ...]}``.  Quasi n=3
    one-dimensional marginals are integrated numerically.
    """
    if case not in DENSITY_CASES:
        raise ValueError(f"unknown case {case!r}")
    if marginal not in DENSITY_CASES[case]:
        raise ValueError(f"{case} supports marginals {DENSITY_CASES[case]}")
    if grid < 1:
        raise ValueError("grid must be positive")
    if case in ("bures2", "quasi2"):
        th = _midpoints(0.0, 0.5 * math.pi, grid)
        fn = bures_theta_marginal_n2 if case == "bures2" else quasi_theta_marginal_n2
        return {"columns": ["theta", "density"], "rows": np.column_stack([th, fn(th)]).tolist()}
    x = _midpoints(0.0, math.pi, grid)
    if marginal == "theta-phi":
        tt, pp = np.meshgrid(x, x, indexing="ij")
        fn = bures_theta_phi_n3 if case == "bures3" else quasi_theta_phi_n3
        vals = fn(tt.ravel(), pp.ravel())
        return {"columns": ["theta", "phi", "density"],
                "rows": np.column_stack([tt.ravel(), pp.ravel(), vals]).tolist()}
    if case == "bures3":
        fn = bures_marginal_theta_n3 if marginal == "theta" else bures_marginal_phi_n3
    else:
        fn = _quasi3_theta if marginal == "theta" else _quasi3_phi
    vals = np.asarray(fn(x), dtype=float)
    return {"columns": [marginal, "density"], "rows": np.column_stack([x, vals]).tolist()}


def quasi_redundancy_constant(theta: float = 0.7) -> float:
    """Redundancy of the quasi-Bures prior minus (3/2) log m; theta-independent."""
    w = bloch_ball_density(quasi_theta_marginal_n2(theta), theta)
    return redundancy_n2(theta, 1.0, w)


def _bures_redundancy(theta):
    w = bloch_ball_density(bures_theta_marginal_n2(theta), theta)
    return redundancy_n2(theta, 1.0, w)


def bures_redundancy_average() -> float:
    """Bures-prior average of the Bures redundancy, minus (3/2) log m."""
    est = integrate_iterated_1d(lambda t: bures_theta_marginal_n2(t) * _bures_redundancy(t),
                                (1e-300, 0.5 * math.pi - 1e-15), AdaptiveConfig(rel_tol=1e-12))
    return est.value


def bures_redundancy_supremum() -> float:
    """Largest value over theta of the Bures redundancy, minus (3/2) log m."""
    from scipy.optimize import minimize_scalar
    r = minimize_scalar(lambda t: -_bures_redundancy(t), bounds=(1e-6, 0.5 * math.pi - 1e-6),
                        method="bounded", options={"xatol": 1e-12})
    return -float(r.fun)


def theta_marginal_crossover_n2() -> float:
    """Interior theta where the quasi and Bures n=2 marginals cross."""
    from scipy.optimize import brentq
    return brentq(lambda t: quasi_theta_marginal_n2(t) - bures_theta_marginal_n2(t), 0.2, 0.7, xtol=1e-14)
