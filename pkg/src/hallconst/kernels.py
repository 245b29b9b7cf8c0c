"""Eigenvalue kernels and the closed-form n=2, n=3 densities.

Everything here is a pure function.  Array arguments broadcast; scalar
arguments return floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import mpmath
import numpy as np

Mean = Literal["arithmetic", "identric"]

# Leading constants of the quasi-Bures densities, stored exactly as printed.
QUASI2_CONSTANT = 0.226231
QUASI3_CONSTANT = 0.000063495

DIAGONAL_BAND = 1e-8
SINGULAR_GUARD = 1e-10


class SingularPointError(ValueError):
    """Kernel evaluated on the simplex boundary (some eigenvalue is zero)."""


class DivergenceError(ArithmeticError):
    """A requested quantity diverges (or a normalizing integral vanishes)."""


@dataclass(frozen=True)
class KernelSpec:
    n: int
    mean: Mean = "arithmetic"
    beta: int = 2

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if int(self.beta) != self.beta or self.beta < 1:
            raise ValueError("beta must be a positive integer")
        if self.mean not in ("arithmetic", "identric"):
            raise ValueError(f"unknown mean {self.mean!r}")

    @property
    def is_bures(self) -> bool:
        return self.mean == "arithmetic" and self.beta == 2

    def to_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "beta": int(self.beta)}


@dataclass(frozen=True)
class HaarAngles:
    """Conditional Euler angles of the unitary factor.

    n=2: ``(alpha, beta)``; n=3: ``(alpha, beta, gamma, kappa, a, b)``.
    """

    n: int
    angles: tuple[float, ...]

    def __post_init__(self):
        _check_haar(self.n, self.angles)


_HAAR_RANGES = {
    2: [(0.0, 2 * math.pi), (0.0, math.pi)],
    3: [(0.0, math.pi), (0.0, math.pi / 2), (0.0, math.pi),
        (0.0, math.pi / 2), (0.0, math.pi), (0.0, math.pi / 2)],
}


def haar_box(n: int) -> list[tuple[float, float]]:
    """Integration box of the conditional Haar angles."""
    return list(_HAAR_RANGES[n])


def _check_haar(n, angles):
    if n not in _HAAR_RANGES:
        raise ValueError("Haar angles are available for n=2 and n=3 only")
    rng = _HAAR_RANGES[n]
    if len(angles) != len(rng):
        raise ValueError(f"n={n} needs {len(rng)} Haar angles")
    for x, (lo, hi) in zip(angles, rng):
        x = np.asarray(x)
        if np.any(x < lo) or np.any(x > hi):
            raise ValueError(f"Haar angle outside [{lo}, {hi}]")


def _check_range(name, x, lo, hi):
    x = np.asarray(x)
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError(f"{name} outside [{lo}, {hi}]")


# ---------------------------------------------------------------------------
# means


def identric_mean(x, y):
    """I(x, y) = exp(-1) * (x**x / y**y) ** (1 / (x - y)), I(x, x) = x.

    Uses ``log I = log y + x/(x-y) * log1p((x-y)/y) - 1`` with ``y`` the
    larger argument, and a midpoint expansion when the arguments agree to
    ``DIAGONAL_BAND`` relative.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("identric mean needs positive arguments")
    out = _identric(x, y)
    return float(out) if out.ndim == 0 else out


def _identric(x, y):
    """Identric mean for nonnegative arrays; I(x, 0) = x/e, I(0, 0) = 0."""
    lo = np.minimum(x, y)
    hi = np.maximum(x, y)
    diff = hi - lo
    mid = 0.5 * (hi + lo)
    near = diff <= DIAGONAL_BAND * hi
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = -diff / hi
        # lo/(lo-hi) * log1p((lo-hi)/hi); the lo=0 limit is 0
        term = np.where(lo > 0, lo * np.log1p(delta) / np.where(near, 1.0, -diff), 0.0)
        log_i = np.log(hi) + term - 1.0
        h2 = (diff / mid) ** 2
        # log I = log m - h^2/24 - h^4/320 for h = diff/m
        series = np.log(mid) - h2 / 24.0 - h2 * h2 / 320.0
        out = np.where(near, np.exp(series), np.exp(log_i))
    return np.where(hi > 0, out, 0.0)


def pair_mean(x, y, mean: Mean):
    """Pair term of the kernel denominator: ``x+y`` or ``2 I(x, y)``."""
    if mean == "arithmetic":
        return x + y
    return 2.0 * _identric(x, y)


# ---------------------------------------------------------------------------
# Hall kernel


def pair_product(d, spec: KernelSpec):
    """prod_{i<j} |d_i - d_j|**beta / M(d_i, d_j) for a batch ``(m, n)``.

    Boundary points are allowed; a pair with both entries zero contributes 0.
    """
    d = np.atleast_2d(np.asarray(d, dtype=float))
    n = d.shape[1]
    out = np.ones(d.shape[0])
    beta = int(spec.beta)
    for i in range(n):
        for j in range(i + 1, n):
            num = np.abs(d[:, i] - d[:, j]) ** beta
            den = pair_mean(d[:, i], d[:, j], spec.mean)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = out * np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out


def hall_kernel(d, spec: KernelSpec):
    """Unnormalized marginal eigenvalue density.

    ``(d_1 ... d_n)**(-1/2) * prod_{i<j} |d_i - d_j|**beta / M(d_i, d_j)``
    with ``M`` the arithmetic sum ``d_i + d_j`` or twice the identric mean.
    Raises :class:`SingularPointError` when an eigenvalue is zero; integrate
    through :mod:`hallconst.eigenparam` instead, where the singular factor
    cancels against the Jacobian.
    """
    arr = np.asarray(d.values if hasattr(d, "values") else d, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != spec.n:
        raise ValueError(f"expected {spec.n} eigenvalues, got {arr.shape[1]}")
    if np.any(arr <= 0):
        raise SingularPointError("kernel is singular where an eigenvalue vanishes")
    out = pair_product(arr, spec) / np.sqrt(np.prod(arr, axis=1))
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# Haar weights


def haar_weight(n: int, haar):
    """Conditional Haar weight (dropped angles integrated out)."""
    angles = haar.angles if isinstance(haar, HaarAngles) else tuple(haar)
    _check_haar(n, angles)
    if n == 2:
        _, b = angles
        return np.sin(b) / 8.0
    _, b1, _, kappa, _, b2 = angles
    return np.sin(2 * b1) * np.sin(2 * b2) * np.sin(2 * kappa) * np.sin(kappa) ** 2


# ---------------------------------------------------------------------------
# n = 2


def bures_density_n2(theta, alpha, beta):
    """Normalized Bures density over theta in [0, pi/2], alpha, beta."""
    _check_range("theta", theta, 0.0, math.pi / 2)
    _check_range("alpha", alpha, 0.0, 2 * math.pi)
    _check_range("beta", beta, 0.0, math.pi)
    return np.cos(theta) ** 2 * np.sin(beta) / math.pi ** 2


def bures_theta_marginal_n2(theta):
    """theta-marginal of :func:`bures_density_n2`: (4/pi) cos^2 theta."""
    return 4.0 / math.pi * np.cos(theta) ** 2


def _quasi2_theta_part(theta):
    # tan(t/2)**sec(t) * cos(t) * cot(t), with its limits at 0 and pi/2
    t = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pow = np.log(np.tan(0.5 * t)) / np.cos(t)
        val = np.exp(log_pow) * np.cos(t) ** 2 / np.sin(t)
    val = np.where(t <= 0.0, 0.5, val)
    val = np.where(t >= 0.5 * math.pi, 0.0, val)
    return val


def quasi_density_n2(theta, alpha, beta):
    """Quasi-Bures density (identric-mean counterpart of the n=2 Bures one)."""
    _check_range("theta", theta, 0.0, math.pi / 2)
    _check_range("alpha", alpha, 0.0, 2 * math.pi)
    _check_range("beta", beta, 0.0, math.pi)
    out = QUASI2_CONSTANT * _quasi2_theta_part(theta) * np.sin(beta)
    return float(out) if np.ndim(out) == 0 else out


def quasi_theta_marginal_n2(theta):
    out = 4.0 * math.pi * QUASI2_CONSTANT * _quasi2_theta_part(theta)
    return float(out) if np.ndim(out) == 0 else out


def bloch_ball_density(theta_marginal, theta):
    """Convert a theta-marginal on [0, pi/2] to a density on the Bloch ball.

    The Bloch radius is ``r = cos(theta)`` and the ball volume element is
    ``cos^2(theta) sin(theta) dtheta dOmega``.
    """
    return theta_marginal / (4.0 * math.pi * np.cos(theta) ** 2 * np.sin(theta))


def redundancy_n2(theta, m, density_at_theta):
    """Asymptotic redundancy of universal coding of qubits, o(1) dropped.

    ``density_at_theta`` is the prior's density on the Bloch ball (see
    :func:`bloch_ball_density`) at the state with ``r = cos(theta)``.
    """
    t = np.asarray(theta, dtype=float)
    if np.any(t <= 0) or np.any(t >= 0.5 * math.pi):
        raise DivergenceError("redundancy diverges at theta = 0 and theta = pi/2")
    if m <= 0:
        raise ValueError("m must be positive")
    w = np.asarray(density_at_theta, dtype=float)
    if np.any(w <= 0):
        raise ValueError("density must be positive")
    out = (1.5 * math.log(m / (2 * math.pi)) - 0.5 - 2.0 * np.log(np.sin(t))
           + np.log(np.tan(0.5 * t)) / np.cos(t) - np.log(w))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# n = 3 (theta, phi layout: d1 = cos^2(phi/2) sin^2(theta/2),
#         d2 = sin^2(phi/2) sin^2(theta/2), d3 = cos^2(theta/2))


def _u(theta, phi):
    s = np.sin(0.5 * theta)
    inner = ((35 + 60 * np.cos(theta) + 33 * np.cos(2 * theta)) * np.cos(phi)
             - 8 * np.cos(3 * phi) * s ** 4)
    return s ** 3 * inner ** 2


def _bures3_denominator(theta, phi):
    # 35 + 28 cos t + cos 2t - 8 cos 2p sin^4(t/2), rewritten as a sum of
    # nonnegative terms: 32 (1 + cos t) + 4 sin^2 p (1 - cos t)^2
    c = np.cos(theta)
    return 32.0 * (1.0 + c) + 4.0 * np.sin(phi) ** 2 * (1.0 - c) ** 2


def bures_theta_phi_n3(theta, phi):
    """(theta, phi) part of the n=3 Bures density, Haar weight integrated out.

    Integrates to 1 over ``[0, pi]^2``.
    """
    den = _bures3_denominator(theta, phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, 35.0 * _u(theta, phi) / (256.0 * math.pi * np.where(den > 0, den, 1.0)), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def bures_density_n3(theta, phi, haar):
    """Normalized Bures density over the eight-dimensional n=3 state space."""
    _check_range("theta", theta, 0.0, math.pi)
    _check_range("phi", phi, 0.0, math.pi)
    w = haar_weight(3, haar)
    den = _bures3_denominator(theta, phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, 35.0 * _u(theta, phi) / (128.0 * math.pi ** 4 * np.where(den > 0, den, 1.0)), 0.0)
    out = out * w
    return float(out) if np.ndim(out) == 0 else out


def bures_marginal_theta_n3(theta):
    t = np.asarray(theta, dtype=float)
    poly = (-1533 + 2816 * np.cos(t / 2) - 1988 * np.cos(t) + 1152 * np.cos(1.5 * t)
            - 447 * np.cos(2 * t) + 128 * np.cos(2.5 * t))
    out = 35.0 / 256.0 * poly * np.sin(t / 2) ** 3
    return float(out) if out.ndim == 0 else out


PHI_LIMIT = 20.0 / (9.0 * math.pi)


def _phi_marginal_mp(phi):
    p = mpmath.mpf(phi)
    pi = mpmath.pi
    cos, sin = mpmath.cos, mpmath.sin
    bracket = (
        110100480 * mpmath.atan(mpmath.cot(p / 2)) * cos(p / 2) ** 12
        - 26880 * (792 * (2 * pi - p) * cos(p)
                   + 8 * pi * (55 * cos(3 * p) + 3 * cos(5 * p))
                   + p * (495 * cos(2 * p) - 220 * cos(3 * p) + 66 * cos(4 * p)
                          - 12 * cos(5 * p) + cos(6 * p)))
        + 16885656 * sin(2 * p) + 5069937 * sin(4 * p) + 167012 * sin(6 * p)
        - 3 * (4139520 * p + 124 * sin(8 * p) - 4 * sin(10 * p) + sin(12 * p))
    )
    return mpmath.cot(p) * mpmath.csc(p) ** 8 * bracket / (768 * pi)


def bures_marginal_phi_n3(phi):
    """phi-marginal of the n=3 Bures density.

    The closed form cancels catastrophically near 0 and pi, so it is
    evaluated in multiprecision arithmetic with working precision raised as
    the argument approaches an endpoint.  Within 1e-4 of 0 or pi the
    one-sided limit 20/(9 pi) is returned.
    """
    arr = np.asarray(phi, dtype=float)
    if np.any(arr < 0) or np.any(arr > math.pi):
        raise ValueError("phi outside [0, pi]")
    flat = arr.ravel()
    out = np.empty_like(flat)
    for i, p in enumerate(flat):
        gap = min(p, math.pi - p)
        if gap < 1e-4:
            out[i] = PHI_LIMIT
            continue
        digits = 30 + int(12 * max(0.0, -math.log10(gap)))
        with mpmath.workdps(digits):
            out[i] = float(_phi_marginal_mp(p))
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def _log_pow_ratio(a, b):
    """``a * log(a/b) / (a - b)`` with its limit 1 at ``a == b``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (a - b) / b
        val = a * np.log1p(r) / (a - b)
        return np.where(np.abs(a - b) <= SINGULAR_GUARD * np.maximum(a, b), a / b, val)


def quasi_theta_phi_n3(theta, phi):
    """(theta, phi) part of the n=3 quasi-Bures density, Haar weight included
    as its integral pi^3/2."""
    return 0.5 * math.pi ** 3 * _quasi3_core(theta, phi)


def _quasi3_core(theta, phi):
    t = np.asarray(theta, dtype=float)
    p = np.asarray(phi, dtype=float)
    v = 2 + 6 * np.cos(t)
    w = np.cos(t - p) - 2 * np.cos(p) + np.cos(t + p)
    st, ct = np.sin(t / 2), np.cos(t / 2)
    sp, cp = np.sin(p / 2), np.cos(p / 2)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_lead = (1 + 1 / np.cos(p)) * np.log(np.tan(p / 2)) - 4 * np.log(st) - 6 * np.log(sp)
        # The two exponentials have removable singularities at v + w = 0
        # (d1 = d3) and w - v = 0 (d2 = d3); with d1 = cp^2 st^2,
        # d2 = sp^2 st^2, d3 = ct^2 they reduce to log-ratio forms.
        d1 = (cp * st) ** 2
        d2 = (sp * st) ** 2
        d3 = ct ** 2
        gen_a = 16 * cp ** 2 * st ** 2 / (v + w) * np.log(cp * st / ct)
        gen_b = (2 - 8 * (1 + np.cos(t)) / (w - v)) * np.log(sp * st / ct)
        near_a = np.abs(v + w) <= SINGULAR_GUARD
        near_b = np.abs(w - v) <= SINGULAR_GUARD
        log_a = np.where(near_a, -_log_pow_ratio(d1, d3), gen_a)
        log_b = np.where(near_b, np.log(d2 / d3) - _log_pow_ratio(d3, d2), gen_b)
        val = QUASI3_CONSTANT * _u(t, p) * np.exp(log_lead + log_a + log_b)
    val = np.where(np.isfinite(val), val, 0.0)
    return val


def quasi_density_n3(theta, phi, haar):
    """Normalized quasi-Bures density over the n=3 state space."""
    _check_range("theta", theta, 0.0, math.pi)
    _check_range("phi", phi, 0.0, math.pi)
    out = _quasi3_core(theta, phi) * haar_weight(3, haar)
    return float(out) if np.ndim(out) == 0 else out
