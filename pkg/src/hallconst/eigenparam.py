"""Hyperspherical angles <-> eigenvalue simplex.

The spectrum of an n x n density matrix is written as the squared
components of a point on the unit (n-1)-sphere::

    d_1 = cos^2(t_1/2)
    d_k = cos^2(t_k/2) * prod_{j<k} sin^2(t_j/2)
    d_n = prod_{j<n} sin^2(t_j/2)

with every angle t_k in [0, pi].  The same nesting is used for every n.
All functions accept either one angle vector of shape ``(n-1,)`` or a batch
of shape ``(m, n-1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUM_TOL = 1e-12
ORDER_SLACK = 1e-14


class DimensionError(ValueError):
    """Angle vector does not have n-1 components."""


@dataclass(frozen=True)
class AngleVector:
    angles: tuple[float, ...]

    def __post_init__(self):
        for a in self.angles:
            if not (0.0 <= a <= math.pi):
                raise ValueError(f"angle {a!r} outside [0, pi]")

    @property
    def n(self) -> int:
        return len(self.angles) + 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.angles, dtype=float)


@dataclass(frozen=True)
class EigenvalueVector:
    values: tuple[float, ...]

    def __post_init__(self):
        if any(v < 0.0 or v > 1.0 for v in self.values):
            raise ValueError("eigenvalues must lie in [0, 1]")
        if abs(math.fsum(self.values) - 1.0) > SUM_TOL:
            raise ValueError("eigenvalues must sum to 1")

    @property
    def n(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class OrderedRegionSpec:
    """Nonincreasing-eigenvalue region: last angle in [0, pi/2], then each
    earlier angle in [0, f(next angle)]."""

    n: int
    bound_function: str = "2*arccot(cos(x/2))"

    def upper(self, outer_angle):
        return cumulative_bound(outer_angle)


def _as_batch(a, n):
    arr = np.asarray(a.angles if isinstance(a, AngleVector) else a, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != n - 1:
        raise DimensionError(f"expected {n - 1} angles for n={n}, got {arr.shape[1]}")
    return arr, single


def angles_to_eigenvalues(a, n: int) -> np.ndarray:
    """Map angles to eigenvalues; shape ``(n,)`` or ``(m, n)``."""
    t, single = _as_batch(a, n)
    c2 = np.cos(0.5 * t) ** 2
    s2 = np.sin(0.5 * t) ** 2
    m = t.shape[0]
    d = np.empty((m, n))
    rest = np.ones(m)
    for k in range(n - 1):
        d[:, k] = c2[:, k] * rest
        rest = rest * s2[:, k]
    d[:, n - 1] = rest
    return d[0] if single else d


def angle_jacobian(a, n: int) -> np.ndarray | float:
    """|d(d_1..d_{n-1}) / d(t_1..t_{n-1})|.

    The map is triangular, so this is the product of the diagonal terms
    ``sin(t_k)/2 * prod_{j<k} sin^2(t_j/2)``.
    """
    t, single = _as_batch(a, n)
    s2 = np.sin(0.5 * t) ** 2
    jac = np.ones(t.shape[0])
    rest = np.ones(t.shape[0])
    for k in range(n - 1):
        jac = jac * 0.5 * np.sin(t[:, k]) * rest
        rest = rest * s2[:, k]
    jac = np.abs(jac)
    return float(jac[0]) if single else jac


def jacobian_over_sqrt_det(a, n: int) -> np.ndarray | float:
    """``angle_jacobian / sqrt(d_1 ... d_n)`` in closed form.

    The inverse square root of the determinant cancels against the Jacobian,
    leaving ``prod_j sin(t_j/2)^(n-1-j)`` (j counted from 1), which is
    bounded on the whole angle box.
    """
    t, single = _as_batch(a, n)
    h = np.abs(np.sin(0.5 * t))
    out = np.ones(t.shape[0])
    for j in range(n - 2):
        out = out * h[:, j] ** (n - 2 - j)
    return float(out[0]) if single else out


def cumulative_bound(x):
    """f(x) = 2 arccot(cos(x/2)); f(0) = pi/2, f(pi) = pi."""
    c = np.cos(0.5 * np.asarray(x, dtype=float))
    # arccot(c) = pi/2 - arctan(c), continuous through c = 0
    out = 2.0 * (0.5 * np.pi - np.arctan(c))
    return float(out) if np.ndim(out) == 0 else out


def ordered_region_bounds(level: int, outer_angle: float | None = None, n: int | None = None):
    """Integration interval of one angle inside the ordered region.

    ``level`` indexes the angle (0 = t_1).  The innermost level (``n-2``, or
    ``outer_angle=None``) is ``[0, pi/2]``; any other level is
    ``[0, f(outer_angle)]`` where ``outer_angle`` is the realized value of
    the next angle.
    """
    if outer_angle is None or (n is not None and level == n - 2):
        return (0.0, 0.5 * math.pi)
    if not (0.0 <= outer_angle <= math.pi):
        raise ValueError("outer_angle must lie in [0, pi]")
    return (0.0, cumulative_bound(outer_angle))


def region_to_unit_cube(u, n: int | None = None):
    """Affine map from the unit cube onto the ordered region.

    ``u[k]`` drives angle ``t_{k+1}``.  The last angle is ``u[-1] * pi/2`` and
    each earlier angle is ``u[k] * f(t_{k+2})``.  Returns ``(angles, scale)``
    where ``scale`` is the product of the interval lengths (the Jacobian of
    the cube map).  Works on one point or a batch.
    """
    arr = np.asarray(u, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    k = arr.shape[1]
    if n is not None and k != n - 1:
        raise DimensionError(f"expected {n - 1} cube coordinates, got {k}")
    t = np.empty_like(arr)
    width = np.full(arr.shape[0], 0.5 * np.pi)
    scale = width.copy()
    t[:, k - 1] = arr[:, k - 1] * width
    for j in range(k - 2, -1, -1):
        width = cumulative_bound(t[:, j + 1])
        t[:, j] = arr[:, j] * width
        scale = scale * width
    if single:
        return t[0], float(scale[0])
    return t, scale


def full_box_to_unit_cube(u):
    """Map the unit cube onto ``[0, pi]^(n-1)``; returns ``(angles, scale)``."""
    arr = np.asarray(u, dtype=float)
    k = arr.shape[-1]
    return np.pi * arr, np.pi ** k
