"""Quasi-Monte Carlo integration with Halton points over ``[0, pi]^k``."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .quad import IntegrandError, QuadratureEstimate

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)

# plain Halton is known to correlate beyond this many coordinates
SCRAMBLE_FROM_DIM = 7


@dataclass(frozen=True)
class QmcConfig:
    max_points: int = 10_000_000
    batch: int = 250_000
    window: int = 8
    rel_tol: float = 1e-4
    min_points: int = 0
    shift_seed: int | None = None
    scramble: bool | None = None  # None: scramble only for dim >= 7
    workers: int = 1

    def __post_init__(self):
        if not (self.max_points >= self.batch >= 1):
            raise ValueError("need max_points >= batch >= 1")
        if self.window < 2:
            raise ValueError("window must be at least 2")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def radical_inverse(index: int, base: int, perm=None) -> float:
    """Van der Corput radical inverse of ``index``; ``perm`` permutes digits."""
    if index < 0:
        raise ValueError("index must be nonnegative")
    out, f = 0.0, 1.0 / base
    while index:
        index, digit = divmod(index, base)
        out += f * (perm[digit] if perm is not None else digit)
        f /= base
    return out


def halton_point(index: int, dim: int) -> np.ndarray:
    """Coordinate j is the radical inverse of ``index`` in the j-th prime base."""
    if dim > len(PRIMES):
        raise ValueError(f"at most {len(PRIMES)} dimensions supported")
    return np.array([radical_inverse(index, p) for p in PRIMES[:dim]])


def _digit_perms(dim, seed):
    rng = np.random.default_rng(seed)
    perms = []
    for p in PRIMES[:dim]:
        # keep 0 fixed so the origin-anchored structure is preserved
        perms.append(np.concatenate([[0], 1 + rng.permutation(p - 1)]))
    return perms


def halton_points(start: int, count: int, dim: int, scramble_seed: int | None = None) -> np.ndarray:
    """Points ``start .. start+count-1`` as a ``(count, dim)`` array."""
    if dim > len(PRIMES):
        raise ValueError(f"at most {len(PRIMES)} dimensions supported")
    perms = _digit_perms(dim, scramble_seed) if scramble_seed is not None else None
    idx0 = np.arange(start, start + count, dtype=np.int64)
    out = np.zeros((count, dim))
    for j, p in enumerate(PRIMES[:dim]):
        idx = idx0.copy()
        f = 1.0 / p
        col = np.zeros(count)
        while idx.any():
            idx, digit = np.divmod(idx, p)
            col += f * (perms[j][digit] if perms is not None else digit)
            f /= p
        out[:, j] = col
    return out


def _pairwise_sum(x):
    """Deterministic pairwise reduction, independent of how ``x`` was produced."""
    x = np.asarray(x, dtype=float)
    while x.size > 1:
        if x.size % 2:
            x = np.append(x, 0.0)
        x = x[0::2] + x[1::2]
    return float(x[0]) if x.size else 0.0


def integrate_qmc(f: Callable[[np.ndarray], np.ndarray], dim: int,
                  cfg: QmcConfig | None = None) -> QuadratureEstimate:
    """Estimate the integral of ``f`` over ``[0, pi]^dim``.

    ``f`` receives an ``(N, dim)`` array of angles.  Points start at Halton
    index 1 (index 0 is the corner).  After every batch the running mean is
    recorded; the error proxy is the spread of the last ``window`` running
    estimates and the run stops once that spread falls below
    ``rel_tol * |value|`` (and ``min_points`` have been used).
    """
    cfg = cfg or QmcConfig()
    vol = math.pi ** dim
    scramble = cfg.scramble if cfg.scramble is not None else dim >= SCRAMBLE_FROM_DIM
    seed = (cfg.shift_seed if cfg.shift_seed is not None else 0) if scramble else None
    shift = None
    if cfg.shift_seed is not None:
        shift = np.random.default_rng(cfg.shift_seed + 1).random(dim)

    def batch_sum(start, count):
        u = halton_points(start, count, dim, seed)
        if shift is not None:
            u = np.mod(u + shift, 1.0)
        vals = np.asarray(f(np.pi * u), dtype=float)
        bad = ~np.isfinite(vals)
        if bad.any():
            raise IntegrandError(np.pi * u[np.argmax(bad)])
        return _pairwise_sum(vals)

    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    total = 0.0
    used = 0
    history: list[float] = []
    converged = False
    # fixed sub-block size so the reduction tree ignores the worker count
    sub = min(cfg.batch, 1 << 16)
    try:
        while used < cfg.max_points:
            count = min(cfg.batch, cfg.max_points - used)
            starts = [(1 + used + i, min(sub, count - i)) for i in range(0, count, sub)]
            if pool:
                parts = list(pool.map(lambda a: batch_sum(*a), starts))
            else:
                parts = [batch_sum(*a) for a in starts]
            # fixed-order combination keeps results independent of worker count
            total += _pairwise_sum(parts)
            used += count
            history.append(vol * total / used)
            if len(history) >= cfg.window and used >= cfg.min_points:
                recent = history[-cfg.window:]
                spread = max(recent) - min(recent)
                if spread <= cfg.rel_tol * abs(history[-1]):
                    converged = True
                    break
    finally:
        if pool:
            pool.shutdown()
    recent = history[-cfg.window:]
    return QuadratureEstimate(
        value=history[-1],
        error_estimate=float(max(recent) - min(recent)) if len(recent) > 1 else abs(history[-1]),
        evaluations=used,
        method="qmc",
        converged=converged,
    )
