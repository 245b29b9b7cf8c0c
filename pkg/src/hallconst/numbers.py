"""Exact arithmetic helpers: Bernoulli numbers, factorization, recognition.

Rationals are :class:`fractions.Fraction` (always canonical, denominator
positive).  Bernoulli numbers use the convention B_1 = -1/2.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

BigRational = Fraction

SMALL_PRIMES = tuple(p for p in range(2, 1000) if all(p % q for q in range(2, int(p ** 0.5) + 1)))
# window candidates are judged by smoothness over primes up to this bound
SMOOTH_BOUND = 97
MAX_WINDOW = 200_000


# ---------------------------------------------------------------------------
# Bernoulli numbers

@lru_cache(maxsize=None)
def _bernoulli_table(m: int) -> tuple[Fraction, ...]:
    # sum_{k=0}^{j} C(j+1, k) B_k = 0 for j >= 1
    b = [Fraction(1)]
    for j in range(1, m + 1):
        s = sum(math.comb(j + 1, k) * b[k] for k in range(j))
        b.append(-s / (j + 1))
    return tuple(b)


def bernoulli(index: int) -> Fraction:
    """Exact Bernoulli number B_index (B_1 = -1/2)."""
    if index < 0:
        raise ValueError("index must be nonnegative")
    if index > 1 and index % 2:
        return Fraction(0)
    return _bernoulli_table(index)[index]


def zeta_even(n: int) -> float:
    """zeta(2n) = (-1)^(n+1) B_2n (2 pi)^(2n) / (2 (2n)!)."""
    if n < 1:
        raise ValueError("n must be positive")
    b = bernoulli(2 * n)
    return float((-1) ** (n + 1) * b * Fraction(2) ** (2 * n - 1) / math.factorial(2 * n)) * math.pi ** (2 * n)


def partial_sum_denominators(count: int) -> list[int]:
    """Entry j (1-based) is the reduced denominator of B_0 + B_2 + ... + B_{2j-2}."""
    if count < 1:
        raise ValueError("count must be at least 1")
    out, s = [], Fraction(0)
    for i in range(count):
        s += bernoulli(2 * i)
        out.append(s.denominator)
    return out


def match_against_sequence(N: int, seq: list[int], max_multiplier: int = 10 ** 4) -> list[dict]:
    """All exact relations ``N = m * seq[i]`` or ``N = seq[i] / m`` with m <= cap.

    Indices are 1-based to match :func:`partial_sum_denominators`.
    """
    if N < 1:
        raise ValueError("N must be positive")
    out = []
    for i, e in enumerate(seq, start=1):
        if N % e == 0 and N // e <= max_multiplier:
            out.append({"index": i, "multiplier": N // e, "form": "multiple"})
        elif e % N == 0 and e // N <= max_multiplier:
            out.append({"index": i, "multiplier": e // N, "form": "divisor"})
    return out


# ---------------------------------------------------------------------------
# factorization

def is_probable_prime(n: int) -> bool:
    """Miller-Rabin; deterministic below 3.3e24 with these bases."""
    if n < 2:
        return False
    for p in SMALL_PRIMES[:13]:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_brent(n: int, rng: random.Random, max_iter: int) -> int | None:
    if n % 2 == 0:
        return 2
    y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
    g = r = q = 1
    it = 0
    x = ys = y
    while g == 1:
        x = y
        for _ in range(r):
            y = (y * y + c) % n
        k = 0
        while k < r and g == 1:
            ys = y
            for _ in range(min(m, r - k)):
                y = (y * y + c) % n
                q = q * abs(x - y) % n
            g = math.gcd(q, n)
            k += m
        r *= 2
        it += r
        if it > max_iter:
            return None
    if g == n:
        while True:
            ys = (ys * ys + c) % n
            g = math.gcd(abs(x - ys), n)
            if g > 1:
                break
    return g if g != n else None


@dataclass
class Factorization:
    n: int
    factors: list[tuple[int, int]]
    cofactor: int = 1  # unfactored remainder when splitting gave up

    @property
    def complete(self) -> bool:
        return self.cofactor == 1

    def product(self) -> int:
        return math.prod(p ** e for p, e in self.factors) * self.cofactor

    def __str__(self):
        parts = [f"{p}^{e}" if e > 1 else str(p) for p, e in self.factors]
        if self.cofactor != 1:
            parts.append(f"({self.cofactor})")
        return " * ".join(parts)


def factorize(N: int, max_iter: int = 2_000_000) -> Factorization:
    """Prime factorization by trial division, Miller-Rabin and Pollard-Brent."""
    N = int(N)
    if N < 2:
        raise ValueError("N must be at least 2")
    counts: dict[int, int] = {}
    n = N
    for p in SMALL_PRIMES:
        while n % p == 0:
            counts[p] = counts.get(p, 0) + 1
            n //= p
    rng = random.Random(12345)
    stack, rest = ([n] if n > 1 else []), 1
    while stack:
        m = stack.pop()
        if is_probable_prime(m):
            counts[m] = counts.get(m, 0) + 1
            continue
        r = math.isqrt(m)
        if r * r == m:
            stack += [r, r]
            continue
        d = None
        for _ in range(8):
            d = _pollard_brent(m, rng, max_iter)
            if d:
                break
        if not d:
            rest *= m
            continue
        stack += [d, m // d]
    return Factorization(N, sorted(counts.items()), rest)


# ---------------------------------------------------------------------------
# recognition

@dataclass
class Candidate:
    pi_power: int
    integer: int
    residual: float
    largest_prime: int | None  # None when not SMOOTH_BOUND-smooth


@dataclass
class RecognitionReport:
    input: float
    pi_power: int
    recognized_integer: int
    residual: float
    factorization: list[tuple[int, int]]
    factorization_complete: bool = True
    sequence_matches: list[dict] = field(default_factory=list)
    ambiguous: bool = False
    alternatives: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "input": self.input,
            "pi_power": self.pi_power,
            # integers beyond 2**53 would lose digits as JSON numbers
            "recognized_integer": str(self.recognized_integer),
            "residual": self.residual,
            "factorization": [[str(p), e] for p, e in self.factorization],
            "factorization_complete": self.factorization_complete,
            "sequence_matches": self.sequence_matches,
            "ambiguous": self.ambiguous,
            "alternatives": self.alternatives,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RecognitionReport":
        d = dict(d)
        d["recognized_integer"] = int(d["recognized_integer"])
        d["factorization"] = [(int(p), int(e)) for p, e in d["factorization"]]
        return cls(**d)

    def expression(self) -> str:
        if self.pi_power == 0:
            return str(self.recognized_integer)
        power = "" if self.pi_power == 1 else f"^{self.pi_power}"
        return f"{self.recognized_integer}/pi{power}"


def _smooth_part(cands: np.ndarray):
    """Largest prime factor of each candidate if it is SMOOTH_BOUND-smooth."""
    rem = cands.copy()
    lpf = np.ones_like(cands)
    for p in (q for q in SMALL_PRIMES if q <= SMOOTH_BOUND):
        while True:
            hit = (rem % p == 0) & (rem > 1)
            if not hit.any():
                break
            rem[hit] //= p
            lpf[hit] = p
    return np.where(rem == 1, lpf, 0)


def _window_candidates(y: float, max_residual: float, k: int) -> list[Candidate]:
    lo = math.ceil(y * (1 - max_residual))
    hi = math.floor(y * (1 + max_residual))
    lo = max(lo, 1)
    if hi < lo:
        return []
    nearest = max(1, round(y))
    if hi - lo + 1 > MAX_WINDOW:
        lo = max(lo, nearest - MAX_WINDOW // 2)
        hi = min(hi, lo + MAX_WINDOW - 1)
    if hi < 2 ** 62:
        ints = np.arange(lo, hi + 1, dtype=np.int64)
        lpf = _smooth_part(ints)
        smooth = np.flatnonzero(lpf)
        picks = [(int(ints[i]), int(lpf[i])) for i in smooth]
    else:
        picks = []
    if not picks:
        return [Candidate(k, nearest, abs(y - nearest) / nearest, None)]
    return [Candidate(k, N, abs(y - N) / N, p) for N, p in picks]


def recognize_pi_rational(x: float, k_range=(0, 6), max_residual: float = 1e-6,
                          sequence: list[int] | None = None,
                          max_multiplier: int = 10 ** 4) -> RecognitionReport | None:
    """Find an integer N and power k with ``x * pi**k`` close to N.

    Every integer inside the relative window ``max_residual`` is a candidate.
    When a window holds several, the one whose largest prime factor is
    smallest wins (constants of interest are highly composite), then the
    smaller residual.  Windows from different k compete the same way and
    the losers are reported as alternatives with ``ambiguous`` set.
    Returns ``None`` when no k admits a candidate.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    k_lo, k_hi = k_range
    found: list[Candidate] = []
    for k in range(k_lo, k_hi + 1):
        y = x * math.pi ** k
        for c in _window_candidates(y, max_residual, k):
            if c.residual <= max_residual:
                found.append(c)
    if not found:
        return None

    def rank(c):
        return (c.largest_prime if c.largest_prime is not None else math.inf, c.residual)

    found.sort(key=rank)
    best = found[0]
    best_by_k = {}
    for c in found[1:]:
        if c.pi_power != best.pi_power and c.pi_power not in best_by_k:
            best_by_k[c.pi_power] = c
    fac = factorize(best.integer) if best.integer >= 2 else Factorization(best.integer, [])
    matches = []
    if sequence is not None:
        matches = match_against_sequence(best.integer, sequence, max_multiplier)
    return RecognitionReport(
        input=x,
        pi_power=best.pi_power,
        recognized_integer=best.integer,
        residual=best.residual,
        factorization=fac.factors,
        factorization_complete=fac.complete,
        sequence_matches=matches,
        ambiguous=bool(best_by_k),
        alternatives=[{"pi_power": c.pi_power, "integer": str(c.integer), "residual": c.residual,
                       "largest_prime": c.largest_prime} for c in best_by_k.values()],
    )
