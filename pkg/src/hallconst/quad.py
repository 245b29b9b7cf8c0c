"""Iterated adaptive Gauss-Kronrod quadrature over the unit cube.

A k-dimensional integral is computed as k nested one-dimensional adaptive
integrations.  Each level is batched: all one-dimensional problems that a
level needs in a refinement round are solved together with numpy, so the
Python overhead grows with the number of rounds, not the number of points.

Error estimates combine the Kronrod-Gauss difference of each level with the
Kronrod-weighted error of the inner integrals it consumed.  Per-problem sums
are accumulated with Neumaier compensation in a fixed order, so results are
bit-reproducible.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Literal

import numpy as np

_EPS = np.finfo(float).eps

# Gauss-Kronrod abscissae and weights (QUADPACK qk15 / qk21); the Gauss
# nodes are the odd-indexed abscissae.
_XGK15 = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000])
_WGK15 = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG7 = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

_XGK21 = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000])
_WGK21 = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208980296410, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821])
_WG10 = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338])


def _full_rule(xgk, wgk, wg):
    """Expand half-rules to symmetric nodes on [-1, 1] with aligned weights."""
    m = len(xgk)
    center = xgk[-1] == 0.0
    nodes = np.concatenate([-xgk, xgk[::-1][1:] if center else xgk[::-1]])
    wk = np.concatenate([wgk, wgk[::-1][1:] if center else wgk[::-1]])
    g_half = np.zeros(m)
    g_idx = np.arange(1, m, 2)
    g_half[g_idx] = wg
    g = np.concatenate([g_half, g_half[::-1][1:] if center else g_half[::-1]])
    return nodes, wk, g


RULES = {
    15: _full_rule(_XGK15, _WGK15, _WG7),
    21: _full_rule(_XGK21, _WGK21, _WG10),
}

# polynomial degree integrated exactly by the Kronrod rule
RULE_DEGREE = {15: 22, 21: 31}


class IntegrandError(FloatingPointError):
    """The integrand returned NaN; carries the offending point."""

    def __init__(self, point):
        self.point = np.asarray(point)
        super().__init__(f"integrand returned NaN at {self.point.tolist()}")


@dataclass(frozen=True)
class AdaptiveConfig:
    abs_tol: float = 1e-14
    rel_tol: float = 1e-8
    max_evaluations: int = 200_000_000
    rule: int = 15
    max_depth: int = 40
    # inner integrals are solved this much tighter than the level above
    inner_factor: float = 0.25
    chunk: int = 4096
    workers: int = 1

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {sorted(RULES)}")
        if self.max_evaluations < self.rule:
            raise ValueError("max_evaluations must be at least the rule size")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class QuadratureEstimate:
    value: float
    error_estimate: float
    evaluations: int
    method: Literal["adaptive", "qmc"]
    converged: bool
    components: list[float] | None = None
    component_errors: list[float] | None = None

    def __post_init__(self):
        if self.error_estimate < 0:
            raise ValueError("error estimate must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureEstimate":
        return cls(**data)


class _Budget:
    def __init__(self, limit):
        self.limit = limit
        self.used = 0

    @property
    def exhausted(self):
        return self.used >= self.limit


class _Neumaier:
    """Per-problem compensated accumulators for an ``(m, p)`` block."""

    def __init__(self, m, p):
        self.s = np.zeros((m, p))
        self.c = np.zeros((m, p))

    def add(self, v):
        t = self.s + v
        big = np.abs(self.s) >= np.abs(v)
        self.c += np.where(big, (self.s - t) + v, (v - t) + self.s)
        self.s = t

    @property
    def total(self):
        return self.s + self.c


def _segment_sum(ids, vals, m):
    """Deterministic per-problem sum of rows of ``vals``."""
    out = np.zeros((m, vals.shape[1]))
    np.add.at(out, ids, vals)
    return out


class _Engine:
    def __init__(self, fun, k, p, cfg, budget, axis_order):
        self.fun = fun
        self.k = k
        self.p = p
        self.cfg = cfg
        self.budget = budget
        self.order = axis_order
        self.nodes, self.wk, self.wg = RULES[cfg.rule]
        self.pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None

    def evaluate(self, pts):
        """Evaluate the integrand on cube points given in nesting order."""
        x = np.empty_like(pts)
        x[:, self.order] = pts
        n = x.shape[0]
        self.budget.used += n
        step = 1 << 17
        if n <= step:
            vals = self._call(x)
        else:
            blocks = [x[i:i + step] for i in range(0, n, step)]
            it = self.pool.map(self._call, blocks) if self.pool else map(self._call, blocks)
            vals = np.concatenate(list(it), axis=0)
        bad = ~np.isfinite(vals).all(axis=1)
        if bad.any():
            raise IntegrandError(x[np.argmax(bad)])
        return vals

    def _call(self, x):
        v = np.asarray(self.fun(x), dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        return v.reshape(x.shape[0], self.p)

    def level(self, prefix, rel, abs_):
        m = prefix.shape[0]
        if m > self.cfg.chunk:
            parts = [self.level(prefix[i:i + self.cfg.chunk], rel, abs_)
                     for i in range(0, m, self.cfg.chunk)]
            return (np.concatenate([q[0] for q in parts]), np.concatenate([q[1] for q in parts]),
                    np.concatenate([q[2] for q in parts]))
        return self._level(prefix, rel, abs_)

    def _level(self, prefix, rel, abs_):
        cfg = self.cfg
        m, j = prefix.shape
        p = self.p
        inner = j < self.k - 1
        R = self.nodes.size
        a = np.zeros(m)
        b = np.ones(m)
        pid = np.arange(m)
        depth = np.zeros(m, dtype=int)
        value = _Neumaier(m, p)
        error = np.zeros((m, p))
        converged = np.ones(m, dtype=bool)
        while pid.size:
            half = 0.5 * (b - a)
            x = (0.5 * (a + b))[:, None] + half[:, None] * self.nodes[None, :]
            sub = np.concatenate([np.repeat(prefix[pid], R, axis=0), x.reshape(-1, 1)], axis=1)
            if inner:
                f, ferr, fok = self.level(sub, rel * cfg.inner_factor, abs_ * cfg.inner_factor)
                ferr = ferr.reshape(pid.size, R, p)
                bad_inner = ~fok.reshape(pid.size, R).all(axis=1)
            else:
                f = self.evaluate(sub)
                ferr = None
                bad_inner = np.zeros(pid.size, dtype=bool)
            f = f.reshape(pid.size, R, p)
            kron = half[:, None] * np.einsum("irp,r->ip", f, self.wk)
            gauss = half[:, None] * np.einsum("irp,r->ip", f, self.wg)
            resabs = half[:, None] * np.einsum("irp,r->ip", np.abs(f), self.wk)
            mean = kron / np.where(half > 0, 2 * half, 1.0)[:, None]
            resasc = half[:, None] * np.einsum("irp,r->ip", np.abs(f - mean[:, None, :]), self.wk)
            err = np.abs(kron - gauss)
            with np.errstate(divide="ignore", invalid="ignore"):
                scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
            err = np.where((resasc > 0) & (err > 0), scaled, err)
            floor = 50.0 * _EPS * resabs
            err = np.maximum(err, np.where(resabs > floor, floor, 0.0))
            # bisecting this level cannot shrink the inner errors, so only
            # the level's own error decides acceptance
            own = err
            if ferr is not None:
                err = err + half[:, None] * np.einsum("irp,r->ip", ferr, self.wk)

            # current estimate of each problem: accepted part + active part
            est = value.total + _segment_sum(pid, kron, m)
            goal = np.maximum(abs_, rel * np.abs(est))
            # a problem whose summed error already meets its goal is finished
            whole = ((error + _segment_sum(pid, err, m)) <= goal).all(axis=1)
            ok = whole[pid] | (own <= goal[pid] * (2 * half)[:, None]).all(axis=1)
            # nothing more to gain once the estimate is at the roundoff floor
            ok |= (own <= 100.0 * _EPS * resabs).all(axis=1)
            stuck = (depth >= cfg.max_depth) | self.budget.exhausted
            done = ok | stuck
            if np.any(stuck & ~ok):
                converged[pid[stuck & ~ok]] = False
            if np.any(bad_inner & done):
                converged[pid[bad_inner & done]] = False
            if done.any():
                value.add(_segment_sum(pid[done], kron[done], m))
                error += _segment_sum(pid[done], err[done], m)
            keep = ~done
            if not keep.any():
                break
            mid = 0.5 * (a[keep] + b[keep])
            a = np.concatenate([a[keep], mid])
            b = np.concatenate([mid, b[keep]])
            pid = np.concatenate([pid[keep], pid[keep]])
            depth = np.concatenate([depth[keep] + 1, depth[keep] + 1])
            order = np.argsort(pid, kind="stable")
            a, b, pid, depth = a[order], b[order], pid[order], depth[order]
        return value.total, error, converged


def integrate_adaptive(f: Callable[[np.ndarray], np.ndarray], dim: int,
                       cfg: AdaptiveConfig | None = None,
                       axis_order=None) -> QuadratureEstimate:
    """Integrate ``f`` over ``[0, 1]^dim`` by iterated adaptive quadrature.

    ``f`` maps an ``(N, dim)`` array of points to ``(N,)`` values, or to
    ``(N, p)`` for a vector-valued integrand (all components share nodes
    and must each meet the tolerance).  ``axis_order`` lists the cube axes
    from outermost to innermost integration.
    """
    cfg = cfg or AdaptiveConfig()
    if dim < 1:
        raise ValueError("dim must be at least 1")
    order = np.arange(dim) if axis_order is None else np.asarray(axis_order)
    if sorted(order.tolist()) != list(range(dim)):
        raise ValueError("axis_order must be a permutation of the axes")
    probe = np.asarray(f(np.full((1, dim), 0.5)), dtype=float)
    p = 1 if probe.ndim <= 1 else probe.shape[1]
    budget = _Budget(cfg.max_evaluations)
    eng = _Engine(f, dim, p, cfg, budget, order)
    try:
        val, err, ok = eng.level(np.zeros((1, 0)), cfg.rel_tol, cfg.abs_tol)
    finally:
        if eng.pool:
            eng.pool.shutdown()
    val, err = val[0], err[0]
    tol = np.maximum(cfg.abs_tol, cfg.rel_tol * np.abs(val))
    converged = bool(ok[0]) and bool((err <= tol).all())
    return QuadratureEstimate(
        value=float(val[0]),
        error_estimate=float(err[0]),
        evaluations=int(budget.used),
        method="adaptive",
        converged=converged,
        components=[float(v) for v in val] if p > 1 else None,
        component_errors=[float(e) for e in err] if p > 1 else None,
    )


def integrate_iterated_1d(f_1d: Callable, interval: tuple[float, float],
                          cfg: AdaptiveConfig | None = None) -> QuadratureEstimate:
    """Adaptive integral of a vectorized scalar function over ``[a, b]``."""
    lo, hi = map(float, interval)
    width = hi - lo

    def g(u):
        x = lo + width * u[:, 0]
        out = np.asarray(f_1d(x), dtype=float)
        if out.shape != x.shape:
            out = np.array([f_1d(t) for t in x], dtype=float)
        return out * width

    return integrate_adaptive(g, 1, cfg)


def integrate_box(f: Callable, box, cfg: AdaptiveConfig | None = None) -> QuadratureEstimate:
    """Adaptive integral over a rectangular box given as ``[(lo, hi), ...]``."""
    lo = np.array([b[0] for b in box], dtype=float)
    width = np.array([b[1] - b[0] for b in box], dtype=float)
    vol = float(np.prod(width))

    def g(u):
        return np.asarray(f(lo + u * width), dtype=float) * vol

    return integrate_adaptive(g, len(box), cfg)


def wallis_integral(power: int) -> float:
    """Closed form of the integral of cos^p over [0, pi]."""
    if power % 2:
        return 0.0
    return math.pi * math.prod(range(power - 1, 0, -2)) / math.prod(range(power, 0, -2)) if power else math.pi
