"""Request handlers; framework-free so the CLI can call them in-process."""
from __future__ import annotations

from dataclasses import replace

from .. import pipeline
from ..kernels import KernelSpec
from ..numbers import bernoulli, partial_sum_denominators, recognize_pi_rational
from .schemas import (BernoulliRequest, DensityRequest, EntropyRequest, Envelope,
                      HallRequest, RecognizeRequest, SpectrumRequest)


def _adaptive_cfg(n, rel_tol, max_evals, workers):
    cfg = pipeline.default_adaptive(n, workers)
    if rel_tol is not None:
        cfg = replace(cfg, rel_tol=rel_tol)
    if max_evals is not None:
        cfg = replace(cfg, max_evaluations=max_evals)
    return cfg


def _qmc_cfg(n, rel_tol, max_evals, workers):
    cfg = pipeline.default_qmc(n, workers)
    if rel_tol is not None:
        cfg = replace(cfg, rel_tol=rel_tol)
    if max_evals is not None:
        cfg = replace(cfg, max_points=max_evals, batch=min(cfg.batch, max_evals),
                      min_points=min(cfg.min_points, max_evals))
    return cfg


def _cfg(method, n, rel_tol, max_evals, workers):
    build = _adaptive_cfg if method == "adaptive" else _qmc_cfg
    return build(n, rel_tol, max_evals, workers)


def hall(req: HallRequest, cache=None) -> Envelope:
    spec = KernelSpec(req.n, req.mean, req.beta)
    cfg = _cfg(req.method, req.n, req.rel_tol, req.max_evals, req.workers)
    res = pipeline.hall_constant(spec, req.method, cfg, region=req.region,
                                 recognize=req.recognize, max_residual=req.max_residual,
                                 cache=cache)
    status = "ok" if res.estimate.converged else "not_converged"
    return Envelope(command="hall", status=status, result=res.to_dict())


def entropy(req: EntropyRequest, cache=None) -> Envelope:
    cfg = _cfg(req.method, req.n, req.rel_tol, req.max_evals, req.workers)
    res = pipeline.average_entropy(req.n, cfg, method=req.method, beta=req.beta,
                                   fit=req.fit, cache=cache)
    status = "ok" if res.estimate.converged else "not_converged"
    return Envelope(command="entropy", status=status, result=res.to_dict())


def spectrum(req: SpectrumRequest) -> Envelope:
    cfg = _adaptive_cfg(req.n, req.rel_tol, None, 1)
    res = pipeline.expected_eigenvalues(req.n, cfg)
    status = "ok" if res.estimate.converged else "not_converged"
    return Envelope(command="spectrum", status=status, result=res.to_dict())


def density(req: DensityRequest) -> Envelope:
    grid = pipeline.density_grid(req.case, req.marginal, req.grid)
    return Envelope(command="density", status="ok",
                    result={"case": req.case, "marginal": req.marginal, **grid})


def recognize(req: RecognizeRequest) -> Envelope:
    seq = partial_sum_denominators(20) if req.sequence_match else None
    rep = recognize_pi_rational(req.value, (req.pi_min, req.pi_max), req.max_residual, sequence=seq)
    if rep is None:
        return Envelope(command="recognize", status="unrecognized", result={"input": req.value})
    return Envelope(command="recognize", status="ok", result=rep.to_dict())


def bernoulli_table(req: BernoulliRequest) -> Envelope:
    if req.partial_sum_denominators:
        payload = {"partial_sum_denominators": [str(v) for v in partial_sum_denominators(req.terms)]}
    else:
        payload = {"bernoulli": [{"index": i, "value": str(bernoulli(i))} for i in range(req.terms)]}
    return Envelope(command="bernoulli", status="ok", result=payload)
