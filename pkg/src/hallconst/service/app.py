"""FastAPI application.

Run with ``hallconst serve`` or ``uvicorn hallconst.service.app:app``.
Numeric failures map to 422 with an :class:`ErrorBody`.
"""
from __future__ import annotations

import os

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..kernels import DivergenceError, SingularPointError
from ..pipeline import ResultCache
from ..quad import IntegrandError
from . import handlers
from .schemas import (BernoulliRequest, DensityRequest, EntropyRequest, Envelope, ErrorBody,
                      HallRequest, RecognizeRequest, SpectrumRequest)

app = FastAPI(title="hallconst", version=__version__)


def _cache():
    path = os.environ.get("HALLCONST_CACHE")
    return ResultCache(path) if path else None


@app.exception_handler(ValueError)
@app.exception_handler(DivergenceError)
@app.exception_handler(SingularPointError)
@app.exception_handler(IntegrandError)
async def numeric_failure(request: Request, exc: Exception):
    body = ErrorBody(error=type(exc).__name__, detail=str(exc))
    return JSONResponse(status_code=422, content=body.model_dump())


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/hall", response_model=Envelope)
def hall(req: HallRequest):
    return handlers.hall(req, _cache())


@app.post("/entropy", response_model=Envelope)
def entropy(req: EntropyRequest):
    return handlers.entropy(req, _cache())


@app.post("/spectrum", response_model=Envelope)
def spectrum(req: SpectrumRequest):
    return handlers.spectrum(req)


@app.post("/density", response_model=Envelope)
def density(req: DensityRequest):
    return handlers.density(req)


@app.post("/recognize", response_model=Envelope)
def recognize(req: RecognizeRequest):
    return handlers.recognize(req)


@app.post("/bernoulli", response_model=Envelope)
def bernoulli(req: BernoulliRequest):
    return handlers.bernoulli_table(req)
