"""Request and response models shared by the HTTP service and the CLI."""
from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

SCHEMA_VERSION = 1


class HallRequest(BaseModel):
    n: int = Field(ge=2, le=12)
    method: Literal["adaptive", "qmc"] = "adaptive"
    mean: Literal["arithmetic", "identric"] = "arithmetic"
    beta: int = Field(2, ge=1)
    region: Optional[Literal["ordered", "full"]] = None
    rel_tol: Optional[float] = Field(None, gt=0)
    max_evals: Optional[int] = Field(None, ge=21)
    recognize: bool = False
    max_residual: Optional[float] = Field(None, gt=0)
    workers: int = Field(1, ge=1)


class EntropyRequest(BaseModel):
    n: int = Field(ge=2, le=8)
    method: Literal["adaptive", "qmc"] = "adaptive"
    beta: int = Field(2, ge=1)
    rel_tol: Optional[float] = Field(None, gt=0)
    max_evals: Optional[int] = Field(None, ge=21)
    fit: bool = True
    workers: int = Field(1, ge=1)


class SpectrumRequest(BaseModel):
    n: int = Field(ge=2, le=6)
    rel_tol: Optional[float] = Field(None, gt=0)


class DensityRequest(BaseModel):
    case: Literal["bures2", "quasi2", "bures3", "quasi3"]
    marginal: Literal["theta", "phi", "theta-phi"] = "theta"
    grid: int = Field(256, ge=1, le=4096)


class RecognizeRequest(BaseModel):
    value: float = Field(gt=0)
    pi_min: int = 0
    pi_max: int = 6
    max_residual: float = Field(1e-6, gt=0)
    sequence_match: bool = False


class BernoulliRequest(BaseModel):
    terms: int = Field(10, ge=1, le=500)
    partial_sum_denominators: bool = False


class Envelope(BaseModel):
    """Uniform response wrapper.

    ``status`` is ``ok``, ``not_converged`` or ``unrecognized``; ``result``
    holds the command-specific payload.
    """

    schema_version: int = SCHEMA_VERSION
    command: str
    status: str
    result: Any


class ErrorBody(BaseModel):
    schema_version: int = SCHEMA_VERSION
    error: str
    detail: str
