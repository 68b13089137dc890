"""FastAPI application wrapping the core package.

Run with ``scangap serve`` or ``uvicorn scangap.service.app:app``. Library
errors map to HTTP 422 (bad input) or 400 (precondition), carrying the
exception class so the thin client can restore the matching exit code.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import harness, metrics
from ..errors import FormatError, ScanGapError, ValidationError
from ..harness import ScanSet
from ..metrics import MetricSpec
from ..perturb import PERTURBATION_KINDS, PerturbationSpec
from .schemas import (
    CloudModel,
    CompareRequest,
    MetricResultModel,
    PerturbRequest,
    SelftestRequest,
    SelftestResponse,
    TransferRequest,
    TransferResponse,
    TwoStepRequest,
    TwoStepResponse,
)

app = FastAPI(title="scangap", version="0.1.0")


@app.exception_handler(ScanGapError)
async def _library_error(request: Request, exc: ScanGapError):
    status = 422 if isinstance(exc, (FormatError, ValidationError)) else 400
    return JSONResponse(status_code=status, content={"error": type(exc).__name__, "detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.get("/kinds")
def kinds() -> dict:
    return {"metrics": list(metrics.KINDS), "perturbations": list(PERTURBATION_KINDS)}


@app.post("/compare", response_model=MetricResultModel, response_model_exclude_none=True)
def compare(req: CompareRequest) -> dict:
    spec = MetricSpec.from_dict(req.spec.model_dump())
    return metrics.evaluate(spec, req.a.to_cloud(), req.b.to_cloud()).to_dict()


@app.post("/two-step", response_model=TwoStepResponse)
def two_step(req: TwoStepRequest) -> dict:
    return metrics.two_step_compare(req.a.to_cloud(), req.b.to_cloud(), req.threshold).to_dict()


@app.post("/perturb", response_model=CloudModel)
def perturb(req: PerturbRequest) -> CloudModel:
    spec = PerturbationSpec.from_dict(req.spec)
    return CloudModel.from_cloud(spec.apply(req.cloud.to_cloud()))


@app.post("/transfer-intensity", response_model=TransferResponse)
def transfer(req: TransferRequest) -> TransferResponse:
    cloud, frac = metrics.transfer_intensity(req.sim.to_cloud(), req.real.to_cloud(), req.radius)
    return TransferResponse(cloud=CloudModel.from_cloud(cloud), matched_fraction=frac)


@app.post("/selftest", response_model=SelftestResponse)
def selftest(req: SelftestRequest) -> dict:
    specs = (
        [MetricSpec.from_dict(m.model_dump()) for m in req.metrics] if req.metrics else harness.default_metrics()
    )
    scans = ScanSet.from_clouds([c.to_cloud() for c in req.scans])
    rep = harness.condition_selftest(specs, scans, seed=req.seed)
    doc = rep.to_dict()
    return {"conditions": doc["conditions"], "metrics": doc["metrics"], "matrix": doc["matrix"]}
