"""HTTP surface: /v1/predict_mask, /v1/embed_mask, /v1/info."""
from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from lm_service.config import ServiceConfig
from lm_service.model import BadRequestError, MaskedLmBackend


class MaskRequest(BaseModel):
    text: str
    top_k: int = Field(default=10, ge=1)


class EmbedRequest(BaseModel):
    text: str


class PredictionOut(BaseModel):
    token: str
    logprob: float


class PredictionsOut(BaseModel):
    predictions: list[PredictionOut]


class VectorOut(BaseModel):
    vector: list[float]


class InfoOut(BaseModel):
    dim: int
    model: str


def create_app(config: ServiceConfig | None = None, backend: MaskedLmBackend | None = None) -> FastAPI:
    """Build the service app; the model loads eagerly at construction."""
    config = config or ServiceConfig.from_env()
    backend = backend or MaskedLmBackend(config.model, device=config.device)
    app = FastAPI(title="masked-lm inference service", version="0.1.0")
    slots = threading.Semaphore(config.max_concurrent)

    def _admit() -> None:
        if not slots.acquire(blocking=False):
            raise HTTPException(status_code=503, detail="service at capacity, retry later")

    @app.post("/v1/predict_mask", response_model=PredictionsOut)
    def predict_mask(request: MaskRequest) -> PredictionsOut:
        _admit()
        try:
            predictions = backend.predict_mask(request.text, request.top_k)
        except BadRequestError as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        finally:
            slots.release()
        return PredictionsOut(
            predictions=[PredictionOut(token=p.token, logprob=p.logprob) for p in predictions]
        )

    @app.post("/v1/embed_mask", response_model=VectorOut)
    def embed_mask(request: EmbedRequest) -> VectorOut:
        _admit()
        try:
            vector = backend.embed_mask(request.text)
        except BadRequestError as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        finally:
            slots.release()
        return VectorOut(vector=vector)

    @app.get("/v1/info", response_model=InfoOut)
    def info() -> InfoOut:
        return InfoOut(dim=backend.dim, model=backend.model_name)

    return app
