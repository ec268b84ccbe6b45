"""Endpoint contract tests against the tiny offline model."""
from __future__ import annotations

from fastapi.testclient import TestClient

from lm_service.app import create_app
from lm_service.config import ServiceConfig

PROBE = "[MASK] such as united, china, and canada"


def test_predict_mask_shape_and_order(client):
    response = client.post("/v1/predict_mask", json={"text": PROBE, "top_k": 3})
    assert response.status_code == 200
    predictions = response.json()["predictions"]
    assert 1 <= len(predictions) <= 3
    logprobs = [p["logprob"] for p in predictions]
    assert logprobs == sorted(logprobs, reverse=True)
    tokens = [p["token"] for p in predictions]
    assert len(set(tokens)) == len(tokens)


def test_predictions_filter_subword_artifacts(client):
    response = client.post("/v1/predict_mask", json={"text": PROBE, "top_k": 10_000})
    predictions = response.json()["predictions"]
    for p in predictions:
        assert not p["token"].startswith("##")
        assert any(ch.isalnum() for ch in p["token"])
    # top_k beyond the vocabulary returns the full filtered ranking
    again = client.post("/v1/predict_mask", json={"text": PROBE, "top_k": 20_000})
    assert len(again.json()["predictions"]) == len(predictions)


def test_two_masks_rejected(client):
    response = client.post(
        "/v1/predict_mask", json={"text": "[MASK] and [MASK] here", "top_k": 3}
    )
    assert response.status_code == 400


def test_whitespace_only_rejected(client):
    response = client.post("/v1/embed_mask", json={"text": "   "})
    assert response.status_code == 400


def test_missing_mask_rejected(client):
    response = client.post("/v1/embed_mask", json={"text": "no mask at all"})
    assert response.status_code == 400


def test_embedding_deterministic_and_dim_consistent(client):
    info = client.get("/v1/info").json()
    first = client.post("/v1/embed_mask", json={"text": PROBE}).json()["vector"]
    second = client.post("/v1/embed_mask", json={"text": PROBE}).json()["vector"]
    assert first == second
    assert len(first) == info["dim"]


def test_info_reports_model(client):
    info = client.get("/v1/info").json()
    assert info["dim"] == 32
    assert info["model"]


def test_prediction_deterministic(client):
    runs = [
        client.post("/v1/predict_mask", json={"text": PROBE, "top_k": 5}).json()
        for _ in range(2)
    ]
    assert runs[0] == runs[1]


def test_capacity_exhaustion_returns_503(backend):
    app = create_app(ServiceConfig(model="tiny", max_concurrent=0), backend=backend)
    with TestClient(app) as client:
        response = client.post("/v1/predict_mask", json={"text": PROBE, "top_k": 1})
        assert response.status_code == 503


def test_long_text_rejected(backend):
    long_text = "[MASK] " + " ".join(["such"] * 100)
    app = create_app(ServiceConfig(model="tiny", max_concurrent=2), backend=backend)
    with TestClient(app) as client:
        response = client.post("/v1/embed_mask", json={"text": long_text})
        assert response.status_code == 400
