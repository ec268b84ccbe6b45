"""Client contract through which all language-model knowledge enters the engine.

Two backends share identical semantics: a deterministic fixture backend for
tests and offline runs, and a remote backend speaking the mask-prediction
wire protocol (POST /v1/predict_mask, POST /v1/embed_mask, GET /v1/info).
"""
from __future__ import annotations

import abc
import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import requests

from growset.probing import MASK, ProbeQuery


class LmError(Exception):
    """Base class for language-model client failures."""


class LmProtocolError(LmError):
    """A request or response violated the client contract."""


class LmUnavailableError(LmError):
    """The remote backend stayed unreachable after the retry budget."""


class FixtureGapError(LmError):
    """A fixture backend was asked for a query it was not configured with."""


@dataclass(frozen=True)
class MaskPrediction:
    token: str
    logprob: float


def _validate_query(query: ProbeQuery) -> str:
    text = query.text
    if text.count(MASK) != 1:
        raise LmProtocolError(f"query must contain exactly one {MASK}: {text!r}")
    return text


def _validate_predictions(raw: Sequence[MaskPrediction]) -> list[MaskPrediction]:
    tokens = [p.token for p in raw]
    if len(set(tokens)) != len(tokens):
        raise LmProtocolError(f"duplicate tokens in prediction list: {tokens!r}")
    logprobs = [p.logprob for p in raw]
    if any(a < b for a, b in zip(logprobs, logprobs[1:])):
        raise LmProtocolError("prediction logprobs must be non-increasing")
    return list(raw)


class LmClient(abc.ABC):
    """Capability contract: masked-token prediction and mask embeddings.

    Responses are deterministic per backend state and cached in memory for
    the lifetime of the client; probes repeat heavily across iterations.
    The cache is guarded by a lock so concurrent callers are safe (races
    would be benign anyway since responses are deterministic).
    """

    def __init__(self) -> None:
        self._prediction_cache: dict[tuple[str, int], list[MaskPrediction]] = {}
        self._embedding_cache: dict[str, np.ndarray] = {}
        self._cache_lock = threading.Lock()

    def predict_masked(self, query: ProbeQuery, top_k: int) -> list[MaskPrediction]:
        if top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {top_k}")
        text = _validate_query(query)
        key = (text, top_k)
        with self._cache_lock:
            cached = self._prediction_cache.get(key)
        if cached is None:
            cached = _validate_predictions(self._predict(text, top_k))[:top_k]
            with self._cache_lock:
                self._prediction_cache[key] = cached
        return list(cached)

    def embed_mask(self, query: ProbeQuery) -> np.ndarray:
        text = _validate_query(query)
        with self._cache_lock:
            cached = self._embedding_cache.get(text)
        if cached is None:
            cached = np.asarray(self._embed(text), dtype=np.float64)
            if cached.ndim != 1 or cached.size == 0:
                raise LmProtocolError(f"embedding must be a non-empty vector: {text!r}")
            with self._cache_lock:
                self._embedding_cache[text] = cached
        return cached.copy()

    @abc.abstractmethod
    def _predict(self, text: str, top_k: int) -> list[MaskPrediction]: ...

    @abc.abstractmethod
    def _embed(self, text: str) -> np.ndarray: ...


PredictionTable = Mapping[str, Sequence[tuple[str, float]] | Sequence[str]]


class FixtureLm(LmClient):
    """Table-driven backend; unconfigured queries fail loudly."""

    def __init__(
        self,
        predictions: PredictionTable | None = None,
        embeddings: Mapping[str, Sequence[float] | np.ndarray] | None = None,
    ) -> None:
        super().__init__()
        self._predictions: dict[str, list[MaskPrediction]] = {}
        for text, entries in (predictions or {}).items():
            self._predictions[text] = [
                MaskPrediction(e, -float(i + 1)) if isinstance(e, str) else MaskPrediction(*e)
                for i, e in enumerate(entries)
            ]
        self._embeddings = {
            text: np.asarray(vec, dtype=np.float64) for text, vec in (embeddings or {}).items()
        }

    @classmethod
    def from_json(cls, path: str | Path) -> "FixtureLm":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        predictions = {
            text: [(str(tok), float(lp)) for tok, lp in entries]
            for text, entries in data.get("predictions", {}).items()
        }
        return cls(predictions=predictions, embeddings=data.get("embeddings", {}))

    def _predict(self, text: str, top_k: int) -> list[MaskPrediction]:
        if text not in self._predictions:
            raise FixtureGapError(f"no predictions configured for query: {text!r}")
        return self._predictions[text]

    def _embed(self, text: str) -> np.ndarray:
        if text not in self._embeddings:
            raise FixtureGapError(f"no embedding configured for query: {text!r}")
        return self._embeddings[text]


class RecordingLm(LmClient):
    """Wraps another client and records responses into fixture tables."""

    def __init__(self, inner: LmClient) -> None:
        super().__init__()
        self._inner = inner

    def _predict(self, text: str, top_k: int) -> list[MaskPrediction]:
        return self._inner.predict_masked(ProbeQuery.from_text(text), top_k)

    def _embed(self, text: str) -> np.ndarray:
        return self._inner.embed_mask(ProbeQuery.from_text(text))

    def to_fixture_tables(self) -> dict:
        with self._cache_lock:
            return {
                "predictions": {
                    text: [[p.token, p.logprob] for p in preds]
                    for (text, _), preds in sorted(self._prediction_cache.items())
                },
                "embeddings": {
                    text: [float(x) for x in vec]
                    for text, vec in sorted(self._embedding_cache.items())
                },
            }

    def save_fixture(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_fixture_tables(), sort_keys=True), encoding="utf-8"
        )


class RemoteLm(LmClient):
    """HTTP backend: 3 attempts with exponential backoff, then a hard error."""

    def __init__(
        self,
        endpoint: str,
        *,
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 0.5,
        session: requests.Session | None = None,
    ) -> None:
        super().__init__()
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = session or requests.Session()

    def info(self) -> dict:
        return self._request("GET", "/v1/info", None)

    def _predict(self, text: str, top_k: int) -> list[MaskPrediction]:
        body = self._request("POST", "/v1/predict_mask", {"text": text, "top_k": top_k})
        try:
            return [MaskPrediction(str(p["token"]), float(p["logprob"])) for p in body["predictions"]]
        except (KeyError, TypeError) as err:
            raise LmProtocolError(f"malformed predict_mask response: {body!r}") from err

    def _embed(self, text: str) -> np.ndarray:
        body = self._request("POST", "/v1/embed_mask", {"text": text})
        try:
            return np.asarray(body["vector"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as err:
            raise LmProtocolError(f"malformed embed_mask response: {body!r}") from err

    def _request(self, method: str, path: str, payload: dict | None) -> dict:
        url = self.endpoint + path
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                response = self._session.request(
                    method, url, json=payload, timeout=self.timeout
                )
                if response.status_code >= 500:
                    last_error = LmUnavailableError(
                        f"{url} answered {response.status_code}"
                    )
                elif response.status_code >= 400:
                    raise LmProtocolError(
                        f"{url} rejected the request ({response.status_code}): "
                        f"{response.text[:200]}"
                    )
                else:
                    return response.json()
            except (requests.ConnectionError, requests.Timeout) as err:
                last_error = err
            if attempt + 1 < self.retries:
                time.sleep(self.backoff * 2**attempt)
        raise LmUnavailableError(
            f"LM service at {self.endpoint} unreachable after {self.retries} attempts"
        ) from last_error
