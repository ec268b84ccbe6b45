"""Masked-LM inference backend.

The wire format uses the literal string "[MASK]" as the mask marker; it is
translated to the model's own mask token here so callers stay
model-agnostic. Inference runs in eval mode with gradients disabled, so
identical inputs give identical outputs within a process.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer

MASK_MARKER = "[MASK]"


class BadRequestError(ValueError):
    """The request text violates the endpoint contract."""


@dataclass(frozen=True)
class TokenPrediction:
    token: str
    logprob: float


def _is_subword_artifact(token: str) -> bool:
    """Continuation pieces and pure punctuation are not usable class words."""
    if token.startswith("##"):
        return True
    return not any(ch.isalnum() for ch in token)


class MaskedLmBackend:
    """One loaded model plus the two inference operations."""

    def __init__(self, model_name: str, device: str = "cpu"):
        self.model_name = model_name
        self.device = torch.device(device)
        self._tokenizer = AutoTokenizer.from_pretrained(model_name)
        self._model = AutoModelForMaskedLM.from_pretrained(model_name)
        self._model.to(self.device)
        self._model.eval()
        # model access is serialized; request parallelism is capped upstream
        self._lock = threading.Lock()
        self._special_ids = set(self._tokenizer.all_special_ids)
        # tokenizer.model_max_length is an unset sentinel for local builds;
        # the position-embedding table is the binding limit either way
        self._max_tokens = min(
            self._tokenizer.model_max_length,
            getattr(self._model.config, "max_position_embeddings", 10**9),
        )

    @property
    def dim(self) -> int:
        return int(self._model.config.hidden_size)

    def _encode(self, text: str) -> tuple[torch.Tensor, int]:
        if not text or not text.strip():
            raise BadRequestError("text must not be empty")
        if text.count(MASK_MARKER) != 1:
            raise BadRequestError(
                f"text must contain exactly one {MASK_MARKER}, got {text.count(MASK_MARKER)}"
            )
        prepared = text.replace(MASK_MARKER, self._tokenizer.mask_token)
        encoded = self._tokenizer(prepared, return_tensors="pt")
        input_ids = encoded["input_ids"]
        if input_ids.shape[1] > self._max_tokens:
            raise BadRequestError(
                f"text is {input_ids.shape[1]} tokens, exceeding the model window "
                f"of {self._max_tokens}"
            )
        positions = (input_ids[0] == self._tokenizer.mask_token_id).nonzero().flatten()
        if positions.numel() != 1:
            raise BadRequestError("text must tokenize to exactly one mask token")
        return encoded.to(self.device), int(positions[0])

    def predict_mask(self, text: str, top_k: int) -> list[TokenPrediction]:
        """Top-k tokens at the mask position, subword artifacts filtered out."""
        if top_k < 1:
            raise BadRequestError("top_k must be >= 1")
        encoded, mask_pos = self._encode(text)
        with self._lock, torch.no_grad():
            logits = self._model(**encoded).logits[0, mask_pos]
        logprobs = torch.log_softmax(logits.double(), dim=-1)
        order = torch.argsort(logprobs, descending=True)
        predictions: list[TokenPrediction] = []
        for token_id in order.tolist():
            if token_id in self._special_ids:
                continue
            token = self._tokenizer.convert_ids_to_tokens(token_id)
            if _is_subword_artifact(token):
                continue
            predictions.append(TokenPrediction(token, float(logprobs[token_id])))
            if len(predictions) == top_k:
                break
        return predictions

    def embed_mask(self, text: str) -> list[float]:
        """Last-layer hidden state at the mask position."""
        encoded, mask_pos = self._encode(text)
        with self._lock, torch.no_grad():
            outputs = self._model(**encoded, output_hidden_states=True)
        vector = outputs.hidden_states[-1][0, mask_pos]
        return [float(x) for x in vector]
