"""Service configuration."""
from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class ServiceConfig:
    """Where the model comes from and how the service behaves.

    `model` is a Hugging Face model id or a local directory; it must be a
    masked LM with a mask token and per-token hidden states.
    """

    model: str = "bert-base-uncased"
    device: str = "cpu"
    host: str = "127.0.0.1"
    port: int = 8400
    max_concurrent: int = 8

    @classmethod
    def from_env(cls) -> "ServiceConfig":
        return cls(
            model=os.environ.get("LM_SERVICE_MODEL", cls.model),
            device=os.environ.get("LM_SERVICE_DEVICE", cls.device),
            host=os.environ.get("LM_SERVICE_HOST", cls.host),
            port=int(os.environ.get("LM_SERVICE_PORT", cls.port)),
            max_concurrent=int(os.environ.get("LM_SERVICE_MAX_CONCURRENT", cls.max_concurrent)),
        )
