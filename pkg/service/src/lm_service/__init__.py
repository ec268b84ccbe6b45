"""Masked-LM inference microservice.

Wraps a pre-trained masked language model behind a small HTTP API:
top-k mask predictions, mask-position contextual embeddings, and a model
info endpoint. No training or fine-tuning happens here.
"""

__version__ = "0.1.0"
