"""Builds a tiny randomly-initialized masked LM for offline contract tests."""
from __future__ import annotations

import os

import pytest

os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("HF_HUB_OFFLINE", "1")

_TINY_VOCAB = """
[PAD] [UNK] [CLS] [SEP] [MASK]
such as and other including especially the a of , .
countries nations states cities companies metals
united china canada japan intel microsoft dell
##s ##ing ##ed
""".split()


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    import torch
    from transformers import BertConfig, BertForMaskedLM, BertTokenizer

    directory = tmp_path_factory.mktemp("tiny_bert")
    vocab_file = directory / "base_vocab.txt"
    vocab_file.write_text("\n".join(_TINY_VOCAB), encoding="utf-8")
    tokenizer = BertTokenizer(str(vocab_file), do_lower_case=True)
    config = BertConfig(
        vocab_size=len(_TINY_VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=48,
    )
    torch.manual_seed(0)
    model = BertForMaskedLM(config)
    model.save_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return str(directory)


@pytest.fixture(scope="session")
def backend(tiny_model_dir):
    from lm_service.model import MaskedLmBackend

    return MaskedLmBackend(tiny_model_dir)


@pytest.fixture(scope="session")
def client(backend):
    from fastapi.testclient import TestClient

    from lm_service.app import create_app
    from lm_service.config import ServiceConfig

    app = create_app(ServiceConfig(model="tiny", max_concurrent=4), backend=backend)
    with TestClient(app) as test_client:
        yield test_client
