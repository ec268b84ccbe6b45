"""Run the service: `python -m lm_service` or `growset-lm-service`."""
from __future__ import annotations

import argparse

import uvicorn

from lm_service.app import create_app
from lm_service.config import ServiceConfig


def main() -> None:
    defaults = ServiceConfig.from_env()
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", default=defaults.model, help="HF model id or local dir")
    parser.add_argument("--device", default=defaults.device)
    parser.add_argument("--host", default=defaults.host)
    parser.add_argument("--port", type=int, default=defaults.port)
    parser.add_argument("--max-concurrent", type=int, default=defaults.max_concurrent)
    args = parser.parse_args()
    config = ServiceConfig(
        model=args.model,
        device=args.device,
        host=args.host,
        port=args.port,
        max_concurrent=args.max_concurrent,
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")


if __name__ == "__main__":
    main()
