"""Command line entry point."""

from __future__ import annotations

import argparse
import sys

from riskadapter.scorers import AdapterError
from riskadapter.service import DEFAULT_MAX_BATCH, AdapterConfig, serve_predictions


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risk-adapter",
        description="Serve a text classifier behind the POST /predict contract",
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--model", help="lexicon .json file or transformer model id/path")
    source.add_argument("--constant", type=float, help="fixed probability stub, no model needed")
    parser.add_argument("--device", default="cpu", help="device hint for transformer models")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH)
    parser.add_argument("--workers", type=int, default=1, help="max concurrent requests")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = AdapterConfig(
            model=args.model,
            constant=args.constant,
            device=args.device,
            max_batch=args.max_batch,
            host=args.host,
            port=args.port,
            workers=args.workers,
        )
        serve_predictions(config)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
