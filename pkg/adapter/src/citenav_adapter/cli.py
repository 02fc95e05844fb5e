"""Command line for the scorer adapter process."""

from __future__ import annotations

import argparse
import sys

from .scoring import AdapterConfig
from .server import serve_stdio, serve_tcp


def build_config(args) -> AdapterConfig:
    return AdapterConfig(
        model=args.model,
        constant=args.constant,
        max_total=args.max_total,
        query_budget=args.query_tokens,
        candidate_budget=args.candidate_tokens,
        batch_size=args.batch_size,
        device=args.device,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="citenav-scorer-adapter",
        description="Serve a sequence-pair relevance model over the "
                    "citenav-scorer wire protocol (stdio or TCP).")
    parser.add_argument("--model", default=None,
                        help="model path or id; omit for deterministic stub mode")
    parser.add_argument("--constant", type=float, default=None,
                        help="stub mode: reply with this fixed score")
    parser.add_argument("--max-total", type=int, default=512)
    parser.add_argument("--query-tokens", type=int, default=256)
    parser.add_argument("--candidate-tokens", type=int, default=256)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--port", type=int, default=None,
                        help="serve over TCP on this port instead of stdio")
    parser.add_argument("--once", action="store_true",
                        help="TCP mode: exit after the first connection closes")
    args = parser.parse_args(argv)

    config = build_config(args)
    try:
        if args.port is None:
            serve_stdio(config)
        else:
            serve_tcp(config, args.port, once=args.once)
    except Exception as e:  # noqa: BLE001
        print(f"adapter error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
