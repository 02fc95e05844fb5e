"""Reference scorer stub speaking the citenav-scorer protocol.

Scores are a deterministic hash of the (query, candidate) texts, or a
constant. Runnable as ``python -m citenav.stub_scorer`` over stdio or
TCP; the ``--misbehave`` modes deliberately break the protocol so the
client's error handling can be exercised.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import socket
import sys

from .wire import PROTOCOL_NAME, PROTOCOL_VERSION, handshake_line


def hash_score(query: str, candidate: str) -> float:
    digest = hashlib.sha256(f"{query}\x1f{candidate}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / float(2**64)


def _respond(request_line: str, args) -> str:
    try:
        obj = json.loads(request_line)
        if not isinstance(obj, dict):
            raise ValueError("request is not an object")
    except ValueError:
        return json.dumps({"id": None, "error": "malformed request line"})
    rid = obj.get("id")
    query, candidate = obj.get("query"), obj.get("candidate")
    if not isinstance(query, str) or not isinstance(candidate, str):
        return json.dumps({"id": rid, "error": "request needs string query and candidate"})
    if args.misbehave == "error-reply":
        return json.dumps({"id": rid, "error": "induced failure"})
    if args.misbehave == "out-of-range":
        return json.dumps({"id": rid, "score": 1.5})
    if args.misbehave == "unmatched-id":
        return json.dumps({"id": f"{rid}-bogus", "score": 0.5})
    if args.misbehave == "garbage":
        return "%%% not json %%%"
    score = args.constant if args.constant is not None else hash_score(query, candidate)
    return json.dumps({"id": rid, "score": score})


def _serve_streams(reader, writer, args) -> None:
    if args.misbehave != "no-handshake":
        writer.write(handshake_line() + "\n")
        writer.flush()
    peer = reader.readline()
    if peer == "":
        return
    try:
        obj = json.loads(peer)
        ok = obj.get("protocol") == PROTOCOL_NAME and obj.get("version") == PROTOCOL_VERSION
    except (json.JSONDecodeError, AttributeError):
        ok = False
    if not ok:
        writer.write(json.dumps({"error": "unsupported client handshake"}) + "\n")
        writer.flush()
        return
    if args.misbehave == "die":
        return
    for line in reader:
        line = line.rstrip("\n")
        if not line:
            continue
        writer.write(_respond(line, args) + "\n")
        writer.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="citenav-scorer protocol stub")
    parser.add_argument("--constant", type=float, default=None,
                        help="reply with this fixed score instead of the text hash")
    parser.add_argument("--port", type=int, default=None,
                        help="serve over TCP on this port instead of stdio")
    parser.add_argument("--once", action="store_true",
                        help="TCP mode: exit after the first connection closes")
    parser.add_argument("--misbehave", default=None,
                        choices=["out-of-range", "unmatched-id", "garbage", "die",
                                 "no-handshake", "error-reply"],
                        help="break the protocol on purpose (for client tests)")
    args = parser.parse_args(argv)

    if args.port is None:
        _serve_streams(sys.stdin, sys.stdout, args)
        return 0

    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind(("127.0.0.1", args.port))
    server.listen(8)
    # report the bound port (useful with --port 0) on stderr
    print(f"listening on {server.getsockname()[1]}", file=sys.stderr, flush=True)
    while True:
        conn, _ = server.accept()
        with conn:
            reader = conn.makefile("r", encoding="utf-8", newline="\n")
            writer = conn.makefile("w", encoding="utf-8", newline="\n")
            try:
                _serve_streams(reader, writer, args)
            except (BrokenPipeError, ConnectionResetError):
                pass
        if args.once:
            return 0


if __name__ == "__main__":
    sys.exit(main())
