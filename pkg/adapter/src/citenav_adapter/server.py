"""citenav-scorer protocol server.

Line-delimited UTF-8 JSON over stdio or TCP. On connect each side
immediately sends its handshake {"protocol": "citenav-scorer",
"version": 1} and then reads the peer's; if the model cannot be loaded
the server replies with an {"error": ...} line instead of a handshake.

Requests {"id", "query", "candidate"} get one response line each,
{"id", "score"} on success or {"id", "error"} on per-request failure
(id null when the request line was unparseable). Unknown request fields
are ignored. Requests already sitting in the input buffer are scored
together, up to the configured batch size.
"""

from __future__ import annotations

import json
import select
import socket
import sys

from .scoring import AdapterConfig, build_scorer

PROTOCOL_NAME = "citenav-scorer"
PROTOCOL_VERSION = 1


def _handshake_line() -> str:
    return json.dumps({"protocol": PROTOCOL_NAME, "version": PROTOCOL_VERSION})


class _LineChannel:
    """Buffered line IO over a raw file descriptor pair."""

    def __init__(self, read_fd: int, write_fd_obj):
        self.read_fd = read_fd
        self.write_obj = write_fd_obj
        self._buffer = b""
        self._eof = False

    def read_line(self, timeout: float | None = None) -> str | None:
        """Next line, or None on EOF (timeout 0 = only what's buffered)."""
        import os

        while True:
            newline = self._buffer.find(b"\n")
            if newline >= 0:
                line = self._buffer[:newline]
                self._buffer = self._buffer[newline + 1:]
                return line.decode("utf-8", errors="replace")
            if self._eof:
                return None
            ready, _, _ = select.select([self.read_fd], [], [], timeout)
            if not ready:
                return None
            chunk = os.read(self.read_fd, 65536)
            if chunk == b"":
                self._eof = True
                if self._buffer:
                    line, self._buffer = self._buffer, b""
                    return line.decode("utf-8", errors="replace")
                return None
            self._buffer += chunk

    def write_line(self, line: str) -> None:
        self.write_obj.write(line.encode("utf-8") + b"\n")
        self.write_obj.flush()


def _parse_request(line: str):
    """Returns (id, query, candidate, error_reply_or_None)."""
    try:
        obj = json.loads(line)
        if not isinstance(obj, dict):
            raise ValueError
    except ValueError:
        return None, None, None, {"id": None, "error": "malformed request line"}
    rid = obj.get("id")
    query, candidate = obj.get("query"), obj.get("candidate")
    if not isinstance(query, str) or not isinstance(candidate, str):
        return rid, None, None, {"id": rid, "error": "request needs string query and candidate"}
    return rid, query, candidate, None


def serve_connection(channel: _LineChannel, config: AdapterConfig) -> None:
    """Handshake, then score request lines until the peer closes."""
    try:
        scorer = build_scorer(config)
    except Exception as e:  # noqa: BLE001 - refusal is part of the protocol
        channel.write_line(json.dumps({"error": f"model load failed: {e}"}))
        raise
    channel.write_line(_handshake_line())
    peer = channel.read_line(timeout=None)
    if peer is None:
        return
    try:
        obj = json.loads(peer)
        ok = obj.get("protocol") == PROTOCOL_NAME and obj.get("version") == PROTOCOL_VERSION
    except (json.JSONDecodeError, AttributeError):
        ok = False
    if not ok:
        channel.write_line(json.dumps({"error": "unsupported client handshake"}))
        return

    while True:
        line = channel.read_line(timeout=None)
        if line is None:
            return
        batch_lines = [line]
        while len(batch_lines) < config.batch_size:
            extra = channel.read_line(timeout=0)
            if extra is None:
                break
            batch_lines.append(extra)

        parsed = []
        for raw in batch_lines:
            rid, query, candidate, error = _parse_request(raw)
            if error is not None:
                channel.write_line(json.dumps(error))
            else:
                parsed.append((rid, query, candidate))
        if not parsed:
            continue
        try:
            scores = scorer.score_batch([(q, c) for _, q, c in parsed])
            for (rid, _, _), score in zip(parsed, scores):
                channel.write_line(json.dumps({"id": rid, "score": score}))
        except Exception as e:  # noqa: BLE001 - fail per request, keep serving
            for rid, _, _ in parsed:
                channel.write_line(json.dumps({"id": rid, "error": str(e)}))


def serve_stdio(config: AdapterConfig) -> None:
    channel = _LineChannel(sys.stdin.fileno(), sys.stdout.buffer)
    serve_connection(channel, config)


def serve_tcp(config: AdapterConfig, port: int, once: bool = False) -> None:
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind(("127.0.0.1", port))
    server.listen(8)
    print(f"listening on {server.getsockname()[1]}", file=sys.stderr, flush=True)
    while True:
        conn, _ = server.accept()
        with conn:
            writer = conn.makefile("wb")
            channel = _LineChannel(conn.fileno(), writer)
            try:
                serve_connection(channel, config)
            except (BrokenPipeError, ConnectionResetError):
                pass
        if once:
            return
