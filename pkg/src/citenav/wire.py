"""Client side of the citenav-scorer wire protocol, plus a conformance
checker that any scorer server implementation can be run against.

Protocol (line-delimited UTF-8 JSON over child-process stdio or TCP):

* On connect, each side immediately writes its handshake line
  ``{"protocol": "citenav-scorer", "version": 1}`` and then reads the
  peer's. A server that refuses (e.g. model load failure) writes a line
  with an ``"error"`` field instead.
* Request:  ``{"id": str, "query": str, "candidate": str}``
* Response: ``{"id": str, "score": float in [0, 1]}`` or
  ``{"id": str|null, "error": str}`` — one response line per request
  line, in any order within a batch; unknown fields are ignored.

A response carrying an id that was never requested, a duplicate id, an
out-of-range score, or an unparseable line is a protocol error. A dead
or silent peer is a scorer-unavailable error carrying the failed batch.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import socket
import subprocess

from .errors import ProtocolError, ScorerUnavailableError

PROTOCOL_NAME = "citenav-scorer"
PROTOCOL_VERSION = 1


def handshake_line() -> str:
    return json.dumps({"protocol": PROTOCOL_NAME, "version": PROTOCOL_VERSION})


def parse_handshake(line: str) -> None:
    """Raise ProtocolError unless the line is a valid peer handshake."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"handshake is not JSON: {line!r}") from e
    if not isinstance(obj, dict):
        raise ProtocolError(f"handshake is not an object: {line!r}")
    if "error" in obj:
        raise ScorerUnavailableError(f"scorer refused handshake: {obj['error']}")
    if obj.get("protocol") != PROTOCOL_NAME or obj.get("version") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported peer handshake: {line!r}")


class _StdioTransport:
    """Line transport over a child process's standard streams.

    Reads go through our own byte buffer on the raw pipe fd: mixing
    select() with a buffered file object would stall whenever several
    reply lines arrive in one read.
    """

    def __init__(self, command, timeout: float = 30.0):
        if isinstance(command, str):
            command = shlex.split(command)
        self.timeout = timeout
        self.proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        self._buffer = b""

    def send_line(self, line: str) -> None:
        if self.proc.poll() is not None:
            raise ScorerUnavailableError("scorer process has exited")
        try:
            self.proc.stdin.write(line.encode("utf-8") + b"\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as e:
            raise ScorerUnavailableError(f"scorer process pipe closed: {e}") from e

    def recv_line(self) -> str:
        fd = self.proc.stdout.fileno()
        while True:
            newline = self._buffer.find(b"\n")
            if newline >= 0:
                line = self._buffer[:newline]
                self._buffer = self._buffer[newline + 1:]
                return line.decode("utf-8")
            ready, _, _ = select.select([fd], [], [], self.timeout)
            if not ready:
                raise ScorerUnavailableError(f"scorer timed out after {self.timeout}s")
            chunk = os.read(fd, 65536)
            if chunk == b"":
                raise ScorerUnavailableError("scorer process closed its output")
            self._buffer += chunk

    def close(self) -> None:
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()


class _TcpTransport:
    """Line transport over a TCP connection."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as e:
            raise ScorerUnavailableError(f"cannot connect to scorer at {host}:{port}: {e}") from e
        self.sock.settimeout(timeout)
        self.reader = self.sock.makefile("r", encoding="utf-8", newline="\n")
        self.writer = self.sock.makefile("w", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        try:
            self.writer.write(line + "\n")
            self.writer.flush()
        except OSError as e:
            raise ScorerUnavailableError(f"scorer connection lost: {e}") from e

    def recv_line(self) -> str:
        try:
            line = self.reader.readline()
        except socket.timeout as e:
            raise ScorerUnavailableError("scorer timed out") from e
        except OSError as e:
            raise ScorerUnavailableError(f"scorer connection lost: {e}") from e
        if line == "":
            raise ScorerUnavailableError("scorer closed the connection")
        return line.rstrip("\n")

    def close(self) -> None:
        for stream in (self.writer, self.reader):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.sock.close()
        except OSError:
            pass


class ScorerConnection:
    """Handshaken connection that scores request batches."""

    def __init__(self, transport):
        self.transport = transport
        self.transport.send_line(handshake_line())
        parse_handshake(self.transport.recv_line())

    def score_batch(self, requests, batch_context=None) -> dict[str, float]:
        """Send one batch, return id -> score. Validates every reply."""
        pending = {r["id"] for r in requests}
        if len(pending) != len(requests):
            raise ValueError("request ids within a batch must be unique")
        for r in requests:
            self.transport.send_line(json.dumps(
                {"id": r["id"], "query": r["query"], "candidate": r["candidate"]},
                ensure_ascii=False))
        results: dict[str, float] = {}
        for _ in range(len(requests)):
            try:
                line = self.transport.recv_line()
            except ScorerUnavailableError as e:
                raise ScorerUnavailableError(str(e), batch=batch_context) from e
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ProtocolError(f"scorer reply is not JSON: {line!r}") from e
            if not isinstance(obj, dict):
                raise ProtocolError(f"scorer reply is not an object: {line!r}")
            if "error" in obj:
                raise ScorerUnavailableError(
                    f"scorer failed on request {obj.get('id')!r}: {obj['error']}",
                    batch=batch_context)
            rid = obj.get("id")
            if rid not in pending:
                raise ProtocolError(f"scorer reply with unmatched id {rid!r}")
            if rid in results:
                raise ProtocolError(f"scorer replied twice for id {rid!r}")
            value = obj.get("score")
            if not isinstance(value, (int, float)) or isinstance(value, bool) \
                    or not 0.0 <= float(value) <= 1.0:
                raise ProtocolError(f"score out of range for id {rid!r}: {value!r}")
            results[rid] = float(value)
        return results

    def close(self) -> None:
        self.transport.close()


def connect_stdio(command, timeout: float = 30.0) -> ScorerConnection:
    return ScorerConnection(_StdioTransport(command, timeout=timeout))


def connect_tcp(host: str, port: int, timeout: float = 30.0) -> ScorerConnection:
    return ScorerConnection(_TcpTransport(host, port, timeout=timeout))


def check_scorer_conformance(make_transport) -> list[str]:
    """Run the server-side conformance scenarios.

    ``make_transport`` must return a fresh raw transport (send_line /
    recv_line / close) to a freshly started server. Returns a list of
    failure descriptions; an empty list means the server conforms.
    """
    failures: list[str] = []

    def scenario(name):
        def deco(fn):
            transport = make_transport()
            try:
                fn(transport)
            except Exception as e:  # noqa: BLE001 - report, don't abort the suite
                failures.append(f"{name}: {type(e).__name__}: {e}")
            finally:
                transport.close()
            return fn
        return deco

    def shake(transport):
        transport.send_line(handshake_line())
        parse_handshake(transport.recv_line())

    def read_reply(transport):
        obj = json.loads(transport.recv_line())
        assert isinstance(obj, dict), "reply is not a JSON object"
        return obj

    @scenario("handshake")
    def _(t):
        shake(t)

    @scenario("id round-trip and score range")
    def _(t):
        shake(t)
        ids = ["r1", "r2", "r3"]
        for rid in ids:
            t.send_line(json.dumps({"id": rid, "query": f"q {rid}", "candidate": f"c {rid}"}))
        seen = {}
        for _ in ids:
            obj = read_reply(t)
            assert "error" not in obj, f"unexpected error reply: {obj}"
            assert obj.get("id") in ids, f"unknown id {obj.get('id')!r}"
            assert obj["id"] not in seen, f"duplicate reply for {obj['id']!r}"
            s = obj.get("score")
            assert isinstance(s, (int, float)) and 0.0 <= s <= 1.0, f"score out of range: {s!r}"
            seen[obj["id"]] = s
        assert set(seen) == set(ids), f"missing replies for {set(ids) - set(seen)}"

    @scenario("deterministic scores")
    def _(t):
        shake(t)
        req = {"id": "a", "query": "same text", "candidate": "same candidate"}
        t.send_line(json.dumps(req))
        first = read_reply(t)["score"]
        t.send_line(json.dumps(dict(req, id="b")))
        second = read_reply(t)["score"]
        assert first == second, f"same pair scored differently: {first} vs {second}"

    @scenario("malformed request gets an error reply")
    def _(t):
        shake(t)
        t.send_line("this is not json")
        obj = read_reply(t)
        assert "error" in obj, f"expected error reply, got {obj}"

    @scenario("missing fields get an error reply with the id echoed")
    def _(t):
        shake(t)
        t.send_line(json.dumps({"id": "x7"}))
        obj = read_reply(t)
        assert "error" in obj, f"expected error reply, got {obj}"
        assert obj.get("id") == "x7", f"error reply lost the id: {obj}"

    @scenario("unknown request fields are ignored")
    def _(t):
        shake(t)
        t.send_line(json.dumps({"id": "y", "query": "q", "candidate": "c", "extra": [1, 2]}))
        obj = read_reply(t)
        assert obj.get("id") == "y" and "score" in obj, f"bad reply: {obj}"

    @scenario("server still answers after an error reply")
    def _(t):
        shake(t)
        t.send_line("garbage")
        read_reply(t)
        t.send_line(json.dumps({"id": "z", "query": "q", "candidate": "c"}))
        obj = read_reply(t)
        assert obj.get("id") == "z" and "score" in obj, f"bad reply: {obj}"

    return failures
