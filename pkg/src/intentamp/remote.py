"""Remote logit protocol: length-prefixed UTF-8 JSON frames over a stream
socket, plus a mock server for protocol tests.

Handshake: client sends {"op":"hello"}; server replies
{"vocab_size":N,"eos_id":E,"mask_id":M}. Queries send
{"op":"logits","prompt":[ids],"prefix":[ids]} and receive
{"logits":[N floats]}. Error replies look like {"error":code,"detail":...}.
The length prefix is a 4-byte big-endian unsigned integer.
"""

from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading

import numpy as np

from .backends import LogitBackend, ScriptedBackend, ScriptedScenario
from .errors import BackendUnavailable, ProtocolViolation, QueryTimeout
from .vocab import Vocabulary

_LEN = struct.Struct(">I")
MAX_FRAME = 64 * 1024 * 1024


def send_frame(sock: socket.socket, obj) -> None:
    payload = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    sock.sendall(_LEN.pack(len(payload)) + payload)


def _recv_exact(sock: socket.socket, size: int) -> bytes:
    buf = b""
    while len(buf) < size:
        chunk = sock.recv(size - len(buf))
        if not chunk:
            raise ConnectionError("peer closed the connection mid-frame")
        buf += chunk
    return buf


def recv_frame(sock: socket.socket):
    header = _recv_exact(sock, _LEN.size)
    (size,) = _LEN.unpack(header)
    if size > MAX_FRAME:
        raise ProtocolViolation(f"frame of {size} bytes exceeds the {MAX_FRAME} limit")
    payload = _recv_exact(sock, size)
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolViolation(f"malformed JSON frame: {exc}") from exc


class RemoteBackend(LogitBackend):
    """Client half of the protocol; one serialized connection per backend."""

    concurrent_safe = False  # a single socket cannot interleave queries

    def __init__(self, host: str, port: int, timeout: float = 10.0,
                 vocabulary: Vocabulary | None = None):
        self.address = (host, port)
        self.timeout = timeout
        try:
            self._sock = socket.create_connection(self.address, timeout=timeout)
        except OSError as exc:
            raise BackendUnavailable(f"cannot reach {host}:{port}: {exc}") from exc
        hello = self._round_trip({"op": "hello"})
        for key in ("vocab_size", "eos_id", "mask_id"):
            if key not in hello:
                raise ProtocolViolation(f"handshake reply missing {key!r}: {hello}")
        self._remote_vocab_size = int(hello["vocab_size"])
        if vocabulary is not None:
            if len(vocabulary) != self._remote_vocab_size:
                raise ProtocolViolation(
                    f"supplied vocabulary size {len(vocabulary)} does not match "
                    f"advertised {self._remote_vocab_size}"
                )
            self.vocabulary = vocabulary
        else:
            # Surfaces are unknowable over the wire; synthesize placeholders.
            surfaces = [f"<tok{i}>" for i in range(self._remote_vocab_size)]
            surfaces[int(hello["mask_id"])] = "<mask>"
            surfaces[int(hello["eos_id"])] = "<eos>"
            self.vocabulary = Vocabulary(
                surfaces, mask_id=int(hello["mask_id"]), eos_id=int(hello["eos_id"])
            )

    def _round_trip(self, message):
        try:
            send_frame(self._sock, message)
            reply = recv_frame(self._sock)
        except socket.timeout as exc:
            raise QueryTimeout(f"no reply from {self.address} within {self.timeout}s") from exc
        except (ConnectionError, OSError) as exc:
            raise BackendUnavailable(f"transport failure with {self.address}: {exc}") from exc
        if isinstance(reply, dict) and "error" in reply:
            raise ProtocolViolation(
                f"server error {reply['error']!r}: {reply.get('detail', '')}"
            )
        return reply

    def _query(self, prompt, prefix) -> np.ndarray:
        reply = self._round_trip(
            {"op": "logits", "prompt": list(prompt), "prefix": list(prefix)}
        )
        logits = reply.get("logits") if isinstance(reply, dict) else None
        if not isinstance(logits, list):
            raise ProtocolViolation(f"reply carries no logits list: {reply}")
        if len(logits) != self._remote_vocab_size:
            raise ProtocolViolation(
                f"reply vector length {len(logits)} != advertised vocab size "
                f"{self._remote_vocab_size}"
            )
        vec = np.asarray(logits, dtype=np.float64)
        if not np.all(np.isfinite(vec)):
            raise ProtocolViolation("reply vector contains non-finite values")
        return vec

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def remote_query(host: str, port: int, prompt, prefix, timeout: float = 10.0) -> np.ndarray:
    """One-shot convenience: handshake, single query, close."""
    with RemoteBackend(host, port, timeout=timeout) as backend:
        return backend.query_logits(prompt, prefix)


class _MockHandler(socketserver.BaseRequestHandler):
    def handle(self):
        backend: LogitBackend = self.server.backend  # type: ignore[attr-defined]
        while True:
            try:
                message = recv_frame(self.request)
            except ProtocolViolation as exc:
                send_frame(self.request, {"error": "protocol", "detail": str(exc)})
                return
            except (ConnectionError, OSError):
                return
            try:
                reply = self._dispatch(backend, message)
            except Exception as exc:  # surfaced to the client as an error frame
                reply = {"error": "backend", "detail": str(exc)}
            try:
                send_frame(self.request, reply)
            except OSError:
                return

    @staticmethod
    def _dispatch(backend, message):
        if not isinstance(message, dict) or "op" not in message:
            return {"error": "protocol", "detail": "frame is not an op object"}
        if message["op"] == "hello":
            return {
                "vocab_size": backend.vocab_size,
                "eos_id": backend.eos_id,
                "mask_id": backend.mask_id,
            }
        if message["op"] == "logits":
            vec = backend.query_logits(message.get("prompt", []), message.get("prefix", []))
            return {"logits": vec.tolist()}
        return {"error": "protocol", "detail": f"unknown op {message['op']!r}"}


class MockLogitServer:
    """Serves any in-repo backend over the wire protocol, for tests and the
    serve-mock CLI subcommand."""

    def __init__(self, backend: LogitBackend, host: str = "127.0.0.1", port: int = 0):
        self._server = socketserver.ThreadingTCPServer((host, port), _MockHandler)
        self._server.daemon_threads = True
        self._server.allow_reuse_address = True
        self._server.backend = backend  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> "MockLogitServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc_info):
        self.stop()


def serve_scenario(path, host: str = "127.0.0.1", port: int = 0) -> MockLogitServer:
    backend = ScriptedBackend(ScriptedScenario.load(path))
    return MockLogitServer(backend, host, port)
