"""Scriptable in-process HTTP server speaking the stage wire protocol.

Tests enqueue per-call behaviors (error statuses, malformed bodies,
dropped connections); unscripted calls get well-formed default replies.
The server runs on a daemon thread and binds an ephemeral port.
"""

from __future__ import annotations

import json
import socket
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


def default_generate_reply(payload: dict) -> dict:
    return {"id": payload["id"], "text": "Answer: None"}


def default_label_reply(payload: dict) -> dict:
    text = payload["text"]
    tokens = []
    start = None
    for i, ch in enumerate(text):
        if ch.isspace():
            if start is not None:
                tokens.append({"start": start, "end": i, "label": 0})
                start = None
        elif start is None:
            start = i
    if start is not None:
        tokens.append({"start": start, "end": len(text), "label": 0})
    return {"id": payload["id"], "tokens": tokens}


class StubBackendServer:
    """Wire-protocol stub with a per-call behavior queue.

    A behavior is a dict: {"status": int, "body": obj} sends that reply,
    {"drop": True} closes the connection mid-request, {"raw": bytes}
    sends a non-JSON 200 body.  The queue is global across paths; when
    empty, defaults apply.
    """

    def __init__(self) -> None:
        self.script: deque[dict] = deque()
        self.requests: list[tuple[str, dict, dict]] = []
        self.lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt: str, *args) -> None:
                pass

            def do_POST(self) -> None:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
                with stub.lock:
                    stub.requests.append((self.path, payload, dict(self.headers)))
                    behavior = stub.script.popleft() if stub.script else None
                if behavior and behavior.get("drop"):
                    self.connection.close()
                    return
                if behavior and "raw" in behavior:
                    self.send_response(200)
                    self.send_header("Content-Type", "application/json")
                    self.end_headers()
                    self.wfile.write(behavior["raw"])
                    return
                if behavior:
                    body = json.dumps(behavior.get("body", {})).encode("utf-8")
                    self.send_response(behavior.get("status", 200))
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                    return
                if self.path == "/v1/generate":
                    reply = default_generate_reply(payload)
                elif self.path == "/v1/label_tokens":
                    reply = default_label_reply(payload)
                else:
                    body = json.dumps({"error": f"unknown path {self.path}"}).encode("utf-8")
                    self.send_response(404)
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                    return
                body = json.dumps(reply).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "StubBackendServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()

    def enqueue(self, *behaviors: dict) -> None:
        self.script.extend(behaviors)

    def paths_seen(self) -> list[str]:
        with self.lock:
            return [path for path, _, _ in self.requests]


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]
