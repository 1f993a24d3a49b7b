"""Shared fixtures: tiny scenes and a local stub chat-completions endpoint."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from affnav import scene as scene_mod


@pytest.fixture
def empty_scene():
    """8 m x 8 m open floor with border walls."""
    n = 80
    grid = np.zeros((n, n), dtype=np.uint8)
    grid[0, :] = grid[-1, :] = grid[:, 0] = grid[:, -1] = 1
    return scene_mod.SceneSpec(id="empty", grid=grid)


@pytest.fixture
def boxed_scene():
    """Open floor with one 1 m x 1 m box in the middle."""
    n = 80
    grid = np.zeros((n, n), dtype=np.uint8)
    grid[0, :] = grid[-1, :] = grid[:, 0] = grid[:, -1] = 1
    grid[35:45, 35:45] = 1
    return scene_mod.SceneSpec(id="boxed", grid=grid)


class StubEndpoint:
    """In-process chat-completions stub.

    `responder(texts, n_images)` is called per request with the text parts and
    image count of the user message; it returns either a reply string or an
    (http_status, body_dict) tuple. Requests are recorded on `.requests`.
    """

    def __init__(self, responder):
        self.responder = responder
        self.requests: list[dict] = []
        self._lock = threading.Lock()

        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                content = body["messages"][0]["content"]
                texts = [p["text"] for p in content if p.get("type") == "text"]
                n_images = sum(1 for p in content if p.get("type") == "image_url")
                with stub._lock:
                    stub.requests.append({"texts": texts, "n_images": n_images})
                result = stub.responder(texts, n_images)
                if isinstance(result, tuple):
                    status, payload = result
                else:
                    status, payload = 200, {
                        "choices": [{"message": {"content": result}}]
                    }
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):  # silence test output
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1"

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_endpoint_factory():
    stubs = []

    def make(responder) -> StubEndpoint:
        stub = StubEndpoint(responder)
        stubs.append(stub)
        return stub

    yield make
    for s in stubs:
        s.close()
