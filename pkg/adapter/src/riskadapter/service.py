"""HTTP service exposing a scorer behind POST /predict.

Request: ``{"texts": [...]}`` with at least one string. Response:
``{"probabilities": [...]}``, same length and order. Malformed bodies get
400, batches over the configured limit get 413, unknown routes 404.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, HTTPServer, ThreadingHTTPServer

from riskadapter.scorers import AdapterError, ConstantScorer, LexiconScorer, TransformerScorer

DEFAULT_MAX_BATCH = 32


@dataclass
class AdapterConfig:
    model: str | None = None
    constant: float | None = None
    device: str = "cpu"
    max_batch: int = DEFAULT_MAX_BATCH
    host: str = "127.0.0.1"
    port: int = 8000
    workers: int = 1

    def __post_init__(self) -> None:
        if type(self.max_batch) is not int or self.max_batch < 1:
            raise AdapterError(f"max batch must be an integer >= 1, got {self.max_batch!r}")
        if type(self.workers) is not int or self.workers < 1:
            raise AdapterError(f"workers must be an integer >= 1, got {self.workers!r}")
        if (self.model is None) == (self.constant is None):
            raise AdapterError("exactly one of model and constant must be set")


def build_scorer(config: AdapterConfig):
    if config.constant is not None:
        return ConstantScorer(config.constant)
    if config.model.endswith(".json"):
        return LexiconScorer.from_file(config.model)
    return TransformerScorer(config.model, config.device)


class _Server(ThreadingHTTPServer):
    """Connections are cheap threads; ``slots`` bounds in-flight requests.

    The bound sits around request handling rather than connections so an
    idle kept-alive connection never starves other clients.
    """

    daemon_threads = True

    def __init__(self, address, handler, workers: int):
        super().__init__(address, handler)
        self.slots = threading.BoundedSemaphore(workers)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    # loopback round trips stall on Nagle + delayed ACK otherwise
    disable_nagle_algorithm = True
    # an idle kept-alive connection must not pin the serial server forever
    timeout = 10
    scorer = None
    max_batch = DEFAULT_MAX_BATCH

    def log_message(self, *args) -> None:
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        with self.server.slots:
            if self.path.rstrip("/") == "/predict":
                self._send_json(405, {"error": "use POST"})
            else:
                self._send_json(404, {"error": f"no such route: {self.path}"})

    def do_POST(self) -> None:
        with self.server.slots:
            self._handle_predict()

    def _handle_predict(self) -> None:
        if self.path.rstrip("/") != "/predict":
            self._send_json(404, {"error": f"no such route: {self.path}"})
            return
        texts = self._parse_texts()
        if texts is None:
            return
        if len(texts) > self.max_batch:
            self._send_json(413, {"error": f"batch of {len(texts)} exceeds limit {self.max_batch}"})
            return
        self._send_json(200, {"probabilities": self.scorer.score_batch(texts)})

    def _parse_texts(self) -> list[str] | None:
        length = self.headers.get("Content-Length")
        try:
            body = self.rfile.read(int(length))
        except (TypeError, ValueError):
            self._send_json(400, {"error": "missing or invalid content length"})
            return None
        try:
            data = json.loads(body)
        except json.JSONDecodeError:
            self._send_json(400, {"error": "request body is not valid JSON"})
            return None
        if not isinstance(data, dict) or "texts" not in data:
            self._send_json(400, {"error": "request must be an object with a texts field"})
            return None
        texts = data["texts"]
        if not isinstance(texts, list) or not texts:
            self._send_json(400, {"error": "texts must be a non-empty array"})
            return None
        if any(not isinstance(t, str) for t in texts):
            self._send_json(400, {"error": "texts must contain only strings"})
            return None
        return texts


def build_httpd(config: AdapterConfig, scorer=None) -> HTTPServer:
    """Bind the service; caller drives serve_forever. Scorer defaults from config."""
    if scorer is None:
        scorer = build_scorer(config)
    handler = type("Handler", (_Handler,), {"scorer": scorer, "max_batch": config.max_batch})
    return _Server((config.host, config.port), handler, config.workers)


def serve_predictions(config: AdapterConfig) -> None:
    """Load the scorer, bind, and serve until interrupted."""
    scorer = build_scorer(config)
    httpd = build_httpd(config, scorer)
    host, port = httpd.server_address[:2]
    print(f"serving {scorer.describe()} on http://{host}:{port}/predict", flush=True)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
