"""Request loop: one JSON object per line in, one per line out.

Request:  {"id", "op": "fit_predict", "train": {"X", "y", "categorical_cols"},
           "test": {"X"}, "quantiles", "seed"}
Response: {"id", "mean": [...], "quantiles": [[...] per level]} or
          {"id", "error": "..."}; NaN/Inf are never serialized. A handshake
          line {"hello": {"model", "version"}} opens every connection.
Requests are handled strictly in arrival order per connection; any model
exception becomes an error response, never a dropped line.
"""
from __future__ import annotations

import json
import logging
import socketserver
import sys
from dataclasses import dataclass

import numpy as np

from .models import build_model

log = logging.getLogger("pfn_bridge")


@dataclass(frozen=True)
class BridgeConfig:
    listen: str = "stdio"  # "stdio" or "host:port"
    model_name: str = "auto"
    device: str = "cpu"
    max_rows: int = 10_000

    def __post_init__(self):
        if self.max_rows <= 0:
            raise ValueError("max_rows must be positive")


class RequestHandler:
    def __init__(self, config: BridgeConfig):
        self.config = config
        self.model = build_model(config.model_name, device=config.device)

    def hello_line(self) -> str:
        return json.dumps(
            {"hello": {"model": self.model.name, "version": self.model.version}}
        )

    def handle_line(self, line: str) -> str:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return json.dumps({"id": "unknown", "error": f"malformed JSON: {exc}"})
        if not isinstance(request, dict):
            return json.dumps({"id": "unknown", "error": "request is not a JSON object"})
        request_id = request.get("id")
        if not isinstance(request_id, str):
            return json.dumps({"id": "unknown", "error": "request has no string id"})
        try:
            return self._respond(request_id, request)
        except Exception as exc:  # noqa: BLE001 - crash isolation
            log.exception("request %s failed", request_id)
            return json.dumps({"id": request_id, "error": f"{type(exc).__name__}: {exc}"})

    def _respond(self, request_id: str, request: dict) -> str:
        if request.get("op") != "fit_predict":
            return json.dumps({"id": request_id, "error": f"unknown op {request.get('op')!r}"})
        train = request.get("train") or {}
        test = request.get("test") or {}
        train_X = np.asarray(train.get("X", []), dtype=float)
        train_y = np.asarray(train.get("y", []), dtype=float)
        test_X = np.asarray(test.get("X", []), dtype=float)
        levels = [float(q) for q in request.get("quantiles", [])]
        seed = int(request.get("seed", 0))
        if train_X.ndim != 2 or test_X.ndim != 2 or train_X.shape[0] != train_y.shape[0]:
            return json.dumps({"id": request_id, "error": "bad train/test shapes"})
        if train_X.shape[0] > self.config.max_rows:
            return json.dumps(
                {"id": request_id,
                 "error": f"{train_X.shape[0]} rows exceed max_rows {self.config.max_rows}"}
            )
        if not (np.isfinite(train_X).all() and np.isfinite(train_y).all() and np.isfinite(test_X).all()):
            return json.dumps({"id": request_id, "error": "non-finite values in request"})
        mean, quants = self.model.fit_predict(
            train_X, train_y, test_X,
            categorical_cols=train.get("categorical_cols", []),
            quantile_levels=levels,
            seed=seed,
        )
        mean = np.asarray(mean, dtype=float)
        quants = np.asarray(quants, dtype=float)
        if not (np.isfinite(mean).all() and np.isfinite(quants).all()):
            return json.dumps({"id": request_id, "error": "model produced non-finite values"})
        return json.dumps(
            {"id": request_id, "mean": mean.tolist(), "quantiles": quants.tolist()},
            allow_nan=False,
        )


def serve_stdio(handler: RequestHandler):
    out = sys.stdout
    out.write(handler.hello_line() + "\n")
    out.flush()
    for line in sys.stdin:
        if not line.strip():
            continue
        out.write(handler.handle_line(line) + "\n")
        out.flush()


def serve_tcp(handler: RequestHandler, host: str, port: int):
    class Connection(socketserver.StreamRequestHandler):
        def handle(self):
            self.wfile.write((handler.hello_line() + "\n").encode("utf-8"))
            for raw in self.rfile:
                line = raw.decode("utf-8")
                if not line.strip():
                    continue
                self.wfile.write((handler.handle_line(line) + "\n").encode("utf-8"))

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server((host, port), Connection) as server:
        log.info("listening on %s:%d", host, port)
        server.serve_forever()


def serve(config: BridgeConfig):
    """Run until terminated."""
    handler = RequestHandler(config)
    if config.listen == "stdio":
        serve_stdio(handler)
    else:
        host, _, port = config.listen.rpartition(":")
        serve_tcp(handler, host or "127.0.0.1", int(port))
