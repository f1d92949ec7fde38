"""Client for an externally served regressor speaking newline-delimited JSON.

One request, one response, strictly in order per connection. The endpoint is
either a command line (the child is spawned and spoken to over stdin/stdout)
or host:port (TCP). A served model may announce itself with an initial
{"hello": {"model": ..., "version": ...}} line; the client records it as the
backend version whenever it appears.

NaN/Inf anywhere in a response is a protocol violation. Timeouts are retried
once with a fresh request id; malformed responses fail fast so benchmark runs
never silently mix degraded results.
"""
from __future__ import annotations

import json
import queue
import re
import shlex
import socket
import subprocess
import threading

import numpy as np

from ..rollout import BackendPrediction
from . import (
    BackendCapabilities,
    BackendTimeout,
    BackendUnavailable,
    MalformedResponse,
    RegressorBackend,
    RemoteModelError,
)

_HOST_PORT = re.compile(r"^(?P<host>[A-Za-z0-9_.-]+):(?P<port>\d+)$")


def _reject_constant(text: str):
    raise ValueError(f"non-finite JSON constant {text!r}")


class _LineChannel:
    """A line-oriented duplex channel with a background reader thread."""

    def __init__(self):
        self._queue: queue.Queue[str | None] = queue.Queue()

    def _start_reader(self, stream):
        def pump():
            try:
                for line in stream:
                    self._queue.put(line)
            except (OSError, ValueError):
                pass
            self._queue.put(None)

        thread = threading.Thread(target=pump, daemon=True)
        thread.start()

    def read_line(self, timeout: float) -> str:
        try:
            line = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise BackendTimeout(f"no response within {timeout:.0f}s") from None
        if line is None:
            raise BackendUnavailable("endpoint closed the connection")
        return line

    def send_line(self, text: str):
        raise NotImplementedError

    def close(self):
        raise NotImplementedError


class _ProcessChannel(_LineChannel):
    def __init__(self, command: str):
        super().__init__()
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot start {command!r}: {exc}") from exc
        self._start_reader(self._proc.stdout)

    def send_line(self, text: str):
        if self._proc.poll() is not None:
            raise BackendUnavailable("endpoint process has exited")
        try:
            self._proc.stdin.write(text + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendUnavailable(f"endpoint pipe broken: {exc}") from exc

    def close(self):
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()


class _SocketChannel(_LineChannel):
    def __init__(self, host: str, port: int):
        super().__init__()
        try:
            self._sock = socket.create_connection((host, port), timeout=10)
        except OSError as exc:
            raise BackendUnavailable(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.settimeout(None)
        self._start_reader(self._sock.makefile("r", encoding="utf-8"))

    def send_line(self, text: str):
        try:
            self._sock.sendall((text + "\n").encode("utf-8"))
        except OSError as exc:
            raise BackendUnavailable(f"socket send failed: {exc}") from exc

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass


class ExternalBackend(RegressorBackend):
    """Bridge a served tabular regressor behind the RegressorBackend contract."""

    capabilities = BackendCapabilities(deterministic_given_seed=False)

    def __init__(self, endpoint: str, timeout: float = 300.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self.version = "unknown"
        self._channel: _LineChannel | None = None
        self._counter = 0
        self._abandoned: set[str] = set()

    def _connect(self) -> _LineChannel:
        if self._channel is None:
            match = _HOST_PORT.match(self.endpoint)
            if match:
                self._channel = _SocketChannel(match["host"], int(match["port"]))
            else:
                self._channel = _ProcessChannel(self.endpoint)
        return self._channel

    def close(self):
        if self._channel is not None:
            self._channel.close()
            self._channel = None

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def _next_id(self) -> str:
        self._counter += 1
        return f"req-{self._counter}"

    def _await_response(self, request_id: str) -> dict:
        channel = self._connect()
        while True:
            line = channel.read_line(self.timeout)
            if not line.strip():
                continue
            try:
                obj = json.loads(line, parse_constant=_reject_constant)
            except ValueError as exc:
                raise MalformedResponse(f"unparseable response line: {exc}") from exc
            if not isinstance(obj, dict):
                raise MalformedResponse("response is not a JSON object")
            if "hello" in obj:
                hello = obj["hello"]
                if isinstance(hello, dict):
                    model = hello.get("model", "?")
                    version = hello.get("version", "?")
                    self.version = f"{model}/{version}"
                continue
            rid = obj.get("id")
            if rid in self._abandoned:
                continue  # stale response from a timed-out request
            if rid != request_id:
                raise MalformedResponse(f"response id {rid!r} does not match request {request_id!r}")
            return obj

    def _fit_predict(self, train_X, train_y, test_X, *, categorical_columns, quantile_levels, seed):
        obj = None
        for attempt in (0, 1):
            request_id = self._next_id()
            payload = {
                "id": request_id,
                "op": "fit_predict",
                "train": {
                    "X": train_X.tolist(),
                    "y": train_y.tolist(),
                    "categorical_cols": sorted(categorical_columns),
                },
                "test": {"X": test_X.tolist()},
                "quantiles": list(quantile_levels),
                "seed": int(seed),
            }
            self._connect().send_line(json.dumps(payload, allow_nan=False))
            try:
                obj = self._await_response(request_id)
                break
            except BackendTimeout:
                self._abandoned.add(request_id)
                if attempt == 1:
                    raise
        if "error" in obj:
            raise RemoteModelError(str(obj["error"]))
        return self._validate(obj, n_rows=len(test_X), n_levels=len(quantile_levels))

    @staticmethod
    def _validate(obj: dict, n_rows: int, n_levels: int) -> BackendPrediction:
        mean = obj.get("mean")
        quants = obj.get("quantiles")
        if not isinstance(mean, list) or len(mean) != n_rows:
            got = len(mean) if isinstance(mean, list) else type(mean).__name__
            raise MalformedResponse(f"expected mean of length {n_rows}, got {got}")
        if not isinstance(quants, list) or len(quants) != n_levels:
            got = len(quants) if isinstance(quants, list) else type(quants).__name__
            raise MalformedResponse(f"expected {n_levels} quantile arrays, got {got}")
        for level_values in quants:
            if not isinstance(level_values, list) or len(level_values) != n_rows:
                raise MalformedResponse(f"each quantile array must have length {n_rows}")
        mean_arr = np.asarray(mean, dtype=np.float64)
        quant_arr = np.asarray(quants, dtype=np.float64)
        if not (np.isfinite(mean_arr).all() and np.isfinite(quant_arr).all()):
            raise MalformedResponse("response contains non-finite values")
        return BackendPrediction(mean=mean_arr, quantiles=quant_arr)
