import socket
import sys
import threading
from pathlib import Path

import numpy as np
import pytest

from rollcast.backends import (
    BackendTimeout,
    BackendUnavailable,
    MalformedResponse,
)
from rollcast.backends.external import ExternalBackend

STUB = Path(__file__).parent / "stub_backend.py"
LEVELS = tuple(np.round(np.arange(0.1, 1.0, 0.1), 1))


def stub_command(mode="zeros"):
    return f"{sys.executable} {STUB} {mode}"


def toy_tables():
    train_X = np.column_stack([np.arange(8.0), np.tile([0.0, 1.0], 4)])
    train_y = np.arange(8.0)
    test_X = train_X[:3]
    return train_X, train_y, test_X


def call(backend, levels=LEVELS):
    train_X, train_y, test_X = toy_tables()
    return backend.fit_predict(
        train_X, train_y, test_X,
        categorical_columns=frozenset({1}),
        quantile_levels=levels,
        seed=42,
    )


class TestSubprocessEndpoint:
    def test_zero_stub_roundtrip(self):
        backend = ExternalBackend(stub_command())
        try:
            pred = call(backend)
            np.testing.assert_array_equal(pred.mean, np.zeros(3))
            assert pred.quantiles.shape == (9, 3)
        finally:
            backend.close()

    def test_requested_levels_define_response_shape(self):
        backend = ExternalBackend(stub_command())
        try:
            pred = call(backend, levels=(0.25, 0.5, 0.75))
            assert pred.quantiles.shape == (3, 3)
        finally:
            backend.close()

    def test_handshake_version_recorded(self):
        backend = ExternalBackend(stub_command("hello-zeros"))
        try:
            call(backend)
            assert backend.version == "stub/9.9"
        finally:
            backend.close()

    def test_wrong_mean_length_is_malformed(self):
        backend = ExternalBackend(stub_command("short-mean"))
        try:
            with pytest.raises(MalformedResponse) as err:
                call(backend)
            assert "expected mean of length 3" in str(err.value)
        finally:
            backend.close()

    def test_nan_payload_is_malformed(self):
        backend = ExternalBackend(stub_command("nan"))
        try:
            with pytest.raises(MalformedResponse):
                call(backend)
        finally:
            backend.close()

    def test_mismatched_id_is_malformed(self):
        backend = ExternalBackend(stub_command("bad-id"))
        try:
            with pytest.raises(MalformedResponse):
                call(backend)
        finally:
            backend.close()

    def test_unparseable_line_is_malformed(self):
        backend = ExternalBackend(stub_command("garbage"))
        try:
            with pytest.raises(MalformedResponse):
                call(backend)
        finally:
            backend.close()

    def test_timeout_then_retry_then_raise(self):
        backend = ExternalBackend(stub_command("sleep"), timeout=0.3)
        try:
            with pytest.raises(BackendTimeout):
                call(backend)
        finally:
            backend.close()

    def test_missing_command_unavailable(self):
        backend = ExternalBackend("definitely-not-a-real-binary-xyz")
        with pytest.raises(BackendUnavailable):
            call(backend)

    def test_dead_process_unavailable(self):
        backend = ExternalBackend(f"{sys.executable} -c 'pass'")
        try:
            with pytest.raises(BackendUnavailable):
                call(backend)
        finally:
            backend.close()


def _tcp_zero_server(sock):
    conn, _ = sock.accept()
    with conn, conn.makefile("rw") as stream:
        import json

        for line in stream:
            req = json.loads(line)
            n = len(req["test"]["X"])
            resp = {
                "id": req["id"],
                "mean": [1.5] * n,
                "quantiles": [[1.5] * n for _ in req["quantiles"]],
            }
            stream.write(json.dumps(resp) + "\n")
            stream.flush()


class TestTcpEndpoint:
    def test_tcp_roundtrip(self):
        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        sock.listen(1)
        port = sock.getsockname()[1]
        thread = threading.Thread(target=_tcp_zero_server, args=(sock,), daemon=True)
        thread.start()
        backend = ExternalBackend(f"127.0.0.1:{port}")
        try:
            pred = call(backend)
            np.testing.assert_array_equal(pred.mean, np.full(3, 1.5))
        finally:
            backend.close()
            sock.close()

    def test_connection_refused_unavailable(self):
        backend = ExternalBackend("127.0.0.1:1")  # nothing listens on port 1
        with pytest.raises(BackendUnavailable):
            call(backend)
