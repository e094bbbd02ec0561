"""Read-only HTTP status endpoint.

GET /healthz answers 200 while the reconcile loop is live; GET /status
returns the latest StatusReport as one JSON object. The report never
contains credential material -- it is built from an atomically swapped
snapshot, not from the live config.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .clock import to_rfc3339
from .reconciler import Decision, ReconcileRecord

logger = logging.getLogger(__name__)


@dataclass
class StatusReport:
    last_poll_time: float | None = None
    last_decision: Decision | None = None
    observed_replicas: int | None = None
    consecutive_github_errors: int = 0
    consecutive_kube_errors: int = 0
    keepalive_next_due: float | None = None

    def as_dict(self) -> dict:
        return {
            "last_poll_time": to_rfc3339(self.last_poll_time) if self.last_poll_time is not None else None,
            "last_decision": {
                "target_replicas": self.last_decision.target_replicas,
                "reason": self.last_decision.reason.value,
            }
            if self.last_decision
            else None,
            "observed_replicas": self.observed_replicas,
            "consecutive_github_errors": self.consecutive_github_errors,
            "consecutive_kube_errors": self.consecutive_kube_errors,
            "keepalive_next_due": to_rfc3339(self.keepalive_next_due)
            if self.keepalive_next_due is not None
            else None,
        }

    @classmethod
    def from_record(
        cls,
        record: ReconcileRecord | None,
        github_errors: int,
        kube_errors: int,
        keepalive_next_due: float | None,
    ) -> "StatusReport":
        if record is None:
            return cls(
                consecutive_github_errors=github_errors,
                consecutive_kube_errors=kube_errors,
                keepalive_next_due=keepalive_next_due,
            )
        return cls(
            last_poll_time=record.tick,
            last_decision=Decision(record.desired, record.reason),
            observed_replicas=record.observed_replicas,
            consecutive_github_errors=github_errors,
            consecutive_kube_errors=kube_errors,
            keepalive_next_due=keepalive_next_due,
        )


def parse_listen_address(addr: str) -> tuple[str, int]:
    """'host:port' or ':port'; empty host binds every interface."""
    host, _, port = addr.rpartition(":")
    return host, int(port)


class StatusServer:
    """Background HTTP server publishing the swapped snapshot."""

    def __init__(self, addr: str, alive: threading.Event):
        host, port = parse_listen_address(addr)
        self._alive = alive
        self._snapshot: StatusReport = StatusReport()
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def do_GET(self):  # noqa: N802 (http.server API)
                if self.path == "/healthz":
                    body = b"ok" if server._alive.is_set() else b"stopped"
                    self._reply(200 if server._alive.is_set() else 503, body, "text/plain")
                elif self.path == "/status":
                    body = json.dumps(server._snapshot.as_dict()).encode()
                    self._reply(200, body, "application/json")
                else:
                    self._reply(404, b"not found", "text/plain")

            def _reply(self, code: int, body: bytes, content_type: str):
                self.send_response(code)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, fmt, *args):
                logger.debug("status server: " + fmt, *args)

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True, name="status-server")

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[:2]

    def start(self) -> None:
        self._thread.start()

    def publish(self, snapshot: StatusReport) -> None:
        self._snapshot = snapshot  # attribute swap is atomic; readers never block the loop

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
