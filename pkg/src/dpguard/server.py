"""Minimal HTTP proxy exposing the defense as a private prediction interface.

Routes:
    POST /defend              defend one record (JSON body)
    GET  /budget/<digest>     remaining query budget for a fingerprint
    GET  /healthz             liveness probe

Every response passes through the mechanism; there is no bypass route.
Budget enforcement is mandatory here (429 once a record's budget is spent).
Raw input scores never appear in logs or error bodies.
"""

from __future__ import annotations

import itertools
import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import BudgetExhausted, InvalidVector
from .records import parse_jsonl_request, response_record
from .service import DefenseService

logger = logging.getLogger(__name__)


class _DefenseHandler(BaseHTTPRequestHandler):
    service: DefenseService
    request_counter: "itertools.count[int]"

    protocol_version = "HTTP/1.1"

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib signature
        # Request lines only (method + path); bodies are never logged.
        logger.debug("%s - %s", self.address_string(), format % args)

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_text(self, status: int, text: str) -> None:
        body = text.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path == "/healthz":
            self._send_text(200, "ok")
            return
        if self.path.startswith("/budget/"):
            digest = self.path[len("/budget/") :]
            ledger = self.service.ledger
            if not digest:
                self._send_json(400, {"error": "missing_fingerprint"})
            elif ledger is None:
                # Budget is configured but the ledger has not seen a record yet.
                self._send_json(404, {"error": "unknown_fingerprint"})
            else:
                self._send_json(
                    200, {"fingerprint": digest, "budget_remaining": ledger.remaining(digest)}
                )
            return
        self._send_json(404, {"error": "not_found"})

    def do_POST(self) -> None:
        if self.path != "/defend":
            self._send_json(404, {"error": "not_found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            request = parse_jsonl_request(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            self._send_json(400, {"error": "malformed_request"})
            return
        try:
            response = self.service.defend_request(request, next(self.request_counter))
        except InvalidVector:
            self._send_json(400, {"error": "invalid_vector"})
        except BudgetExhausted:
            self._send_json(429, {"error": "budget_exhausted", "budget_remaining": 0})
        except Exception as exc:  # never leak request content through errors
            logger.error("internal error handling /defend: %s", type(exc).__name__)
            self._send_json(500, {"error": "internal"})
        else:
            self._send_json(200, response_record(request, response))


def create_server(
    service: DefenseService, host: str = "127.0.0.1", port: int = 0
) -> ThreadingHTTPServer:
    """Build (but do not start) the threaded proxy; port 0 picks a free port."""

    class Handler(_DefenseHandler):
        pass

    Handler.service = service
    Handler.request_counter = itertools.count()
    return ThreadingHTTPServer((host, port), Handler)


def serve_forever(service: DefenseService, host: str, port: int) -> None:
    """Run the proxy until interrupted."""
    server = create_server(service, host, port)
    actual_host, actual_port = server.server_address[:2]
    logger.info("listening on %s:%s", actual_host, actual_port)
    print(f"listening on {actual_host}:{actual_port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
