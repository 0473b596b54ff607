"""HTTP front door: a thin JSON mapping onto the contract methods.

Endpoints: ``POST /invoke`` for writes (synchronous: the response names
the committed transaction and block), ``POST /query`` for reads, and
``POST /admin/<action>`` for policy maintenance, which only the admin
identity may call. The gateway adds no semantics of its own; a request
produces the same decision as the equivalent direct library call. Every
response echoes the ``x-req-id`` correlation header.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional, Tuple

from .contracts import READ_METHODS, WRITE_METHODS
from .errors import (
    AccessDeniedError,
    AlreadyExistsError,
    AuthError,
    DuplicatePolicyError,
    DuplicateTxIdError,
    NotFoundError,
    ScfError,
    UnknownOpError,
)
from .identity import SignedEnvelope, verify_envelope
from .node import Node

MAX_BODY_BYTES = 1 << 20
REQ_ID_HEADER = "x-req-id"

ADMIN_ACTIONS = {
    "add-policy": "AddPolicy",
    "update-policy": "UpdatePolicy",
    "delete-policy": "DeletePolicy",
    "query-policy": "QueryPolicy",
}
ADMIN_WRITE_ACTIONS = ("add-policy", "update-policy", "delete-policy")
# Writes a non-admin client may submit directly.
PUBLIC_WRITE_METHODS = (
    "CreateUser",
    "RecordMemo",
    "AddFiProject",
    "UpdateFiProject",
    "DeleteFiProject",
)


def status_for_error(exc: Exception) -> int:
    if isinstance(exc, (AlreadyExistsError, DuplicatePolicyError, DuplicateTxIdError)):
        return 409
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, AccessDeniedError):
        return 403
    if isinstance(exc, AuthError):
        return 401
    if isinstance(exc, ScfError):
        return 400
    return 500


def status_for_code(code: Optional[str]) -> int:
    mapping = {
        "already-exists": 409,
        "duplicate-policy": 409,
        "duplicate-txid": 409,
        "not-found": 404,
        "access-denied": 403,
        "bad-signature": 401,
        "unknown-user": 401,
        "expired-certificate": 401,
    }
    return mapping.get(code or "", 400)


class Gateway:
    """Owns the node, the HTTP server, and the background ordering loop."""

    def __init__(self, node: Node, host: Optional[str] = None, port: Optional[int] = None):
        self.node = node
        host = host if host is not None else node.config.listen_host
        port = port if port is not None else node.config.listen_port
        handler = _make_handler(self)
        self.server = ThreadingHTTPServer((host, port), handler)
        self._orderer_stop = threading.Event()
        self._orderer_thread = threading.Thread(target=self._ordering_loop, daemon=True)
        self._server_thread: Optional[threading.Thread] = None

    @property
    def address(self) -> Tuple[str, int]:
        return self.server.server_address[0], self.server.server_address[1]

    def _ordering_loop(self) -> None:
        while not self._orderer_stop.is_set():
            self.node.tick()
            self._orderer_stop.wait(0.005)

    def start(self) -> None:
        self._orderer_thread.start()
        self._server_thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._server_thread.start()

    def stop(self) -> None:
        self._orderer_stop.set()
        self.server.shutdown()
        self.server.server_close()

    def serve_forever(self) -> None:
        self._orderer_thread.start()
        self.server.serve_forever()

    # --- request handling ------------------------------------------------------

    def handle_invoke(self, body: dict) -> Tuple[int, dict]:
        method = body.get("method")
        if method not in PUBLIC_WRITE_METHODS:
            if method in WRITE_METHODS or method in READ_METHODS:
                return 400, {"error": f"{method} is not an /invoke method"}
            return 400, {"error": f"unknown method {method!r}"}
        return self._submit_and_wait(method, body)

    def _submit_and_wait(self, method: str, body: dict) -> Tuple[int, dict]:
        args = body.get("args")
        if not isinstance(args, dict):
            return 400, {"error": "args must be an object"}
        try:
            envelope = SignedEnvelope.from_json(body["envelope"])
        except (KeyError, ValueError, TypeError) as exc:
            return 400, {"error": f"malformed envelope: {exc}"}
        try:
            tx_id = self.node.submit(method, args, envelope)
        except ScfError as exc:
            return status_for_error(exc), {"error": str(exc), "code": exc.code}
        outcome = self.node.wait_for(tx_id)
        if outcome is None:
            return 500, {"error": "commit timed out", "txId": tx_id}
        if not outcome.valid:
            return status_for_code(outcome.code), {
                "error": str(outcome.result),
                "code": outcome.code,
                "txId": tx_id,
                "blockHeight": outcome.height,
            }
        return 200, {"txId": tx_id, "blockHeight": outcome.height, "result": outcome.result}

    def handle_query(self, body: dict) -> Tuple[int, dict]:
        method = body.get("method")
        if method not in READ_METHODS or method == "QueryPolicy":
            return 400, {"error": f"{method!r} is not a /query method"}
        args = body.get("args")
        if not isinstance(args, dict):
            return 400, {"error": "args must be an object"}
        try:
            envelope = SignedEnvelope.from_json(body["envelope"])
        except (KeyError, ValueError, TypeError) as exc:
            return 400, {"error": f"malformed envelope: {exc}"}
        try:
            outcome = self.node.read(method, args, envelope)
        except ScfError as exc:
            return status_for_error(exc), {"error": str(exc), "code": exc.code}
        return 200, {"result": outcome.result}

    def handle_admin(self, action: str, body: dict) -> Tuple[int, dict]:
        method = ADMIN_ACTIONS.get(action)
        if method is None:
            return 400, {"error": f"unknown admin action {action!r}"}
        try:
            envelope = SignedEnvelope.from_json(body["envelope"])
        except (KeyError, ValueError, TypeError) as exc:
            return 400, {"error": f"malformed envelope: {exc}"}
        if envelope.signer_user_number != self.node.admin_user_number:
            return 401, {"error": "admin endpoints require the admin identity"}
        if not verify_envelope(envelope, self.node.admin_cert, self.node.clock.now_s):
            return 401, {"error": "admin envelope does not verify"}
        args = body.get("args")
        if not isinstance(args, dict):
            return 400, {"error": "args must be an object"}
        if action in ADMIN_WRITE_ACTIONS:
            return self._submit_and_wait(method, body)
        try:
            outcome = self.node.read(method, args, envelope)
        except ScfError as exc:
            return status_for_error(exc), {"error": str(exc), "code": exc.code}
        return 200, {"result": outcome.result}


def _make_handler(gateway: Gateway):
    class Handler(BaseHTTPRequestHandler):
        server_version = "scfledger"

        def log_message(self, fmt, *args):  # quiet test output
            pass

        def _respond(self, status: int, payload: dict, req_id: Optional[str]) -> None:
            if req_id:
                payload = dict(payload)
                payload["reqId"] = req_id
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("content-type", "application/json")
            if req_id:
                self.send_header(REQ_ID_HEADER, req_id)
            self.send_header("content-length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_POST(self) -> None:
            req_id = self.headers.get(REQ_ID_HEADER)
            length = int(self.headers.get("content-length") or 0)
            if length > MAX_BODY_BYTES:
                self._respond(400, {"error": "body exceeds 1 MiB"}, req_id)
                return
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw.decode("utf-8"))
                if not isinstance(body, dict):
                    raise ValueError("body must be a JSON object")
            except (ValueError, UnicodeDecodeError) as exc:
                self._respond(400, {"error": f"malformed JSON body: {exc}"}, req_id)
                return
            try:
                if self.path == "/invoke":
                    status, payload = gateway.handle_invoke(body)
                elif self.path == "/query":
                    status, payload = gateway.handle_query(body)
                elif self.path.startswith("/admin/"):
                    action = self.path[len("/admin/"):]
                    status, payload = gateway.handle_admin(action, body)
                else:
                    status, payload = 400, {"error": f"no such endpoint {self.path}"}
            except Exception as exc:  # never leak a stack trace to the wire
                status, payload = 500, {"error": f"internal error: {exc}"}
            self._respond(status, payload, req_id)

    return Handler
