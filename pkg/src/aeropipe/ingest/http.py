"""HTTP front end for :class:`IngestService` on the stdlib threading server."""

from __future__ import annotations

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .store import (
    BadRequest,
    IngestError,
    IngestService,
    NotFound,
    format_ts,
    parse_ts,
)

log = logging.getLogger(__name__)

_FEED = re.compile(r"^/channels/(\d+)/feeds\.(csv|json)$")
_PIN = re.compile(r"^/blynk/pin/([^/]+)$")


class IngestHandler(BaseHTTPRequestHandler):
    server_version = "aeropipe"
    service: IngestService  # set by make_server

    def log_message(self, fmt, *args):  # route access logs through logging
        log.debug("%s - %s", self.address_string(), fmt % args)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def _params(self, method: str) -> dict[str, str]:
        parts = urlsplit(self.path)
        params = {k: v[-1] for k, v in parse_qs(parts.query, keep_blank_values=True).items()}
        if method == "POST":
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length).decode("utf-8") if length else ""
            ctype = self.headers.get("Content-Type", "")
            if "json" in ctype and body:
                params.update({k: str(v) for k, v in json.loads(body).items()})
            elif body:
                params.update({k: v[-1] for k, v in parse_qs(body, keep_blank_values=True).items()})
        return params

    def _dispatch(self, method: str) -> None:
        path = urlsplit(self.path).path.rstrip("/") or "/"
        try:
            params = self._params(method)
            if path == "/update":
                self._update(params)
                return
            m = _FEED.match(path)
            if m and method == "GET":
                self._feed(int(m.group(1)), m.group(2), params)
                return
            m = _PIN.match(path)
            if m:
                self._pin(m.group(1), method, params)
                return
            raise NotFound(f"no route for {method} {path}")
        except IngestError as exc:
            body = "0" if path == "/update" else str(exc)
            self._send(exc.status, body)
        except (ValueError, json.JSONDecodeError) as exc:
            self._send(400, "0" if path == "/update" else str(exc))

    def _update(self, params: dict[str, str]) -> None:
        received = parse_ts(params["created_at"]) if params.get("created_at") else None
        entry_id = self.service.handle_update(
            params.get("api_key") or self.headers.get("X-THINGSPEAKAPIKEY"),
            params.get("field1"),
            params.get("field2"),
            received,
        )
        self._send(200, str(entry_id))

    def _feed(self, channel_id: int, kind: str, params: dict[str, str]) -> None:
        if kind == "csv":
            start = parse_ts(params["start"]) if params.get("start") else None
            end = parse_ts(params["end"]) if params.get("end") else None
            data = self.service.export_csv(channel_id, start, end)
            self._send(200, data, "text/csv; charset=utf-8")
        else:
            try:
                results = int(params.get("results", "100"))
            except ValueError:
                raise BadRequest("results must be an integer") from None
            self._send(200, self.service.read_feed_json(channel_id, results), "application/json")

    def _pin(self, pin: str, method: str, params: dict[str, str]) -> None:
        pins = self.service.pins
        if method == "POST" or "value" in params:
            pins.write(pin, params.get("value", ""))
        value, at = pins.read(pin)
        body = json.dumps({"pin": pin, "value": value, "updated_at": format_ts(at)})
        self._send(200, body, "application/json")

    def _send(self, status: int, body: str | bytes, ctype: str = "text/plain; charset=utf-8") -> None:
        data = body.encode("utf-8") if isinstance(body, str) else body
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def make_server(service: IngestService, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    handler = type("BoundIngestHandler", (IngestHandler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


class BackgroundServer:
    """Context manager running the service on a daemon thread (port 0 picks a free port)."""

    def __init__(self, service: IngestService, host: str = "127.0.0.1", port: int = 0):
        self.service = service
        self.server = make_server(service, host, port)
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "BackgroundServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.server.shutdown()
        self.server.server_close()
        self._thread.join(timeout=5)
