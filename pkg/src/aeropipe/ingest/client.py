"""Delivery sinks for the device loop: over HTTP, or straight into an in-process service."""

from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request
from urllib.parse import urlencode

from ..core import SensorSample
from .store import IngestService, format_ts


class _Counting:
    def __init__(self) -> None:
        self.delivered = 0
        self.rejected = 0
        self.failed = 0
        self._lock = threading.Lock()

    def _tally(self, name: str) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + 1)


class HttpSink(_Counting):
    """Firmware-style client: one ``/update`` GET per tick, then V1/V2 pin writes.

    The sample timestamp travels as ``created_at`` so a virtual-clock device is
    rate-limited on its own timeline rather than the server's wall clock.
    """

    def __init__(self, base_url: str, api_key: str, timeout: float = 5.0, write_pins: bool = True):
        super().__init__()
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self.write_pins = write_pins

    def _get(self, path: str, params: dict[str, str]) -> str:
        url = f"{self.base_url}{path}?{urlencode(params)}"
        with urllib.request.urlopen(url, timeout=self.timeout) as resp:
            return resp.read().decode("utf-8")

    def __call__(self, first: SensorSample, second: SensorSample) -> int:
        try:
            body = self._get(
                "/update",
                {
                    "api_key": self.api_key,
                    "field1": repr(first.ppm),
                    "field2": repr(second.ppm),
                    "created_at": format_ts(first.taken_at),
                },
            )
            if self.write_pins:
                self._get("/blynk/pin/V1", {"value": repr(first.ppm)})
                self._get("/blynk/pin/V2", {"value": repr(second.ppm)})
        except (urllib.error.URLError, OSError, ValueError):
            self._tally("failed")
            raise
        entry_id = int(body.strip() or 0)
        self._tally("delivered" if entry_id else "rejected")
        return entry_id


class ServiceSink(_Counting):
    """Same contract as :class:`HttpSink`, calling the service object directly."""

    def __init__(self, service: IngestService, api_key: str, write_pins: bool = True):
        super().__init__()
        self.service = service
        self.api_key = api_key
        self.write_pins = write_pins

    def __call__(self, first: SensorSample, second: SensorSample) -> int:
        try:
            entry_id = self.service.handle_update(self.api_key, first.ppm, second.ppm, first.taken_at)
            if self.write_pins:
                self.service.pins.write("V1", first.ppm, first.taken_at)
                self.service.pins.write("V2", second.ppm, second.taken_at)
        except Exception:
            self._tally("failed")
            raise
        self._tally("delivered" if entry_id else "rejected")
        return entry_id


def read_pin(base_url: str, pin: str, timeout: float = 5.0) -> dict:
    with urllib.request.urlopen(f"{base_url.rstrip('/')}/blynk/pin/{pin}", timeout=timeout) as resp:
        return json.loads(resp.read())
