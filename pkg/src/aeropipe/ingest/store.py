"""Channel persistence and the ingestion semantics behind the HTTP endpoints.

Layout of a data directory::

    channels.json          manifest: one object per channel (id, key, labels, interval)
    channel-<id>.jsonl     append-only entries, one JSON object per line

All mutations of one channel go through that channel's lock, so id assignment,
the rate-limit check and the file append happen as one step.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import re
import tempfile
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from ..core import ChannelEntry

log = logging.getLogger(__name__)

MANIFEST = "channels.json"
MAX_FIELDS = 8
FEED_CSV_HEADER = ("created_at", "entry_id", "field1", "field2")
PIN_NAME = re.compile(r"^V\d+$")


class IngestError(Exception):
    status = 400


class BadRequest(IngestError):
    status = 400


class Unauthorized(IngestError):
    status = 401


class NotFound(IngestError):
    status = 404


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def format_ts(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_ts(text: str) -> datetime:
    text = text.strip()
    try:
        ts = datetime.fromisoformat(text.replace("Z", "+00:00").replace(" ", "T"))
    except ValueError:
        raise BadRequest(f"bad timestamp {text!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_value(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def parse_field(name: str, raw: str | float | None) -> float | None:
    if raw is None:
        return None
    if isinstance(raw, (int, float)):
        value = float(raw)
    else:
        if not raw.strip():
            return None
        try:
            value = float(raw)
        except ValueError:
            raise BadRequest(f"{name}: not a number: {raw!r}") from None
    if value != value or value in (float("inf"), float("-inf")):
        raise BadRequest(f"{name}: not finite")
    if value < 0:
        raise BadRequest(f"{name}: negative value {value}")
    return value


def _entry_to_json(entry: ChannelEntry) -> dict[str, Any]:
    return {
        "entry_id": entry.entry_id,
        "created_at": format_ts(entry.created_at),
        "field1": entry.field1,
        "field2": entry.field2,
    }


def _entry_from_json(obj: Mapping[str, Any]) -> ChannelEntry:
    return ChannelEntry(
        entry_id=int(obj["entry_id"]),
        created_at=parse_ts(obj["created_at"]),
        field1=obj.get("field1"),
        field2=obj.get("field2"),
    )


@dataclass
class Channel:
    channel_id: int
    write_api_key: str
    name: str = ""
    field_names: list[str] = field(default_factory=lambda: ["MQ135 ppm", "MQ3 ppm"])
    min_update_interval: float = 1.0
    created_at: datetime = field(default_factory=utcnow)
    entries: list[ChannelEntry] = field(default_factory=list, repr=False)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.channel_id < 1:
            raise ValueError("channel_id must be positive")
        if len(self.field_names) > MAX_FIELDS:
            raise ValueError(f"a channel has at most {MAX_FIELDS} fields")

    def manifest_entry(self) -> dict[str, Any]:
        return {
            "id": self.channel_id,
            "name": self.name,
            "write_api_key": self.write_api_key,
            "field_names": list(self.field_names),
            "min_update_interval": self.min_update_interval,
            "created_at": format_ts(self.created_at),
        }

    def snapshot(self) -> list[ChannelEntry]:
        # list.append is atomic under the GIL; slicing to a length read once gives a consistent prefix.
        n = len(self.entries)
        return self.entries[:n]


class VirtualPinStore:
    """Latest value per Blynk-style virtual pin (``V0``, ``V1`` ...)."""

    def __init__(self, clock: Callable[[], datetime] = utcnow):
        self._pins: dict[str, tuple[float, datetime]] = {}
        self._lock = threading.Lock()
        self._clock = clock

    @staticmethod
    def check_name(pin: str) -> str:
        if not PIN_NAME.match(pin or ""):
            raise BadRequest(f"malformed virtual pin name {pin!r}, expected V<digits>")
        return pin

    def write(self, pin: str, value: float | str, at: datetime | None = None) -> None:
        self.check_name(pin)
        number = parse_field(pin, value)
        if number is None:
            raise BadRequest(f"{pin}: missing value")
        with self._lock:
            self._pins[pin] = (number, at or self._clock())

    def read(self, pin: str) -> tuple[float, datetime]:
        self.check_name(pin)
        with self._lock:
            try:
                return self._pins[pin]
            except KeyError:
                raise NotFound(f"virtual pin {pin} has never been written") from None


class IngestService:
    """ThingSpeak-compatible channel store backed by a data directory."""

    def __init__(
        self,
        data_dir: str | os.PathLike,
        clock: Callable[[], datetime] = utcnow,
        default_interval: float = 1.0,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self.default_interval = default_interval
        self.pins = VirtualPinStore(clock)
        self._channels: dict[int, Channel] = {}
        self._by_key: dict[str, Channel] = {}
        self._registry_lock = threading.Lock()
        self._load()

    # -- channel registry -------------------------------------------------

    def _load(self) -> None:
        manifest = self.data_dir / MANIFEST
        if not manifest.exists():
            return
        for obj in json.loads(manifest.read_text(encoding="utf-8")):
            channel = Channel(
                channel_id=int(obj["id"]),
                write_api_key=obj["write_api_key"],
                name=obj.get("name", ""),
                field_names=list(obj.get("field_names", [])),
                min_update_interval=float(obj.get("min_update_interval", self.default_interval)),
                created_at=parse_ts(obj["created_at"]) if obj.get("created_at") else utcnow(),
            )
            channel.entries = self._read_entries(channel.channel_id)
            self._register(channel)

    def _read_entries(self, channel_id: int) -> list[ChannelEntry]:
        path = self._entries_path(channel_id)
        if not path.exists():
            return []
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.endswith("\n"):
                    log.warning("%s:%d: ignoring torn trailing line", path, lineno)
                    break
                entries.append(_entry_from_json(json.loads(line)))
        for expected, entry in enumerate(entries, start=1):
            if entry.entry_id != expected:
                raise RuntimeError(f"{path}: entry ids not dense at line {expected}")
        return entries

    def _entries_path(self, channel_id: int) -> Path:
        return self.data_dir / f"channel-{channel_id}.jsonl"

    def _register(self, channel: Channel) -> None:
        if channel.write_api_key in self._by_key:
            raise ValueError("write API keys must be unique across channels")
        self._channels[channel.channel_id] = channel
        self._by_key[channel.write_api_key] = channel

    def _write_manifest(self) -> None:
        payload = [c.manifest_entry() for c in sorted(self._channels.values(), key=lambda c: c.channel_id)]
        atomic_write(self.data_dir / MANIFEST, (json.dumps(payload, indent=2) + "\n").encode("utf-8"))

    def create_channel(
        self,
        write_api_key: str,
        channel_id: int | None = None,
        name: str = "",
        field_names: Iterable[str] = ("MQ135 ppm", "MQ3 ppm"),
        min_update_interval: float | None = None,
        created_at: datetime | None = None,
    ) -> Channel:
        with self._registry_lock:
            if channel_id is None:
                channel_id = max(self._channels, default=0) + 1
            if channel_id in self._channels:
                raise ValueError(f"channel {channel_id} already exists")
            channel = Channel(
                channel_id=channel_id,
                write_api_key=write_api_key,
                name=name,
                field_names=list(field_names),
                min_update_interval=self.default_interval if min_update_interval is None else min_update_interval,
                created_at=created_at or self.clock(),
            )
            self._register(channel)
            self._write_manifest()
            return channel

    def ensure_channel(self, spec: Mapping[str, Any]) -> Channel:
        """Create a channel from a config table unless the manifest already has it."""
        channel_id = int(spec["id"])
        if channel_id in self._channels:
            return self._channels[channel_id]
        return self.create_channel(
            write_api_key=str(spec["write_api_key"]),
            channel_id=channel_id,
            name=str(spec.get("name", "")),
            field_names=spec.get("field_names", ("MQ135 ppm", "MQ3 ppm")),
            min_update_interval=spec.get("min_update_interval"),
        )

    def channel(self, channel_id: int) -> Channel:
        try:
            return self._channels[channel_id]
        except KeyError:
            raise NotFound(f"no channel {channel_id}") from None

    @property
    def channels(self) -> list[Channel]:
        return sorted(self._channels.values(), key=lambda c: c.channel_id)

    # -- ingestion ----------------------------------------------------------

    def handle_update(
        self,
        api_key: str | None,
        field1: str | float | None = None,
        field2: str | float | None = None,
        received_at: datetime | None = None,
    ) -> int:
        """Append an entry and return its id, or 0 when the update is rate-limited.

        ``received_at`` is the entry timestamp (a client-supplied ``created_at``
        or the server clock); rate limiting compares it with the last accepted entry.
        """
        channel = self._by_key.get(api_key or "")
        if channel is None:
            raise Unauthorized("unknown write API key")
        v1 = parse_field("field1", field1)
        v2 = parse_field("field2", field2)
        with channel.lock:
            # stamp under the lock so server-clock entries stay in order
            at = received_at or self.clock()
            if at.tzinfo is None:
                at = at.replace(tzinfo=timezone.utc)
            if channel.entries:
                gap = (at - channel.entries[-1].created_at).total_seconds()
                if gap < channel.min_update_interval:
                    return 0
            entry = ChannelEntry(len(channel.entries) + 1, at, v1, v2)
            line = json.dumps(_entry_to_json(entry)) + "\n"
            with open(self._entries_path(channel.channel_id), "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
            channel.entries.append(entry)
            return entry.entry_id

    # -- export -------------------------------------------------------------

    def export_csv(
        self, channel_id: int, start: datetime | None = None, end: datetime | None = None
    ) -> bytes:
        entries = self.channel(channel_id).snapshot()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(FEED_CSV_HEADER)
        for e in entries:
            if start is not None and e.created_at < start:
                continue
            if end is not None and e.created_at > end:
                continue
            writer.writerow([format_ts(e.created_at), e.entry_id, format_value(e.field1), format_value(e.field2)])
        return buf.getvalue().encode("utf-8")

    def read_feed_json(self, channel_id: int, results: int = 100) -> str:
        if results < 1:
            raise BadRequest("results must be >= 1")
        channel = self.channel(channel_id)
        entries = channel.snapshot()
        tail = entries[-results:]
        meta: dict[str, Any] = {
            "id": channel.channel_id,
            "name": channel.name,
            "created_at": format_ts(channel.created_at),
            "updated_at": format_ts(entries[-1].created_at) if entries else None,
            "last_entry_id": entries[-1].entry_id if entries else None,
        }
        for i, label in enumerate(channel.field_names, start=1):
            meta[f"field{i}"] = label
        feeds = [
            {
                "created_at": format_ts(e.created_at),
                "entry_id": e.entry_id,
                "field1": None if e.field1 is None else format_value(e.field1),
                "field2": None if e.field2 is None else format_value(e.field2),
            }
            for e in tail
        ]
        return json.dumps({"channel": meta, "feeds": feeds})


def parse_feed_csv(data: bytes | str) -> list[ChannelEntry]:
    """Read a ``feeds.csv`` export back into entries."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    rows = csv.DictReader(io.StringIO(text))
    missing = set(FEED_CSV_HEADER) - set(rows.fieldnames or ())
    if missing:
        raise ValueError(f"feed CSV lacks columns: {sorted(missing)}")
    return [
        ChannelEntry(
            entry_id=int(row["entry_id"]),
            created_at=parse_ts(row["created_at"]),
            field1=parse_field("field1", row["field1"]),
            field2=parse_field("field2", row["field2"]),
        )
        for row in rows
    ]


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
