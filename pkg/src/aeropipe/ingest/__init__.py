from .client import HttpSink, ServiceSink
from .http import BackgroundServer, make_server
from .store import (
    BadRequest,
    Channel,
    IngestError,
    IngestService,
    NotFound,
    Unauthorized,
    VirtualPinStore,
    atomic_write,
    parse_feed_csv,
)

__all__ = [
    "BackgroundServer",
    "BadRequest",
    "Channel",
    "HttpSink",
    "IngestError",
    "IngestService",
    "NotFound",
    "ServiceSink",
    "Unauthorized",
    "VirtualPinStore",
    "atomic_write",
    "make_server",
    "parse_feed_csv",
]
