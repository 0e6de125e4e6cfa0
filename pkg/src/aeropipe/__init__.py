"""Virtual MQ-sensor telemetry, ThingSpeak-style ingestion, CPCB AQI and pollution analytics."""

__version__ = "0.1.0"
