"""Virtual NodeMCU with an MQ135 and an MQ3 multiplexed onto one 10-bit ADC pin.

Time is virtual: ``run_device_loop`` advances a per-device clock in whole
sample periods, so a ten-minute run finishes instantly and replays exactly.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .config import load_packaged_toml, load_toml
from .core import GasKind, SensorSample

log = logging.getLogger(__name__)

ADC_MAX = 1023
READS_PER_SAMPLE = 6
DEFAULT_START = datetime(2026, 1, 1, tzinfo=timezone.utc)


class SaturationError(ValueError):
    """ADC reading pinned at a rail, so no resistance can be recovered."""

    def __init__(self, counts: float, channel: int | None = None):
        where = f"channel {channel}" if channel is not None else "sensor"
        super().__init__(f"{where} saturated: ADC counts {counts} outside [1, {ADC_MAX - 1}]")
        self.counts = counts
        self.channel = channel


@dataclass(frozen=True)
class SensorCurve:
    """Power-law MQ response ``ppm = a * (Rs/R0)**b`` behind a load-resistor divider."""

    a: float
    b: float
    r0: float
    rl: float
    vcc: float = 5.0

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError("curve scale a must be > 0")
        if not self.b < 0:
            raise ValueError("curve exponent b must be < 0")
        for name in ("r0", "rl", "vcc"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "SensorCurve":
        return cls(**{k: float(values[k]) for k in ("a", "b", "r0", "rl", "vcc") if k in values})


def default_curves() -> dict[GasKind, SensorCurve]:
    table = load_packaged_toml("sensor_curves.toml")
    return {gas: SensorCurve.from_mapping(table[gas.value]) for gas in GasKind}


def ppm_to_counts(curve: SensorCurve, true_ppm: float, noise_draw: float = 0) -> int:
    """ADC counts a sensor would produce at ``true_ppm``, plus noise, clamped to [1, 1022]."""
    if true_ppm < 0:
        raise ValueError(f"concentration must be non-negative, got {true_ppm}")
    if true_ppm == 0:
        # Rs -> infinity, Vout -> 0: the low clamp.
        ideal = 0
    else:
        rs = curve.r0 * (true_ppm / curve.a) ** (1.0 / curve.b)
        vout = curve.vcc * curve.rl / (curve.rl + rs)
        ideal = round(ADC_MAX * vout / curve.vcc)
    return int(min(max(ideal + round(noise_draw), 1), ADC_MAX - 1))


def counts_to_ppm(curve: SensorCurve, counts: float, channel: int | None = None) -> float:
    if not 1 <= counts <= ADC_MAX - 1:
        raise SaturationError(counts, channel)
    vout = curve.vcc * counts / ADC_MAX
    rs = curve.rl * (curve.vcc - vout) / vout
    return curve.a * (rs / curve.r0) ** curve.b


@dataclass(frozen=True)
class GasScenario:
    """Piecewise-linear true concentration per gas; flat before the first and after the last knot."""

    knots: Mapping[GasKind, Sequence[tuple[float, float]]]

    def __post_init__(self) -> None:
        for gas, points in self.knots.items():
            if not points:
                raise ValueError(f"{gas.value}: empty knot list")
            offsets = [p[0] for p in points]
            if any(b <= a for a, b in zip(offsets, offsets[1:])):
                raise ValueError(f"{gas.value}: knot offsets must be strictly increasing")
            if any(p[1] < 0 for p in points):
                raise ValueError(f"{gas.value}: concentrations must be >= 0")

    def concentration(self, gas: GasKind, t: float) -> float:
        points = self.knots.get(gas)
        if not points:
            raise KeyError(f"scenario has no timeline for {gas.value}")
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        return float(np.interp(t, xs, ys))

    @classmethod
    def constant(cls, mq135_ppm: float, mq3_ppm: float) -> "GasScenario":
        return cls({GasKind.MQ135_AIR: [(0.0, mq135_ppm)], GasKind.MQ3_ALCOHOL: [(0.0, mq3_ppm)]})

    @classmethod
    def from_mapping(cls, table: Mapping[str, Any]) -> "GasScenario":
        knots = {}
        for gas in GasKind:
            if gas.value in table:
                raw = table[gas.value]["knots"]
                knots[gas] = [(float(t), float(c)) for t, c in raw]
        return cls(knots)


class MuxLevel(Enum):
    LOW = 0
    HIGH = 1


class ScriptedNoise:
    """Noise source that replays a fixed list of ADC offsets, for tests and demos."""

    def __init__(self, draws: Iterable[float]):
        self._draws = list(draws)
        self._pos = 0

    def __call__(self) -> float:
        if self._pos >= len(self._draws):
            raise RuntimeError("scripted noise exhausted")
        value = self._draws[self._pos]
        self._pos += 1
        return value


@dataclass
class VirtualDevice:
    device_id: str
    curves: dict[GasKind, SensorCurve] = field(default_factory=default_curves)
    noise_sigma: float = 2.0
    rng_seed: int = 0
    sample_period: float = 1.0
    start: datetime = DEFAULT_START
    noise_source: Callable[[], float] | None = None
    scenario: GasScenario | None = None
    mux_pin: MuxLevel = MuxLevel.LOW
    clock: float = 0.0
    history: list[SensorSample] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def change_mux(self, channel: int) -> None:
        GasKind.for_channel(channel)
        self.mux_pin = MuxLevel.HIGH if channel else MuxLevel.LOW

    @property
    def selected_channel(self) -> int:
        return self.mux_pin.value

    def noise_draws(self, channel: int, t: float, n: int) -> list[float]:
        if self.noise_source is not None:
            return [self.noise_source() for _ in range(n)]
        if self.noise_sigma == 0:
            return [0.0] * n
        # Keyed on (seed, channel, virtual ms) so the same instant always replays the same noise.
        rng = np.random.default_rng([self.rng_seed & (2**64 - 1), channel, int(round(t * 1000))])
        return [float(x) for x in np.rint(rng.normal(0.0, self.noise_sigma, size=n))]

    @classmethod
    def from_mapping(cls, table: Mapping[str, Any], start: datetime = DEFAULT_START) -> "VirtualDevice":
        curves = default_curves()
        for gas, overrides in table.get("curves", {}).items():
            kind = GasKind(gas)
            merged = {**curves[kind].__dict__, **overrides}
            curves[kind] = SensorCurve.from_mapping(merged)
        return cls(
            device_id=str(table["id"]),
            curves=curves,
            noise_sigma=float(table.get("noise_sigma", 2.0)),
            rng_seed=int(table.get("seed", 0)),
            sample_period=float(table.get("sample_period", 1.0)),
            start=start,
        )


def sample_channel(device: VirtualDevice, channel: int, t: float | None = None) -> SensorSample:
    """Select ``channel`` on the mux, average six ADC reads, convert the mean to ppm."""
    if channel not in (0, 1):
        raise ValueError(f"mux channel must be 0 or 1, got {channel!r}")
    if device.scenario is None:
        raise RuntimeError(f"device {device.device_id} has no gas scenario attached")
    t = device.clock if t is None else t
    device.change_mux(channel)
    gas = GasKind.for_channel(channel)
    curve = device.curves[gas]
    true_ppm = device.scenario.concentration(gas, t)
    reads = [
        ppm_to_counts(curve, true_ppm, draw)
        for draw in device.noise_draws(channel, t, READS_PER_SAMPLE)
    ]
    mean_counts = sum(reads) / len(reads)
    return SensorSample(
        device_id=device.device_id,
        channel=channel,
        raw_counts=mean_counts,
        ppm=counts_to_ppm(curve, mean_counts, channel),
        taken_at=device.start + timedelta(seconds=t),
    )


Sink = Callable[[SensorSample, SensorSample], Any]


def run_device_loop(
    device: VirtualDevice,
    scenario: GasScenario,
    duration: float,
    sink: Sink | None = None,
) -> Iterator[tuple[SensorSample, SensorSample]]:
    """Yield one (channel 0, channel 1) pair per sample period.

    Tick ``i`` samples at virtual offset ``i * sample_period``; exactly
    ``floor(duration / sample_period)`` pairs are produced. A sink that raises
    is logged and skipped for that tick only.
    """
    device.scenario = scenario
    ticks = math.floor(duration / device.sample_period + 1e-9) if duration > 0 else 0
    for i in range(ticks):
        device.clock = i * device.sample_period
        first = sample_channel(device, 0)
        second = sample_channel(device, 1)
        device.history.extend((first, second))
        if sink is not None:
            try:
                sink(first, second)
            except Exception as exc:
                log.warning("device %s tick %d: delivery failed: %s", device.device_id, i, exc)
        yield first, second


def run_fleet(
    devices: Sequence[VirtualDevice],
    scenario: GasScenario,
    duration: float,
    sink_for: Callable[[VirtualDevice], Sink],
    max_workers: int | None = None,
) -> dict[str, list[tuple[SensorSample, SensorSample]]]:
    """Run every device loop on its own thread; returns the pair stream per device id."""

    def drive(device: VirtualDevice):
        return device.device_id, list(run_device_loop(device, scenario, duration, sink_for(device)))

    with ThreadPoolExecutor(max_workers=max_workers or max(1, len(devices))) as pool:
        return dict(pool.map(drive, devices))


def load_scenario_file(path) -> tuple[list[VirtualDevice], GasScenario, dict[str, Any]]:
    """Read a scenario TOML: ``[[device]]`` entries, ``[scenario.<gas>]`` knots, run settings."""
    table = load_toml(path)
    start_text = table.get("start")
    start = DEFAULT_START
    if start_text:
        start = datetime.fromisoformat(str(start_text).replace("Z", "+00:00"))
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
    devices = [VirtualDevice.from_mapping(d, start) for d in table.get("device", [])]
    if not devices:
        raise ValueError(f"{path}: scenario defines no [[device]] entries")
    ids = [d.device_id for d in devices]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate device ids")
    scenario = GasScenario.from_mapping(table.get("scenario", {}))
    missing = [g.value for g in GasKind if g not in scenario.knots]
    if missing:
        raise ValueError(f"{path}: scenario lacks knots for {', '.join(missing)}")
    settings = {k: v for k, v in table.items() if k not in ("device", "scenario")}
    return devices, scenario, settings
