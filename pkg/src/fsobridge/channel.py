"""Time-varying channel: pointing error, weather attenuation and scintillation.

Random draws come from :class:`RandomStream` substreams keyed by
``(seed, stream_id, chunk)``, so a campaign is bit-reproducible and any chunk
can be regenerated on its own.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.signal import lfilter

DAY = 86400.0

STREAM_POINTING = 1
STREAM_SCINTILLATION = 2
STREAM_WEATHER = 3

CHUNK_SIZE = 8192
DEFAULT_SAMPLE_CAP = 5_000_000


class CampaignTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class RandomStream:
    seed: int
    stream_id: int = 0

    def generator(self, *key: int) -> np.random.Generator:
        seq = np.random.SeedSequence([int(self.seed) & (2**64 - 1), int(self.stream_id), *map(int, key)])
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, stream_id: int) -> "RandomStream":
        return RandomStream(self.seed, stream_id)


def _vec2(value) -> tuple[float, float]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return (float(arr[0]), 0.0)
    if arr.size != 2:
        raise ValueError(f"expected a scalar or 2-vector, got {value!r}")
    return (float(arr[0]), float(arr[1]))


@dataclass(frozen=True)
class GustEvent:
    """Wind gust whose excursion is at least half its peak during [time, time + duration]."""

    time: float
    peak_excursion: float
    duration: float = 1.0
    azimuth: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("gust duration must be positive")

    def excursion(self, t):
        # raised-cosine pulse; duration is its full width at half maximum
        centre = self.time + self.duration / 2
        x = (np.asarray(t, dtype=float) - centre) / self.duration
        return np.where(np.abs(x) <= 1, self.peak_excursion * np.cos(math.pi * x / 2) ** 2, 0.0)


@dataclass(frozen=True)
class PointingProcess:
    """Residual + linear creep + white jitter + gusts, all in radians.

    ``static_residual`` and ``drift_rate`` (rad/day) are 2-vectors; a scalar
    is taken along the x axis.
    """

    static_residual: tuple[float, float] = (0.0, 0.0)
    jitter_sigma: float = 0.0
    drift_rate: tuple[float, float] = (0.0, 0.0)
    gust_events: tuple[GustEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "static_residual", _vec2(self.static_residual))
        object.__setattr__(self, "drift_rate", _vec2(self.drift_rate))
        object.__setattr__(self, "gust_events", tuple(self.gust_events))
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")

    def deterministic(self, t) -> np.ndarray:
        """Static + drift + gust part, shape ``t.shape + (2,)``."""
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (2,))
        days = t / DAY
        out[..., 0] = self.static_residual[0] + self.drift_rate[0] * days
        out[..., 1] = self.static_residual[1] + self.drift_rate[1] * days
        for gust in self.gust_events:
            g = gust.excursion(t)
            out[..., 0] += g * math.cos(gust.azimuth)
            out[..., 1] += g * math.sin(gust.azimuth)
        return out


def sample_pointing(proc: PointingProcess, t, rng: np.random.Generator) -> np.ndarray:
    """Angular pointing error (x, y) in rad at time(s) ``t`` seconds."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    out = proc.deterministic(t)
    if proc.jitter_sigma > 0:
        out = out + proc.jitter_sigma * rng.standard_normal(out.shape)
    return out


class WeatherKind(str, enum.Enum):
    RAIN = "rain"
    FOG = "fog"


@dataclass(frozen=True)
class WeatherEvent:
    kind: WeatherKind
    start: float
    duration: float
    specific_attenuation: float  # dB/km

    def __post_init__(self):
        object.__setattr__(self, "kind", WeatherKind(self.kind))
        if self.specific_attenuation < 0:
            raise ValueError("specific_attenuation must be >= 0")
        if not self.duration > 0:
            raise ValueError("weather event duration must be positive")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def active(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (t >= self.start) & (t < self.end)


@dataclass(frozen=True)
class WeatherTimeline:
    events: tuple[WeatherEvent, ...] = ()
    temperature_swing: float | None = None  # °C peak-to-peak, annotation only

    def __post_init__(self):
        events = tuple(sorted(self.events, key=lambda ev: (ev.start, ev.kind.value)))
        object.__setattr__(self, "events", events)
        for kind in WeatherKind:
            same = [ev for ev in events if ev.kind is kind]
            for a, b in zip(same, same[1:]):
                if b.start < a.end:
                    raise ValueError(f"overlapping {kind.value} events at t={b.start:.0f} s")

    def count(self, kind: WeatherKind | str) -> int:
        return sum(ev.kind is WeatherKind(kind) for ev in self.events)

    def active(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        mask = np.zeros(t.shape, dtype=bool)
        for ev in self.events:
            mask |= ev.active(t)
        return mask

    def to_list(self) -> list[dict]:
        return [
            {"kind": ev.kind.value, "start": ev.start, "duration": ev.duration,
             "specific_attenuation": ev.specific_attenuation}
            for ev in self.events
        ]


def atmospheric_loss(timeline: WeatherTimeline, t, span: float):
    """Weather attenuation in dB over ``span`` metres at time(s) ``t``."""
    if not span > 0:
        raise ValueError("span must be positive")
    t = np.asarray(t, dtype=float)
    loss = np.zeros(t.shape)
    for ev in timeline.events:
        loss = loss + np.where(ev.active(t), ev.specific_attenuation * span / 1000.0, 0.0)
    return float(loss) if loss.ndim == 0 else loss


def paper_month_timeline(
    rng: RandomStream,
    duration: float = 30 * DAY,
    n_rain: int = 19,
    n_fog: int = 5,
    rain_db_per_km: float = 6.0,
    fog_db_per_km: float = 100.0,
    rain_hours: tuple[float, float] = (1.0, 6.0),
    fog_hours: tuple[float, float] = (2.0, 8.0),
    temperature_swing: float = 24.3,
) -> WeatherTimeline:
    """Scripted weather month with events placed pseudo-randomly from the seed.

    Each kind gets equal, disjoint slots with one event per slot, which keeps
    events of a kind from overlapping.
    """
    gen = rng.substream(STREAM_WEATHER).generator()
    events = []
    for kind, n, atten, hours in (
        (WeatherKind.RAIN, n_rain, rain_db_per_km, rain_hours),
        (WeatherKind.FOG, n_fog, fog_db_per_km, fog_hours),
    ):
        if n == 0:
            continue
        slot = duration / n
        for i in range(n):
            length = min(gen.uniform(*hours) * 3600.0, 0.9 * slot)
            start = i * slot + gen.uniform(0.0, slot - length)
            events.append(WeatherEvent(kind, float(start), float(length), atten))
    return WeatherTimeline(tuple(events), temperature_swing)


def temperature_annotation(t, swing: float = 24.3, mean: float = 15.0) -> np.ndarray:
    """Synthetic ambient temperature with an exact peak-to-peak ``swing``.

    Diurnal cycle on top of a cooling trend; display-only.
    """
    t = np.asarray(t, dtype=float)
    days = t / DAY
    raw = np.sin(2 * math.pi * (days - 0.375)) - 0.08 * days
    if raw.size < 2 or np.ptp(raw) == 0:
        return np.full(t.shape, mean)
    raw = (raw - raw.min()) / np.ptp(raw)
    return mean + swing * (raw - 0.5)


@dataclass(frozen=True)
class ScintillationModel:
    log_amplitude_sigma: float = 0.0
    correlation_time: float = 1.0  # s

    def __post_init__(self):
        if self.log_amplitude_sigma < 0:
            raise ValueError("log_amplitude_sigma must be >= 0")
        if not self.correlation_time > 0:
            raise ValueError("correlation_time must be positive")

    def ar_coefficient(self, dt: float) -> float:
        return math.exp(-dt / self.correlation_time)

    @property
    def scintillation_index(self) -> float:
        return math.expm1(4 * self.log_amplitude_sigma**2)


def _log_amplitude(model: ScintillationModel, innovations: np.ndarray, rho: float, prev: float | None):
    """AR(1) log-amplitude path; ``prev`` is the state before the first step."""
    sigma = model.log_amplitude_sigma
    drive = sigma * math.sqrt(1 - rho**2) * innovations
    if prev is None:
        # stationary start
        drive = drive.copy()
        drive[0] = sigma * innovations[0]
        return lfilter([1.0], [1.0, -rho], drive)
    out, _ = lfilter([1.0], [1.0, -rho], drive, zi=[rho * prev])
    return out


def fade_from_log_amplitude(model: ScintillationModel, x) -> np.ndarray:
    return np.exp(2 * np.asarray(x) - 2 * model.log_amplitude_sigma**2)


def scintillation_sample(model: ScintillationModel, t, rng: np.random.Generator):
    """Unit-mean log-normal power factor(s) at uniformly spaced time(s) ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if model.log_amplitude_sigma == 0:
        out = np.ones(t.shape)
    else:
        dt = float(t[1] - t[0]) if t.size > 1 else math.inf
        rho = 0.0 if math.isinf(dt) else model.ar_coefficient(dt)
        x = _log_amplitude(model, rng.standard_normal(t.size), rho, None)
        out = fade_from_log_amplitude(model, x)
    return float(out[0]) if out.size == 1 else out


@dataclass
class ChannelStates:
    """Per-step channel inputs; arrays share the leading time axis."""

    t: np.ndarray
    pointing: np.ndarray  # (n, 2) rad
    excess_loss_db: np.ndarray
    fade: np.ndarray
    weather_active: np.ndarray

    def __len__(self) -> int:
        return self.t.size

    @classmethod
    def concat(cls, parts: Sequence["ChannelStates"]) -> "ChannelStates":
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                     ("t", "pointing", "excess_loss_db", "fade", "weather_active")))

    @classmethod
    def single(cls, pointing=(0.0, 0.0), excess_loss_db=0.0, fade=1.0, t=0.0) -> "ChannelStates":
        return cls(np.array([t], float), np.array([pointing], float), np.array([excess_loss_db], float),
                   np.array([fade], float), np.array([excess_loss_db > 0]))


def sample_count(duration: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    return max(1, math.ceil(duration / dt - 1e-9))


def iter_campaign_inputs(
    proc: PointingProcess,
    timeline: WeatherTimeline,
    scint: ScintillationModel,
    duration: float,
    dt: float,
    rng: RandomStream,
    span: float = 63.0,
    chunk_size: int = CHUNK_SIZE,
    t0: float = 0.0,
) -> Iterator[ChannelStates]:
    """Streaming campaign generator, one chunk of channel states at a time.

    Chunk ``c`` draws from substreams keyed by ``c``. The concatenation matches
    :func:`generate_campaign_inputs` only when ``chunk_size`` is left at the
    module default.
    """
    n = sample_count(duration, dt)
    rho = scint.ar_coefficient(dt)
    prev = None
    for c, lo in enumerate(range(0, n, chunk_size)):
        idx = np.arange(lo, min(n, lo + chunk_size))
        t = t0 + idx * dt
        pointing = sample_pointing(proc, t, rng.substream(STREAM_POINTING).generator(c))
        if scint.log_amplitude_sigma > 0:
            innov = rng.substream(STREAM_SCINTILLATION).generator(c).standard_normal(idx.size)
            x = _log_amplitude(scint, innov, rho, prev)
            prev = float(x[-1])
            fade = fade_from_log_amplitude(scint, x)
        else:
            fade = np.ones(idx.size)
        yield ChannelStates(
            t=t,
            pointing=pointing,
            excess_loss_db=np.asarray(atmospheric_loss(timeline, t, span), dtype=float).reshape(idx.shape),
            fade=fade,
            weather_active=timeline.active(t),
        )


def generate_campaign_inputs(
    proc: PointingProcess,
    timeline: WeatherTimeline,
    scint: ScintillationModel,
    duration: float,
    dt: float,
    rng: RandomStream,
    span: float = 63.0,
    sample_cap: int = DEFAULT_SAMPLE_CAP,
    t0: float = 0.0,
) -> ChannelStates:
    """Whole campaign in memory; refuses runs longer than ``sample_cap`` steps."""
    n = sample_count(duration, dt)
    if n > sample_cap:
        raise CampaignTooLargeError(
            f"campaign needs {n} samples, above the cap of {sample_cap}; "
            "use iter_campaign_inputs() to stream it in chunks"
        )
    return ChannelStates.concat(list(iter_campaign_inputs(proc, timeline, scint, duration, dt, rng, span, t0=t0)))
