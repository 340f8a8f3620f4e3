"""Scenario files: TOML sections validated with pydantic, merged over a preset."""
from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib
import tomli_w

from .campaign import (
    ChannelProcesses,
    CouplingMode,
    LinkTopology,
    Terminal,
    ThroughputModel,
    ThroughputScenario,
)
from .channel import (
    DAY,
    GustEvent,
    PointingProcess,
    RandomStream,
    ScintillationModel,
    paper_month_timeline,
)
from .components import ApdParams, DcfCouplerSpec, LaunchSpec, LinkBudgetChain
from .ofdm import Constellation, CrosstalkModel, OfdmConfig, PilotScheme
from .optics import FiberKind, FiberSpec, LensSpec
from .presets import DEFAULT_PRESET, preset
from .receiver import ReceiverModel


class ConfigError(ValueError):
    """Scenario file or override failed validation."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CouplerSection(_Section):
    smf_insertion_db: float = Field(ge=0)
    mmf_insertion_db: float = Field(ge=0)
    crosstalk_db: float = Field(ge=20)


class FiberSection(_Section):
    core_diameter: float = Field(gt=0)
    numerical_aperture: float = Field(gt=0, lt=1)
    mode_field_radius: float | None = Field(default=None, gt=0)


class BudgetItem(_Section):
    name: str
    loss_db: float | None = None
    gain_db: float | None = None


class TopologySection(_Section):
    span: float = Field(gt=0)
    wavelength: float = Field(gt=0)
    coupling_mode: CouplingMode
    oscr_db: float
    launch_power_dbm: float
    launch_modulation_index: float = Field(gt=0, le=1)
    lens_focal_length: float = Field(gt=0)
    lens_aperture: float = Field(gt=0)
    terminal_excess_loss_db: float = Field(ge=0)
    coupler: CouplerSection
    smf: FiberSection
    receive_aperture: FiberSection
    feed_chain: list[BudgetItem]
    post_chain: list[BudgetItem]
    smf_post_chain: list[BudgetItem]


class PointingSection(_Section):
    static_residual: tuple[float, float]
    drift_rate: tuple[float, float]
    jitter_sigma: float = Field(ge=0)


class WeatherSection(_Section):
    rain_events: int = Field(ge=0)
    fog_events: int = Field(ge=0)
    rain_db_per_km: float = Field(ge=0)
    fog_db_per_km: float = Field(ge=0)
    rain_hours: tuple[float, float]
    fog_hours: tuple[float, float]
    temperature_swing: float = Field(ge=0)
    log_amplitude_sigma: float = Field(ge=0)
    correlation_time: float = Field(gt=0)

    @field_validator("rain_hours", "fog_hours")
    @classmethod
    def _ordered(cls, v):
        if not 0 < v[0] <= v[1]:
            raise ValueError("duration range must satisfy 0 < lo <= hi")
        return v


class OfdmSection(_Section):
    subcarrier_count: int
    constellation: Constellation
    bandwidth: float
    rf_carrier: float
    cyclic_prefix_fraction: float
    pilot_scheme: PilotScheme
    pilot_spacing: int
    preamble_symbols: int
    symbols_per_frame: int


class ReceiverSection(_Section):
    responsivity: float = Field(gt=0)
    avalanche_gain: float = Field(gt=0)
    excess_noise_factor: float = Field(gt=0)
    dark_current: float = Field(gt=0)
    saturation_rop_dbm: float
    bandwidth: float = Field(gt=0)
    compression_coefficient: float = Field(ge=0)
    crosstalk_model: CrosstalkModel
    thermal_noise_current_density: float = Field(gt=0)
    modulation_index: float = Field(gt=0, le=1)
    mpn_floor_percent: float = Field(ge=0)


class ThroughputSection(_Section):
    duration: float = Field(gt=0)
    dt: float = Field(gt=0, lt=1)
    start_day: float = Field(ge=0)
    sensitivity_dbm: float
    peak_rate: float = Field(gt=0)
    buffer_floor_rate: float = Field(gt=0)
    gust_time: float | None = Field(default=None, ge=0)
    gust_duration: float = Field(gt=0)
    gust_azimuth: float
    gust_peak: float = Field(ge=0)


class CampaignSection(_Section):
    duration_days: float = Field(gt=0)
    dt: float = Field(gt=0)
    quantization_db: float = Field(ge=0)
    sample_cap: int = Field(gt=0)
    sweep_rop_min: float
    sweep_rop_max: float
    sweep_rop_step: float = Field(gt=0)
    subcarrier_rop: float
    throughput: ThroughputSection


class ScenarioConfig(_Section):
    preset: Literal["paper-2023"] = DEFAULT_PRESET
    topology: TopologySection
    pointing: PointingSection
    weather: WeatherSection
    ofdm: OfdmSection
    receiver: ReceiverSection
    campaign: CampaignSection

    # -- domain objects --------------------------------------------------

    def topology_model(self) -> LinkTopology:
        t, r = self.topology, self.receiver
        rx = ReceiverModel(
            ApdParams(r.responsivity, r.avalanche_gain, r.excess_noise_factor, r.thermal_noise_current_density,
                      r.dark_current, r.saturation_rop_dbm, r.bandwidth, r.compression_coefficient),
            r.modulation_index, r.mpn_floor_percent)

        def chain(items):
            return LinkBudgetChain.from_list(i.model_dump(exclude_none=True) for i in items)

        terminal = Terminal(
            lens=LensSpec(t.lens_focal_length, t.lens_aperture),
            coupler=DcfCouplerSpec(t.coupler.smf_insertion_db, t.coupler.mmf_insertion_db, t.coupler.crosstalk_db),
            launch=LaunchSpec(t.launch_power_dbm, t.wavelength, t.launch_modulation_index),
            receiver=rx,
            feed_chain=chain(t.feed_chain),
            post_chain=chain(t.post_chain),
            smf_post_chain=chain(t.smf_post_chain),
        )
        smf = FiberSpec.single_mode(t.smf.core_diameter, t.smf.numerical_aperture, t.wavelength,
                                    mode_field_radius=t.smf.mode_field_radius, kind=FiberKind.DCF_CORE)
        if t.receive_aperture.mode_field_radius is not None:
            raise ConfigError("topology.receive_aperture is multi-mode and takes no mode_field_radius")
        aperture = FiberSpec(FiberKind.DCF_INNER_CLADDING, t.receive_aperture.core_diameter,
                             t.receive_aperture.numerical_aperture)
        return LinkTopology(terminal, terminal, smf, aperture, t.span, t.terminal_excess_loss_db,
                            t.coupling_mode, t.oscr_db)

    def ofdm_config(self) -> OfdmConfig:
        return OfdmConfig(**self.ofdm.model_dump())

    def pointing_process(self) -> PointingProcess:
        p = self.pointing
        return PointingProcess(p.static_residual, p.jitter_sigma, p.drift_rate)

    def scintillation(self) -> ScintillationModel:
        return ScintillationModel(self.weather.log_amplitude_sigma, self.weather.correlation_time)

    def processes(self, seed: int) -> ChannelProcesses:
        w = self.weather
        timeline = paper_month_timeline(
            RandomStream(seed), self.campaign.duration_days * DAY, w.rain_events, w.fog_events,
            w.rain_db_per_km, w.fog_db_per_km, w.rain_hours, w.fog_hours, w.temperature_swing)
        return ChannelProcesses(self.pointing_process(), timeline, self.scintillation())

    def throughput_scenario(self) -> ThroughputScenario:
        s = self.campaign.throughput
        gust = None
        if s.gust_time is not None and s.gust_peak > 0:
            gust = GustEvent(s.gust_time, s.gust_peak, s.gust_duration, s.gust_azimuth)
        return ThroughputScenario(s.duration, s.dt, s.start_day, gust, s.sensitivity_dbm,
                                  ThroughputModel(s.peak_rate, s.buffer_floor_rate))

    def rop_grid(self) -> np.ndarray:
        c = self.campaign
        n = int(round((c.sweep_rop_max - c.sweep_rop_min) / c.sweep_rop_step)) + 1
        return np.round(c.sweep_rop_min + c.sweep_rop_step * np.arange(n), 6)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.model_dump(mode="json", exclude_none=True))


def deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"])
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def build_config(overrides: dict | None = None, preset_name: str | None = None) -> ScenarioConfig:
    """Validate ``overrides`` merged on top of a preset."""
    overrides = dict(overrides or {})
    name = preset_name or overrides.get("preset", DEFAULT_PRESET)
    try:
        base = preset(name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    merged = deep_merge(base, overrides)
    merged["preset"] = name
    try:
        cfg = ScenarioConfig.model_validate(merged)
        # surface domain-level validation at load time too
        cfg.topology_model().receive_beam_radius()
        cfg.ofdm_config()
        cfg.throughput_scenario()
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path | None = None, preset_name: str | None = None) -> ScenarioConfig:
    """Read a scenario TOML file (optional) over the chosen preset."""
    data = {}
    if path is not None:
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return build_config(data, preset_name)


@dataclass(frozen=True)
class FrozenCalibration:
    """Calibrated values written back into a scenario file."""

    thermal_noise_current_density: float
    modulation_index: float
    mpn_floor_percent: float
    static_residual: tuple[float, float]
    drift_rate: tuple[float, float]
    jitter_sigma: float
    log_amplitude_sigma: float
    correlation_time: float
    gust_peak: float

    def apply(self, cfg: ScenarioConfig) -> ScenarioConfig:
        data = cfg.model_dump(mode="json")
        data["receiver"].update(thermal_noise_current_density=self.thermal_noise_current_density,
                                modulation_index=self.modulation_index,
                                mpn_floor_percent=self.mpn_floor_percent)
        data["pointing"].update(static_residual=list(self.static_residual), drift_rate=list(self.drift_rate),
                                jitter_sigma=self.jitter_sigma)
        data["weather"].update(log_amplitude_sigma=self.log_amplitude_sigma,
                               correlation_time=self.correlation_time)
        data["campaign"]["throughput"]["gust_peak"] = self.gust_peak
        return ScenarioConfig.model_validate(data)
