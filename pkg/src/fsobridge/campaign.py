"""End-to-end bridge: paired SMF/MMF campaigns, EVM sweeps and throughput."""
from __future__ import annotations

import enum
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .channel import (
    DAY,
    DEFAULT_SAMPLE_CAP,
    ChannelStates,
    GustEvent,
    PointingProcess,
    RandomStream,
    ScintillationModel,
    WeatherTimeline,
    generate_campaign_inputs,
    temperature_annotation,
)
from .components import (
    DcfCouplerSpec,
    LaunchSpec,
    LinkBudgetChain,
    Port,
    coupler_transfer,
    linear_to_db,
)
from .ofdm import CrosstalkModel, EvmResult, OfdmConfig, modulate_random
from .optics import (
    FiberSpec,
    LensSpec,
    collimate,
    encircled_fraction,
    facet_misalignment,
    focused_numerical_aperture,
    focused_spot_radius,
    mmf_coupling_efficiency,
    propagate,
    smf_coupling_efficiency,
)
from .receiver import ReceiverModel, simulate_evm

STREAM_NOISE = 20
STREAM_THROUGHPUT = 30
MONITOR_FLOOR_DBM = -40.0


class CouplingMode(str, enum.Enum):
    SMF_CLASSICAL = "smf_classical"
    MMF_MODAL_SPLIT = "mmf_modal_split"


class Direction(str, enum.Enum):
    UNIDIRECTIONAL = "unidirectional"
    BIDIRECTIONAL = "bidirectional"


@dataclass(frozen=True)
class Terminal:
    lens: LensSpec
    coupler: DcfCouplerSpec = field(default_factory=DcfCouplerSpec)
    launch: LaunchSpec = field(default_factory=LaunchSpec)
    receiver: ReceiverModel = field(default_factory=ReceiverModel)
    feed_chain: LinkBudgetChain = field(default_factory=LinkBudgetChain)  # transmitter -> δ
    post_chain: LinkBudgetChain = field(default_factory=LinkBudgetChain)  # μ -> M
    smf_post_chain: LinkBudgetChain = field(default_factory=LinkBudgetChain)  # σ -> S


@dataclass(frozen=True)
class LinkTopology:
    """Head-end terminal transmitting the downlink to the tail-end terminal.

    ``terminal_excess_loss_db`` lumps the static optical losses of both
    terminals that the paraxial model does not produce (window and lens
    transmission, focus error).
    """

    head: Terminal
    tail: Terminal
    smf: FiberSpec
    receive_aperture: FiberSpec
    span: float = 63.0
    terminal_excess_loss_db: float = 0.0
    coupling_mode: CouplingMode = CouplingMode.MMF_MODAL_SPLIT
    oscr_db: float = 22.0

    def __post_init__(self):
        object.__setattr__(self, "coupling_mode", CouplingMode(self.coupling_mode))
        if not self.span > 0:
            raise ValueError("span must be positive")
        if self.receive_aperture.kind.is_single_mode:
            raise ValueError("receive_aperture must be a multi-mode guide")

    @property
    def wavelength(self) -> float:
        return self.head.launch.wavelength

    @property
    def link_port(self) -> Port:
        return Port.MONITOR_M if self.coupling_mode is CouplingMode.MMF_MODAL_SPLIT else Port.MONITOR_S

    def receive_beam_radius(self) -> float:
        beam = collimate(self.smf.mode_field_radius, self.wavelength, self.head.lens)
        return propagate(beam, self.span).radius


def coupling_efficiencies(topology: LinkTopology, pointing) -> dict[str, np.ndarray]:
    """Lens capture and facet coupling for pointing errors of shape (..., 2)."""
    theta = np.hypot(*np.moveaxis(np.asarray(pointing, dtype=float), -1, 0))
    lam = topology.wavelength
    rx_lens = topology.tail.lens
    w_rx = topology.receive_beam_radius()
    spot = focused_spot_radius(w_rx, rx_lens.focal_length, lam)
    mis = facet_misalignment(theta, topology.span, rx_lens.focal_length)
    capture = encircled_fraction(w_rx, rx_lens.aperture_diameter / 2, topology.span * theta)
    return {
        "capture": np.asarray(capture),
        "smf": np.asarray(smf_coupling_efficiency(spot, topology.smf.mode_field_radius, mis, lam)),
        "mmf": np.asarray(mmf_coupling_efficiency(
            spot, topology.receive_aperture, mis, focused_numerical_aperture(w_rx, rx_lens.focal_length))),
    }


def instantaneous_rop(topology: LinkTopology, states: ChannelStates) -> dict[Port, np.ndarray]:
    """Received power at monitors S and M for each channel state, in dBm."""
    head, tail = topology.head, topology.tail
    eff = coupling_efficiencies(topology, states.pointing)
    common = (
        head.launch.power_dbm
        + head.feed_chain.net_db
        - coupler_transfer(head.coupler, Port.SMF_FEED, Port.DCF_AIR)
        - topology.terminal_excess_loss_db
        - states.excess_loss_db
        + linear_to_db(states.fade * eff["capture"])
    )
    s = (common + linear_to_db(eff["smf"]) - coupler_transfer(tail.coupler, Port.DCF_AIR, Port.SMF_FEED)
         + tail.smf_post_chain.net_db)
    m = (common + linear_to_db(eff["mmf"]) - coupler_transfer(tail.coupler, Port.DCF_AIR, Port.MMF_RECEIVE)
         + tail.post_chain.net_db)
    return {Port.MONITOR_S: np.asarray(s, dtype=float), Port.MONITOR_M: np.asarray(m, dtype=float)}


def channel_digest(states: ChannelStates) -> str:
    h = hashlib.sha256()
    for arr in (states.t, states.pointing, states.excess_loss_db, states.fade):
        h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    return h.hexdigest()[:16]


@dataclass
class PowerTrace:
    timestamps: np.ndarray
    rop_dbm: np.ndarray
    port: Port
    quantization: float | None = None
    weather_active: np.ndarray | None = None
    floor_dbm: float = MONITOR_FLOOR_DBM
    channel_digest: str | None = None

    def __post_init__(self):
        self.port = Port(self.port)
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.rop_dbm = np.asarray(self.rop_dbm, dtype=float)
        if self.timestamps.shape != self.rop_dbm.shape:
            raise ValueError("timestamps and rop_dbm must have equal length")
        if self.weather_active is None:
            self.weather_active = np.zeros(self.timestamps.shape, dtype=bool)
        self.weather_active = np.asarray(self.weather_active, dtype=bool)
        if self.weather_active.shape != self.timestamps.shape:
            raise ValueError("weather_active must match the trace length")

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def loss_of_signal(self) -> np.ndarray:
        return ~(self.rop_dbm >= self.floor_dbm)

    def monitor_reading(self) -> np.ndarray:
        """What the power monitor shows: clamped at the floor, optionally quantised."""
        x = np.where(self.loss_of_signal, self.floor_dbm, self.rop_dbm)
        if self.quantization:
            x = self.floor_dbm + np.round((x - self.floor_dbm) / self.quantization) * self.quantization
        return x


@dataclass
class RopStatistics:
    mean_dbm: float
    three_sigma_db: float
    peak_to_peak_db: float
    sample_count: int
    bin_edges: np.ndarray
    counts: np.ndarray

    def to_dict(self) -> dict:
        return {
            "mean_dbm": self.mean_dbm,
            "three_sigma_db": self.three_sigma_db,
            "peak_to_peak_db": self.peak_to_peak_db,
            "sample_count": self.sample_count,
            "bin_edges": self.bin_edges.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RopStatistics":
        return cls(d["mean_dbm"], d["three_sigma_db"], d["peak_to_peak_db"], d["sample_count"],
                   np.asarray(d["bin_edges"], dtype=float), np.asarray(d["counts"], dtype=int))


HIST_BIN_DB = 0.5


def rop_statistics(trace: PowerTrace, weather_filter: str = "all", bin_width: float = HIST_BIN_DB) -> RopStatistics:
    """Mean, 3-sigma spread, peak-to-peak and histogram of the monitor reading."""
    if weather_filter not in ("all", "clear_sky"):
        raise ValueError(f"unknown weather_filter {weather_filter!r}")
    x = trace.monitor_reading()
    if weather_filter == "clear_sky":
        x = x[~trace.weather_active]
    if x.size == 0:
        raise ValueError(f"no samples left after {weather_filter} filtering")
    lo = trace.floor_dbm
    top = lo + bin_width * max(1, math.ceil((x.max() - lo) / bin_width + 1e-9))
    edges = lo + bin_width * np.arange(round((top - lo) / bin_width) + 1)
    counts, _ = np.histogram(x, bins=edges)
    return RopStatistics(
        mean_dbm=float(np.mean(x)),
        three_sigma_db=float(3 * np.std(x)),
        peak_to_peak_db=float(np.ptp(x)),
        sample_count=int(x.size),
        bin_edges=edges,
        counts=counts,
    )


def spread_reduction(smf: PowerTrace, mmf: PowerTrace) -> float:
    """Peak-to-peak spread of the SMF monitor minus that of the MMF monitor, dB."""
    if smf.timestamps.shape != mmf.timestamps.shape or not np.array_equal(smf.timestamps, mmf.timestamps):
        raise ValueError("traces come from different campaigns (timestamps differ)")
    if smf.channel_digest and mmf.channel_digest and smf.channel_digest != mmf.channel_digest:
        raise ValueError("traces were driven by different channel realisations")
    return float(np.ptp(smf.monitor_reading()) - np.ptp(mmf.monitor_reading()))


@dataclass(frozen=True)
class ChannelProcesses:
    pointing: PointingProcess
    weather: WeatherTimeline
    scintillation: ScintillationModel


@dataclass
class CampaignResult:
    smf: PowerTrace
    mmf: PowerTrace
    temperature: np.ndarray
    coupling_smf: np.ndarray
    coupling_mmf: np.ndarray

    def statistics(self) -> dict[str, dict[str, RopStatistics]]:
        return {
            tr.port.value: {f: rop_statistics(tr, f) for f in ("all", "clear_sky")}
            for tr in (self.smf, self.mmf)
        }

    @property
    def spread_reduction_db(self) -> float:
        return spread_reduction(self.smf, self.mmf)


def run_month_campaign(
    topology: LinkTopology,
    processes: ChannelProcesses,
    seed: int,
    duration: float = 30 * DAY,
    dt: float = 60.0,
    quantization: float | None = None,
    sample_cap: int = DEFAULT_SAMPLE_CAP,
) -> CampaignResult:
    """Paired SMF/MMF monitor traces over one channel realisation."""
    states = generate_campaign_inputs(processes.pointing, processes.weather, processes.scintillation,
                                      duration, dt, RandomStream(seed), topology.span, sample_cap)
    return campaign_from_states(topology, states, quantization, processes.weather.temperature_swing)


def campaign_from_states(topology: LinkTopology, states: ChannelStates, quantization: float | None = None,
                         temperature_swing: float | None = None) -> CampaignResult:
    rop = instantaneous_rop(topology, states)
    eff = coupling_efficiencies(topology, states.pointing)
    digest = channel_digest(states)
    traces = [
        PowerTrace(states.t, rop[port], port, quantization, states.weather_active, channel_digest=digest)
        for port in (Port.MONITOR_S, Port.MONITOR_M)
    ]
    temp = (temperature_annotation(states.t, temperature_swing) if temperature_swing
            else np.full(states.t.shape, np.nan))
    return CampaignResult(traces[0], traces[1], temp, eff["smf"] * eff["capture"], eff["mmf"] * eff["capture"])


def smf_degradation_day(topology: LinkTopology, pointing: PointingProcess, loss_db: float = 10.0,
                        horizon_days: float = 60.0) -> float:
    """First day the deterministic pointing drives SMF coupling ``loss_db`` below aligned."""
    days = np.arange(0, horizon_days, 0.01)
    eff = coupling_efficiencies(topology, pointing.deterministic(days * DAY))
    aligned = coupling_efficiencies(topology, np.zeros(2))
    loss = linear_to_db(aligned["smf"] * aligned["capture"]) - linear_to_db(eff["smf"] * eff["capture"])
    hit = np.nonzero(loss >= loss_db)[0]
    return float(days[hit[0]]) if hit.size else math.inf


# -- EVM vs ROP ----------------------------------------------------------------

def payload_seeds(seed: int) -> tuple[int, int]:
    """Distinct downlink/uplink payload seeds derived from the run seed."""
    state = np.random.SeedSequence([int(seed), 0xD0, 0x0B]).generate_state(2, dtype=np.uint32)
    down, up = int(state[0]), int(state[1])
    return down, up if up != down else up ^ 1


@lru_cache(maxsize=8)
def _waveforms(cfg: OfdmConfig, seed: int):
    down, up = payload_seeds(seed)
    return modulate_random(cfg, down), modulate_random(cfg, up)


@dataclass
class SweepCurve:
    direction: Direction
    fso_path: bool
    rop_dbm: np.ndarray
    evm_percent: np.ndarray
    sensitivity_10pct_dbm: float

    def to_dict(self) -> dict:
        return {
            "direction": self.direction.value,
            "fso_path": self.fso_path,
            "rop_dbm": self.rop_dbm.tolist(),
            "evm_percent": self.evm_percent.tolist(),
            # no crossing inside the grid is stored as null
            "sensitivity_10pct_dbm": self.sensitivity_10pct_dbm if math.isfinite(self.sensitivity_10pct_dbm) else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepCurve":
        return cls(Direction(d["direction"]), d["fso_path"], np.asarray(d["rop_dbm"], dtype=float),
                   np.asarray(d["evm_percent"], dtype=float),
                   math.nan if d["sensitivity_10pct_dbm"] is None else d["sensitivity_10pct_dbm"])


def crossing_rop(rop_dbm, evm_percent, level: float = 10.0) -> float:
    """Interpolated ROP where a falling EVM curve first drops through ``level``."""
    rop = np.asarray(rop_dbm, dtype=float)
    e = np.asarray(evm_percent, dtype=float)
    order = np.argsort(rop)
    rop, e = rop[order], e[order]
    for i in range(rop.size - 1):
        if e[i] >= level > e[i + 1]:
            return float(rop[i] + (e[i] - level) * (rop[i + 1] - rop[i]) / (e[i] - e[i + 1]))
    return math.nan


def _sweep_point(args) -> EvmResult:
    cfg, rx, rop, seed, index, bidirectional, oscr, model, fso_path = args
    signal, interferer = _waveforms(cfg, seed)
    rng = RandomStream(seed, STREAM_NOISE).generator(index)
    return simulate_evm(signal, rop, rx, cfg, rng, fso_path=fso_path,
                        interferer=interferer if bidirectional else None, oscr_db=oscr,
                        crosstalk_model=model)


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def evm_points(topology: LinkTopology, cfg: OfdmConfig, rop_grid_dbm, direction: Direction | str, seed: int,
               fso_path: bool = True, crosstalk_model=CrosstalkModel.INTENSITY_INCOHERENT,
               workers: int = 1) -> list[EvmResult]:
    direction = Direction(direction)
    rx = topology.tail.receiver
    bidir = direction is Direction.BIDIRECTIONAL
    jobs = [(cfg, rx, float(r), seed, i, bidir, topology.oscr_db, CrosstalkModel(crosstalk_model), fso_path)
            for i, r in enumerate(np.asarray(rop_grid_dbm, dtype=float))]
    return _map(_sweep_point, jobs, workers)


def evm_vs_rop_sweep(topology: LinkTopology, rop_grid_dbm, direction: Direction | str, seed: int,
                     cfg: OfdmConfig | None = None, fso_path: bool = True,
                     crosstalk_model=CrosstalkModel.INTENSITY_INCOHERENT, workers: int = 1) -> SweepCurve:
    """Average EVM versus received power, with ROP set directly as by a VOA.

    Every grid point uses its own noise substream keyed by the point index, so
    uni- and bidirectional curves on the same grid share noise draws and the
    result does not depend on ``workers``.
    """
    cfg = cfg or OfdmConfig()
    grid = np.asarray(rop_grid_dbm, dtype=float)
    results = evm_points(topology, cfg, grid, direction, seed, fso_path, crosstalk_model, workers)
    e = np.array([r.average_evm_percent for r in results])
    return SweepCurve(Direction(direction), fso_path, grid, e, crossing_rop(grid, e))


# -- throughput ----------------------------------------------------------------

@dataclass(frozen=True)
class ThroughputModel:
    """Empirical per-second GbE rate from the fraction of time above sensitivity."""

    peak_rate: float = 952.0
    buffer_floor_rate: float = 744.0
    outage_mapping: str = "peak_times_good_fraction"

    def __post_init__(self):
        if not 0 < self.buffer_floor_rate <= self.peak_rate:
            raise ValueError("need 0 < buffer_floor_rate <= peak_rate")


@dataclass
class ThroughputTrace:
    seconds: np.ndarray
    rate_mbps: np.ndarray
    good_fraction: np.ndarray

    def __post_init__(self):
        for name in ("seconds", "rate_mbps", "good_fraction"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))

    def to_dict(self) -> dict:
        return {"seconds": self.seconds.tolist(), "rate_mbps": self.rate_mbps.tolist(),
                "good_fraction": self.good_fraction.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ThroughputTrace":
        return cls(np.asarray(d["seconds"], dtype=float), np.asarray(d["rate_mbps"], dtype=float),
                   np.asarray(d["good_fraction"], dtype=float))


def gbe_throughput_trace(trace: PowerTrace, model: ThroughputModel, sensitivity_dbm: float,
                         seed: int = 0) -> ThroughputTrace:
    """Per-second transfer rate in Mb/s from a sub-second ROP trace."""
    t = trace.timestamps
    if t.size < 2:
        raise ValueError("throughput needs a sub-second trace with at least two samples")
    step = float(np.median(np.diff(t)))
    if step >= 1.0:
        raise ValueError(f"trace resolution {step} s is not finer than 1 s")
    second = np.floor(t - t[0] + 1e-9).astype(int)
    good = (trace.rop_dbm >= sensitivity_dbm).astype(float)
    n = second.max() + 1
    counts = np.bincount(second, minlength=n)
    frac = np.bincount(second, weights=good, minlength=n) / np.maximum(counts, 1)
    gen = RandomStream(seed, STREAM_THROUGHPUT).generator()
    dither = gen.uniform(model.buffer_floor_rate, model.peak_rate, size=n)
    rate = np.where(frac >= 1.0, dither, model.peak_rate * frac)
    return ThroughputTrace(t[0] + np.arange(n, dtype=float), rate, frac)


@dataclass(frozen=True)
class ThroughputScenario:
    duration: float = 3600.0
    dt: float = 0.01
    start_day: float = 0.0
    gust: GustEvent | None = None
    sensitivity_dbm: float = -27.0
    model: ThroughputModel = field(default_factory=ThroughputModel)


def run_throughput_hour(topology: LinkTopology, processes: ChannelProcesses, scenario: ThroughputScenario,
                        seed: int, sample_cap: int = DEFAULT_SAMPLE_CAP) -> tuple[PowerTrace, ThroughputTrace]:
    """High-resolution clear-sky trace of the link port and its GbE rate.

    Gust times in ``scenario.gust`` are relative to the start of the hour.
    """
    t0 = scenario.start_day * DAY
    gusts = processes.pointing.gust_events
    if scenario.gust is not None:
        gusts = gusts + (replace(scenario.gust, time=scenario.gust.time + t0),)
    pointing = replace(processes.pointing, gust_events=gusts)
    states = generate_campaign_inputs(pointing, WeatherTimeline(), processes.scintillation, scenario.duration,
                                      scenario.dt, RandomStream(seed, 1), topology.span, sample_cap, t0=t0)
    rop = instantaneous_rop(topology, states)[topology.link_port]
    trace = PowerTrace(states.t - t0, rop, topology.link_port, channel_digest=channel_digest(states))
    return trace, gbe_throughput_trace(trace, scenario.model, scenario.sensitivity_dbm, seed)
