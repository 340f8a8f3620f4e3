"""OFDM radio waveform over an intensity-modulated link.

The modem works on a real passband waveform sampled at ``fft_size *
subcarrier_spacing``. Synchronisation is ideal: frame boundaries and the
carrier phase reference are known to the receiver.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.signal import hilbert


class CorruptedWaveformError(ValueError):
    pass


class CorrelatedCrosstalkError(ValueError):
    pass


class Constellation(str, enum.Enum):
    QAM64 = "qam64"
    QAM16 = "qam16"
    QPSK = "qpsk"


class PilotScheme(str, enum.Enum):
    COMB = "comb"
    PREAMBLE = "preamble"


class CrosstalkModel(str, enum.Enum):
    INTENSITY_INCOHERENT = "intensity_incoherent"
    INBAND_BEAT = "inband_beat"


def qam_points(constellation: Constellation | str) -> np.ndarray:
    """Square QAM alphabet normalised to unit average power."""
    order = {"qpsk": 4, "qam16": 16, "qam64": 64}[Constellation(constellation).value]
    side = int(math.isqrt(order))
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    pts = (levels[:, None] + 1j * levels[None, :]).ravel()
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


@dataclass(frozen=True)
class OfdmConfig:
    subcarrier_count: int = 128
    constellation: Constellation = Constellation.QAM64
    bandwidth: float = 250e6
    rf_carrier: float = 1.5e9
    cyclic_prefix_fraction: float = 0.125
    pilot_scheme: PilotScheme = PilotScheme.COMB
    pilot_spacing: int = 8
    preamble_symbols: int = 8
    symbols_per_frame: int = 100

    def __post_init__(self):
        object.__setattr__(self, "constellation", Constellation(self.constellation))
        object.__setattr__(self, "pilot_scheme", PilotScheme(self.pilot_scheme))
        n = self.subcarrier_count
        if n < 2 or n & (n - 1):
            raise ValueError(f"subcarrier_count must be a power of two, got {n}")
        if not 0 <= self.cyclic_prefix_fraction < 0.5:
            raise ValueError("cyclic_prefix_fraction must lie in [0, 0.5)")
        if not 0 < self.bandwidth < 2 * self.rf_carrier:
            raise ValueError("bandwidth must be positive and below twice the RF carrier")
        if self.symbols_per_frame < 1:
            raise ValueError("symbols_per_frame must be >= 1")
        if self.pilot_scheme is PilotScheme.COMB and not 1 < self.pilot_spacing <= n:
            raise ValueError("pilot_spacing must lie in (1, subcarrier_count]")

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth / self.subcarrier_count

    @property
    def fft_size(self) -> int:
        """Smallest power of two whose sample rate meets passband Nyquist."""
        need = 2 * (self.rf_carrier + self.bandwidth / 2) / self.subcarrier_spacing
        return 1 << max(1, math.ceil(math.log2(need)))

    @property
    def sample_rate(self) -> float:
        return self.fft_size * self.subcarrier_spacing

    @property
    def cp_length(self) -> int:
        return int(round(self.cyclic_prefix_fraction * self.fft_size))

    @property
    def pilot_indices(self) -> np.ndarray:
        if self.pilot_scheme is PilotScheme.PREAMBLE:
            return np.array([], dtype=int)
        return np.arange(0, self.subcarrier_count, self.pilot_spacing)

    @property
    def data_indices(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.subcarrier_count), self.pilot_indices)

    @property
    def training_symbols(self) -> int:
        return self.preamble_symbols if self.pilot_scheme is PilotScheme.PREAMBLE else 0

    @property
    def total_symbols(self) -> int:
        return self.training_symbols + self.symbols_per_frame

    @property
    def payload_length(self) -> int:
        return self.data_indices.size * self.symbols_per_frame

    @property
    def samples_per_frame(self) -> int:
        return self.total_symbols * (self.fft_size + self.cp_length)

    def subcarrier_frequencies(self) -> np.ndarray:
        """Absolute RF frequency of each subcarrier."""
        k = np.arange(self.subcarrier_count) - self.subcarrier_count // 2
        return self.rf_carrier + k * self.subcarrier_spacing

    def fft_bins(self) -> np.ndarray:
        k = np.arange(self.subcarrier_count) - self.subcarrier_count // 2
        return k % self.fft_size

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["constellation"] = self.constellation.value
        d["pilot_scheme"] = self.pilot_scheme.value
        return d

    @cached_property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def pilot_grid(self) -> np.ndarray:
        """Known training values, shape ``(total_symbols, subcarrier_count)``."""
        gen = np.random.Generator(np.random.PCG64(0x5EED_0F_D))
        signs = gen.integers(0, 4, size=(self.total_symbols, self.subcarrier_count))
        return np.exp(1j * (math.pi / 4 + math.pi / 2 * signs))


def random_payload(cfg: OfdmConfig, seed: int) -> np.ndarray:
    """Uniform constellation payload for one frame, reproducible from ``seed``."""
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0xDA7A])))
    pts = qam_points(cfg.constellation)
    return pts[gen.integers(0, pts.size, size=cfg.payload_length)]


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: float
    config_hash: str
    payload_seed: int | None = None
    reference: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1:
            raise ValueError("waveform samples must be one-dimensional")

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return dataclasses.replace(self, samples=samples)

    @property
    def power(self) -> float:
        return float(np.mean(self.samples**2))


def _symbol_grid(payload: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    grid = cfg.pilot_grid().copy()
    body = grid[cfg.training_symbols:]
    body[:, cfg.data_indices] = payload.reshape(cfg.symbols_per_frame, cfg.data_indices.size)
    return grid


def ofdm_modulate(payload_symbols, cfg: OfdmConfig, payload_seed: int | None = None) -> Waveform:
    """Map a frame of constellation symbols onto a unit-power passband waveform."""
    payload = np.asarray(payload_symbols, dtype=complex).ravel()
    if payload.size != cfg.payload_length:
        raise ValueError(
            f"payload has {payload.size} symbols, frame needs {cfg.payload_length} "
            f"({cfg.data_indices.size} data subcarriers x {cfg.symbols_per_frame} symbols)"
        )
    grid = _symbol_grid(payload, cfg)
    nfft, cp = cfg.fft_size, cfg.cp_length
    spectrum = np.zeros((cfg.total_symbols, nfft), dtype=complex)
    spectrum[:, cfg.fft_bins()] = grid
    body = np.fft.ifft(spectrum, axis=1) * (nfft / math.sqrt(cfg.subcarrier_count))
    baseband = np.concatenate([body[:, nfft - cp:], body], axis=1).ravel()
    n = np.arange(baseband.size)
    carrier = np.exp(2j * math.pi * cfg.rf_carrier / cfg.sample_rate * n)
    passband = math.sqrt(2) * np.real(baseband * carrier)
    passband /= math.sqrt(np.mean(passband**2))
    return Waveform(passband, cfg.sample_rate, cfg.config_hash, payload_seed, payload)


def modulate_random(cfg: OfdmConfig, seed: int) -> Waveform:
    return ofdm_modulate(random_payload(cfg, seed), cfg, payload_seed=seed)


@dataclass
class ConstellationGrid:
    """Equalised received symbols and their references, ``(symbols, subcarriers)``."""

    subcarrier_index: np.ndarray
    received: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        if self.received.shape != self.reference.shape:
            raise ValueError("received and reference grids differ in shape")
        if self.received.ndim != 2 or self.received.shape[1] != self.subcarrier_index.size:
            raise ValueError("grid must be (symbols, subcarriers) matching subcarrier_index")


def _reference_payload(wave: Waveform, cfg: OfdmConfig, reference) -> np.ndarray:
    if reference is not None:
        return np.asarray(reference, dtype=complex).ravel()
    if wave.reference is not None:
        return wave.reference
    if wave.payload_seed is not None:
        return random_payload(cfg, wave.payload_seed)
    raise ValueError("no reference payload: pass reference= or use a seeded waveform")


def ofdm_demodulate(wave: Waveform, cfg: OfdmConfig, reference=None) -> ConstellationGrid:
    """Downconvert, strip the cyclic prefix, FFT and equalise from the pilots."""
    if wave.config_hash != cfg.config_hash:
        raise ValueError(f"waveform was built for config {wave.config_hash}, not {cfg.config_hash}")
    if not np.all(np.isfinite(wave.samples)):
        raise CorruptedWaveformError("waveform contains non-finite samples")
    if wave.samples.size != cfg.samples_per_frame:
        raise CorruptedWaveformError(f"expected {cfg.samples_per_frame} samples, got {wave.samples.size}")
    nfft, cp = cfg.fft_size, cfg.cp_length
    n = np.arange(wave.samples.size)
    baseband = math.sqrt(2) * wave.samples * np.exp(-2j * math.pi * cfg.rf_carrier / cfg.sample_rate * n)
    blocks = baseband.reshape(cfg.total_symbols, nfft + cp)[:, cp:]
    rx = np.fft.fft(blocks, axis=1)[:, cfg.fft_bins()] * (math.sqrt(cfg.subcarrier_count) / nfft)

    tx = _symbol_grid(_reference_payload(wave, cfg, reference), cfg)
    if cfg.pilot_scheme is PilotScheme.COMB:
        p = cfg.pilot_indices
        h_p = np.mean(rx[:, p] / tx[:, p], axis=0)
        k = np.arange(cfg.subcarrier_count)
        h = np.interp(k, p, h_p.real) + 1j * np.interp(k, p, h_p.imag)
    else:
        t = cfg.training_symbols
        h = np.mean(rx[:t] / tx[:t], axis=0)
    if np.any(h == 0):
        raise CorruptedWaveformError("channel estimate has a null; no signal on some subcarriers")

    body = slice(cfg.training_symbols, None)
    d = cfg.data_indices
    return ConstellationGrid(d, rx[body][:, d] / h[d], tx[body][:, d])


@dataclass
class EvmResult:
    subcarrier_index: np.ndarray
    per_subcarrier_evm_percent: np.ndarray
    average_evm_percent: float


def evm(grid: ConstellationGrid) -> EvmResult:
    """Data-aided rms EVM per subcarrier and rms-averaged across subcarriers."""
    if grid.received.size == 0 or grid.received.shape[0] == 0:
        raise ValueError("constellation grid has an empty subcarrier")
    err = np.sqrt(np.mean(np.abs(grid.received - grid.reference) ** 2, axis=0))
    ref = np.sqrt(np.mean(np.abs(grid.reference) ** 2, axis=0))
    if np.any(ref == 0):
        raise ValueError("reference symbols on a subcarrier are all zero")
    per = 100 * err / ref
    return EvmResult(grid.subcarrier_index, per, float(np.sqrt(np.mean(per**2))))


def inband_noise_std(cfg: OfdmConfig, snr_db: float, signal_power: float = 1.0) -> float:
    """Per-sample std of white noise giving ``snr_db`` over the occupied band."""
    if snr_db == math.inf:
        return 0.0
    occupied = cfg.subcarrier_count * cfg.subcarrier_spacing
    var = signal_power * 10 ** (-snr_db / 10) * (cfg.sample_rate / 2) / occupied
    return math.sqrt(var)


def add_awgn(wave: Waveform, snr_db: float, cfg: OfdmConfig, rng: np.random.Generator,
             signal_power: float | None = None) -> Waveform:
    """Add white Gaussian noise at an in-band electrical SNR."""
    power = wave.power if signal_power is None else signal_power
    std = inband_noise_std(cfg, snr_db, power)
    if std == 0:
        return wave
    return wave.with_samples(wave.samples + std * rng.standard_normal(wave.samples.size))


def inject_crosstalk(signal: Waveform, interferer: Waveform, oscr_db: float,
                     model: CrosstalkModel | str = CrosstalkModel.INTENSITY_INCOHERENT,
                     beat_offset_hz: float = 50e6, delay_samples: int | None = None) -> Waveform:
    """Add a leaked uplink waveform at a given optical signal-to-crosstalk ratio.

    The interferer is circularly delayed by ``delay_samples`` (half a frame by
    default) so its pilots do not line up with the signal's.

    ``intensity_incoherent`` adds the interferer photocurrent, so its
    electrical power sits ``2 * oscr_db`` below the signal. ``inband_beat``
    additionally adds the signal-interferer field beat, suppressed by only
    ``oscr_db`` and shifted by ``beat_offset_hz``; a pessimistic bound.
    """
    model = CrosstalkModel(model)
    if interferer.config_hash != signal.config_hash or interferer.samples.size != signal.samples.size:
        raise ValueError("interferer must share the signal's OFDM configuration and length")
    if signal.payload_seed is not None and signal.payload_seed == interferer.payload_seed:
        raise CorrelatedCrosstalkError("interferer payload seed equals the signal's; crosstalk must be decorrelated")
    if oscr_db == math.inf:
        return signal
    if delay_samples is None:
        delay_samples = signal.samples.size // 2
    x = np.roll(interferer.samples, delay_samples) / math.sqrt(interferer.power)
    out = signal.samples + 10 ** (-oscr_db / 10) * x
    if model is CrosstalkModel.INBAND_BEAT:
        n = np.arange(x.size)
        shifted = np.real(hilbert(x) * np.exp(2j * math.pi * beat_offset_hz / signal.sample_rate * n))
        out = out + 10 ** (-oscr_db / 20) * shifted
    return signal.with_samples(out)


def evm_vs_snr_reference(snr_db_list) -> np.ndarray:
    """Analytic data-aided EVM (%) for AWGN at the given in-band SNRs."""
    snr = np.asarray(snr_db_list, dtype=float)
    if np.any(np.isnan(snr)):
        raise ValueError("SNR values must not be NaN")
    return 100 * np.power(10.0, -snr / 20)


def papr_db(wave: Waveform) -> float:
    s = wave.samples
    return float(10 * np.log10(np.max(s**2) / np.mean(s**2)))


def band_power_fraction(wave: Waveform, f_lo: float, f_hi: float) -> float:
    spec = np.abs(np.fft.rfft(wave.samples)) ** 2
    freqs = np.fft.rfftfreq(wave.samples.size, 1 / wave.sample_rate)
    inside = (freqs >= f_lo) & (freqs <= f_hi)
    return float(spec[inside].sum() / spec.sum())


def write_waveform(wave: Waveform, path: str | Path, cfg: OfdmConfig | None = None) -> Path:
    """Write raw little-endian float32 samples plus a ``.json`` sidecar."""
    path = Path(path)
    try:
        path.write_bytes(wave.samples.astype("<f4").tobytes())
        meta = {
            "sample_rate": wave.sample_rate,
            "config_hash": wave.config_hash,
            "payload_seed": wave.payload_seed,
            "n_samples": int(wave.samples.size),
            "dtype": "float32-le",
        }
        if cfg is not None:
            meta["config"] = cfg.to_dict()
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write waveform to {path}: {exc}") from exc
    return path


def read_waveform(path: str | Path) -> Waveform:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    samples = np.frombuffer(path.read_bytes(), dtype="<f4").astype(float)
    if samples.size != meta["n_samples"]:
        raise CorruptedWaveformError(f"{path}: expected {meta['n_samples']} samples, found {samples.size}")
    return Waveform(samples, meta["sample_rate"], meta["config_hash"], meta.get("payload_seed"))


def write_evm_csv(result: EvmResult, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subcarrier", "evm_percent"])
        for k, v in zip(result.subcarrier_index, result.per_subcarrier_evm_percent):
            w.writerow([int(k), float(v)])
    return path
