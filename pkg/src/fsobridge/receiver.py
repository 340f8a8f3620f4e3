"""APD receive chain applied to OFDM waveforms at a set received power."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .components import ApdParams, apd_detect, compression_level, dbm_to_watt
from .ofdm import (
    CrosstalkModel,
    EvmResult,
    OfdmConfig,
    Waveform,
    add_awgn,
    evm,
    inject_crosstalk,
    ofdm_demodulate,
)


@dataclass(frozen=True)
class ReceiverModel:
    """APD front-end plus the link-dependent EVM floor.

    ``mpn_floor_percent`` is the white EVM floor from mode-partition noise,
    present only when the signal crossed the FSO path.
    """

    apd: ApdParams = field(default_factory=ApdParams)
    modulation_index: float = 0.25
    mpn_floor_percent: float = 0.0

    def __post_init__(self):
        if not 0 < self.modulation_index <= 1:
            raise ValueError("modulation_index must lie in (0, 1]")
        if self.mpn_floor_percent < 0:
            raise ValueError("mpn_floor_percent must be >= 0")

    def noise_snr_db(self, rop_dbm: float) -> float:
        """In-band SNR from shot, dark and thermal noise, uncompressed signal."""
        p = self.apd
        ac = self.modulation_index * p.avalanche_gain * p.responsivity * float(dbm_to_watt(rop_dbm))
        return 10 * math.log10(ac**2 / apd_detect(rop_dbm, p, self.modulation_index).noise_variance)

    def total_snr_db(self, rop_dbm: float, fso_path: bool = True) -> float:
        inv = 10 ** (-self.noise_snr_db(rop_dbm) / 10)
        if fso_path:
            inv += (self.mpn_floor_percent / 100) ** 2
        return -10 * math.log10(inv)

    def analytic_evm_percent(self, rop_dbm: float, fso_path: bool = True) -> float:
        """EVM of the noise terms only; saturation distortion is not included."""
        return 100 * 10 ** (-self.total_snr_db(rop_dbm, fso_path) / 20)


def soft_compress(x: np.ndarray, gamma: float) -> np.ndarray:
    """Cubic soft limiter ``x - gamma x^3``, flat beyond its turning point."""
    if gamma <= 0:
        return x
    knee = 1 / math.sqrt(3 * gamma)
    y = x - gamma * x**3
    return np.where(np.abs(x) <= knee, y, np.sign(x) * (2 / 3) * knee)


def receive(wave: Waveform, rop_dbm: float, rx: ReceiverModel, cfg: OfdmConfig,
            rng: np.random.Generator, fso_path: bool = True) -> Waveform:
    """Detected, normalised photocurrent waveform at ``rop_dbm``.

    The input is the unit-rms AC drive (signal plus any crosstalk). APD
    compression acts on it, then one Gaussian draw carries receiver noise and
    the mode-partition floor.
    """
    gamma = compression_level(rop_dbm, rx.apd)
    detected = wave.with_samples(soft_compress(wave.samples, gamma))
    return add_awgn(detected, rx.total_snr_db(rop_dbm, fso_path), cfg, rng, signal_power=1.0)


def simulate_evm(signal: Waveform, rop_dbm: float, rx: ReceiverModel, cfg: OfdmConfig,
                 rng: np.random.Generator, *, fso_path: bool = True,
                 interferer: Waveform | None = None, oscr_db: float = math.inf,
                 crosstalk_model: CrosstalkModel | str = CrosstalkModel.INTENSITY_INCOHERENT) -> EvmResult:
    """Monte-Carlo EVM of one frame through the receive chain."""
    drive = signal
    if interferer is not None:
        drive = inject_crosstalk(signal, interferer, oscr_db, crosstalk_model)
    out = receive(drive, rop_dbm, rx, cfg, rng, fso_path)
    return evm(ofdm_demodulate(out, cfg))
