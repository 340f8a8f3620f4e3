"""Photonic components: DCF coupler, launch, budget chain and APD front-end."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.constants import e as ELECTRON_CHARGE


class TopologyError(ValueError):
    """Raised for a port pair the coupler does not connect."""


def dbm_to_watt(dbm):
    return 1e-3 * np.power(10.0, np.asarray(dbm, dtype=float) / 10)


def watt_to_dbm(watt):
    with np.errstate(divide="ignore"):
        return 10 * np.log10(np.asarray(watt, dtype=float) / 1e-3)


def linear_to_db(x):
    with np.errstate(divide="ignore"):
        return 10 * np.log10(np.asarray(x, dtype=float))


class Port(str, enum.Enum):
    """Topology markers of the bridge."""

    SMF_FEED = "smf_feed"  # σ
    MMF_RECEIVE = "mmf_receive"  # μ
    DCF_AIR = "dcf_air"
    DOWNLINK_FEED = "downlink_feed"  # δ
    UPLINK_FEED = "uplink_feed"  # ν
    MONITOR_S = "monitor_S"
    MONITOR_M = "monitor_M"
    MFA = "mfa"  # φ

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]


_SYMBOLS = {
    Port.SMF_FEED: "σ",
    Port.MMF_RECEIVE: "μ",
    Port.DCF_AIR: "air",
    Port.DOWNLINK_FEED: "δ",
    Port.UPLINK_FEED: "ν",
    Port.MONITOR_S: "S",
    Port.MONITOR_M: "M",
    Port.MFA: "φ",
}


@dataclass(frozen=True)
class DcfCouplerSpec:
    smf_insertion_db: float = 0.9
    mmf_insertion_db: float = 1.5
    crosstalk_db: float = 33.1
    reference_wavelength: float = 1550e-9
    flatness_note: str = "flat across many wavebands"

    def __post_init__(self):
        if self.smf_insertion_db < 0 or self.mmf_insertion_db < 0:
            raise ValueError("coupler insertion losses must be >= 0 dB")
        if not self.crosstalk_db >= 20:
            raise ValueError(f"crosstalk isolation {self.crosstalk_db} dB is below the 20 dB sanity floor")


def coupler_transfer(spec: DcfCouplerSpec, src: Port, dst: Port) -> float:
    """Loss in dB between two coupler ports (reciprocal)."""
    pair = frozenset((Port(src), Port(dst)))
    table = {
        frozenset((Port.SMF_FEED, Port.DCF_AIR)): spec.smf_insertion_db,
        frozenset((Port.DCF_AIR, Port.MMF_RECEIVE)): spec.mmf_insertion_db,
        frozenset((Port.SMF_FEED, Port.MMF_RECEIVE)): spec.crosstalk_db,
    }
    try:
        return table[pair]
    except KeyError:
        raise TopologyError(f"coupler has no path {Port(src).value} -> {Port(dst).value}") from None


@dataclass(frozen=True)
class LaunchSpec:
    power_dbm: float = 11.0
    wavelength: float = 1550e-9
    modulation_index: float = 0.25

    def __post_init__(self):
        if not math.isfinite(self.power_dbm):
            raise ValueError("launch power must be finite")
        if not 0 < self.modulation_index <= 1:
            raise ValueError(f"modulation_index must lie in (0, 1], got {self.modulation_index}")


@dataclass(frozen=True)
class BudgetElement:
    name: str
    loss_db: float | None = None
    gain_db: float | None = None

    def __post_init__(self):
        if (self.loss_db is None) == (self.gain_db is None):
            raise ValueError(f"budget element {self.name!r} needs exactly one of loss_db / gain_db")
        value = self.loss_db if self.loss_db is not None else self.gain_db
        if not math.isfinite(value):
            raise ValueError(f"budget element {self.name!r} is not finite")

    @property
    def net_db(self) -> float:
        return self.gain_db if self.gain_db is not None else -self.loss_db

    def to_dict(self) -> dict:
        if self.loss_db is not None:
            return {"name": self.name, "loss_db": self.loss_db}
        return {"name": self.name, "gain_db": self.gain_db}


@dataclass(frozen=True)
class LinkBudgetChain:
    elements: tuple[BudgetElement, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    @classmethod
    def losses(cls, **named_losses: float) -> "LinkBudgetChain":
        return cls(tuple(BudgetElement(k, loss_db=v) for k, v in named_losses.items()))

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> "LinkBudgetChain":
        return cls(tuple(BudgetElement(**item) for item in items))

    def to_list(self) -> list[dict]:
        return [el.to_dict() for el in self.elements]

    @property
    def net_db(self) -> float:
        return math.fsum(el.net_db for el in self.elements)

    def __add__(self, other: "LinkBudgetChain") -> "LinkBudgetChain":
        return LinkBudgetChain(self.elements + other.elements)


def budget_rop(launch: LaunchSpec, chain: LinkBudgetChain) -> float:
    """Received power in dBm after walking the chain."""
    return launch.power_dbm + chain.net_db


@dataclass(frozen=True)
class ApdParams:
    responsivity: float = 0.9  # A/W
    avalanche_gain: float = 10.0
    excess_noise_factor: float = 5.0
    thermal_noise_current_density: float = 2e-12  # A/sqrt(Hz)
    dark_current: float = 1e-9  # A, primary
    saturation_rop_dbm: float = -17.0
    bandwidth: float = 400e6
    compression_coefficient: float = 0.07

    def __post_init__(self):
        for name in ("responsivity", "avalanche_gain", "excess_noise_factor",
                     "thermal_noise_current_density", "dark_current", "bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"ApdParams.{name} must be positive")
        if self.compression_coefficient < 0:
            raise ValueError("compression_coefficient must be >= 0")


@dataclass(frozen=True)
class ApdOutput:
    signal_current: float
    noise_variance: float
    saturated: bool
    electrical_snr_db: float
    compression: float


MAX_COMPRESSION = 0.1


def compression_level(rop_dbm: float, params: ApdParams) -> float:
    """Third-order coefficient applied to the unit-rms signal current.

    Zero at and below the saturation ROP, growing linearly with the excess
    optical power above it.
    """
    excess = 10 ** ((rop_dbm - params.saturation_rop_dbm) / 10) - 1
    return min(MAX_COMPRESSION, params.compression_coefficient * max(0.0, excess))


def apd_detect(rop_dbm: float, params: ApdParams, modulation_index: float = 1.0) -> ApdOutput:
    """Photocurrent, noise and electrical SNR of the APD receiver.

    The AC signal is ``m * M * R * P`` (rms). Noise is multiplied shot noise on
    signal plus dark current, and thermal noise, both over ``params.bandwidth``.
    Above the saturation ROP the AC gain is compressed by ``1 - 3 * gamma``.
    """
    power = float(dbm_to_watt(rop_dbm)) if rop_dbm != -math.inf else 0.0
    m, r, f, b = params.avalanche_gain, params.responsivity, params.excess_noise_factor, params.bandwidth
    primary = r * power
    shot = 2 * ELECTRON_CHARGE * m**2 * f * (primary + params.dark_current) * b
    thermal = params.thermal_noise_current_density**2 * b
    noise = shot + thermal
    gamma = compression_level(rop_dbm, params) if power > 0 else 0.0
    signal = m * primary * (1 - 3 * gamma)
    ac_power = (modulation_index * signal) ** 2
    snr_db = 10 * math.log10(ac_power / noise) if ac_power > 0 else -math.inf
    return ApdOutput(
        signal_current=signal,
        noise_variance=noise,
        saturated=bool(rop_dbm >= params.saturation_rop_dbm),
        electrical_snr_db=snr_db,
        compression=gamma,
    )


def crosstalk_level(uplink_launch: LaunchSpec, spec: DcfCouplerSpec, extra_path_loss_db: float = 0.0) -> float:
    """Uplink power leaking into the downlink receive port, in dBm."""
    return uplink_launch.power_dbm - spec.crosstalk_db - extra_path_loss_db


def oscr_db(signal_dbm: float, crosstalk_dbm: float) -> float:
    return signal_dbm - crosstalk_dbm
