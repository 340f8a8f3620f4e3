"""Built-in scenario presets.

Each preset is a nested mapping in the same shape as a scenario TOML file.
Values marked as calibrated were produced by ``fsobridge calibrate`` with
seed 2023 and frozen here.
"""
from __future__ import annotations

import copy

DEFAULT_PRESET = "paper-2023"
DEFAULT_SEED = 2023

_PAPER_2023 = {
    "topology": {
        "span": 63.0,
        "wavelength": 1550e-9,
        "coupling_mode": "mmf_modal_split",
        "oscr_db": 22.0,
        "launch_power_dbm": 11.0,
        "launch_modulation_index": 0.25,
        "lens_focal_length": 0.1,
        "lens_aperture": 50.8e-3,
        # static terminal losses the paraxial model does not produce
        "terminal_excess_loss_db": 7.1,
        "coupler": {"smf_insertion_db": 0.9, "mmf_insertion_db": 1.5, "crosstalk_db": 33.1},
        "smf": {"core_diameter": 9e-6, "numerical_aperture": 0.12},
        "receive_aperture": {"core_diameter": 105e-6, "numerical_aperture": 0.22},
        "feed_chain": [{"name": "feeder_trunk", "loss_db": 5.5}],
        "post_chain": [{"name": "mfa", "loss_db": 8.8}, {"name": "trunk", "loss_db": 5.5}],
        "smf_post_chain": [{"name": "trunk", "loss_db": 5.5}],
    },
    "pointing": {
        # calibrated
        "static_residual": [0.0, 5.68466e-05],
        "drift_rate": [9.3287e-06, 0.0],
        "jitter_sigma": 3e-6,
    },
    "weather": {
        "rain_events": 19,
        "fog_events": 5,
        "rain_db_per_km": 6.0,
        "fog_db_per_km": 100.0,
        "rain_hours": [1.0, 6.0],
        "fog_hours": [2.0, 8.0],
        "temperature_swing": 24.3,
        # calibrated
        "log_amplitude_sigma": 0.2309,
        # sqrt(lambda * span) / crosswind at 5 m/s
        "correlation_time": 2e-3,
    },
    "ofdm": {
        "subcarrier_count": 128,
        "constellation": "qam64",
        "bandwidth": 250e6,
        "rf_carrier": 1.5e9,
        "cyclic_prefix_fraction": 0.125,
        "pilot_scheme": "comb",
        "pilot_spacing": 8,
        "preamble_symbols": 8,
        "symbols_per_frame": 100,
    },
    "receiver": {
        "responsivity": 0.9,
        "avalanche_gain": 10.0,
        "excess_noise_factor": 5.0,
        "dark_current": 1e-9,
        "saturation_rop_dbm": -17.0,
        "bandwidth": 400e6,
        "compression_coefficient": 0.07,
        "crosstalk_model": "intensity_incoherent",
        # calibrated
        "thermal_noise_current_density": 3.30144e-11,
        "modulation_index": 0.216242,
        "mpn_floor_percent": 5.63259,
    },
    "campaign": {
        "duration_days": 30.0,
        "dt": 60.0,
        "quantization_db": 0.0,
        "sample_cap": 5_000_000,
        "sweep_rop_min": -26.0,
        "sweep_rop_max": -14.0,
        "sweep_rop_step": 0.5,
        "subcarrier_rop": -17.0,
        "throughput": {
            "duration": 3600.0,
            "dt": 0.01,
            "start_day": 0.0,
            "sensitivity_dbm": -27.0,
            "peak_rate": 952.0,
            "buffer_floor_rate": 744.0,
            "gust_time": 1800.0,
            "gust_duration": 1.0,
            "gust_azimuth": 0.0,
            # calibrated
            "gust_peak": 0.000372358,
        },
    },
}

PRESETS = {DEFAULT_PRESET: _PAPER_2023}


def preset(name: str = DEFAULT_PRESET) -> dict:
    """Deep copy of a named preset."""
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
