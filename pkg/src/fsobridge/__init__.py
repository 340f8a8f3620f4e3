"""Physical-layer simulator of a full-duplex free-space optical bridge.

A double-clad fiber coupler at each terminal transmits through its single-mode
core and receives through its multi-mode inner cladding, which makes the
receive side tolerant to pointing errors.
"""
from .campaign import (
    CouplingMode,
    Direction,
    LinkTopology,
    PowerTrace,
    Terminal,
    ThroughputModel,
    evm_vs_rop_sweep,
    gbe_throughput_trace,
    instantaneous_rop,
    rop_statistics,
    run_month_campaign,
    spread_reduction,
)
from .config import ConfigError, ScenarioConfig, build_config, load_config
from .report import LinkReport, emit_report, load_report

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CouplingMode",
    "Direction",
    "LinkReport",
    "LinkTopology",
    "PowerTrace",
    "ScenarioConfig",
    "Terminal",
    "ThroughputModel",
    "build_config",
    "emit_report",
    "evm_vs_rop_sweep",
    "gbe_throughput_trace",
    "instantaneous_rop",
    "load_config",
    "load_report",
    "rop_statistics",
    "run_month_campaign",
    "spread_reduction",
]
