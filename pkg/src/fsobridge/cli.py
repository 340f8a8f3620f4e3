"""Command-line entry point: ``fsobridge {simulate,sweep,throughput,calibrate,report}``."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

from .calibration import CalibrationError, run_calibration
from .campaign import (
    CampaignResult,
    Direction,
    evm_points,
    evm_vs_rop_sweep,
    run_month_campaign,
    run_throughput_hour,
    smf_degradation_day,
)
from .channel import DAY, CampaignTooLargeError
from .config import ConfigError, ScenarioConfig, load_config
from .presets import DEFAULT_SEED, PRESETS
from .report import LinkReport, SubcarrierEvm, emit_report, load_report, write_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CALIBRATION = 3

log = logging.getLogger("fsobridge")


def _config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(cfg.to_toml().encode()).hexdigest()[:16]


def _finite(x: float):
    return x if math.isfinite(x) else None


def _new_report(cfg: ScenarioConfig, seed: int) -> LinkReport:
    return LinkReport(seed=seed, preset=cfg.preset, config_hash=_config_hash(cfg))


def month_report(cfg: ScenarioConfig, seed: int) -> LinkReport:
    c = cfg.campaign
    topology = cfg.topology_model()
    res: CampaignResult = run_month_campaign(topology, cfg.processes(seed), seed, c.duration_days * DAY, c.dt,
                                             c.quantization_db or None, c.sample_cap)
    rep = _new_report(cfg, seed)
    rep.traces = {res.smf.port.value: res.smf, res.mmf.port.value: res.mmf}
    rep.temperature = res.temperature
    rep.statistics = res.statistics()
    rep.spread_reduction_db = res.spread_reduction_db
    rep.extra["smf_degradation_day"] = _finite(smf_degradation_day(topology, cfg.pointing_process()))
    return rep


def sweep_report(cfg: ScenarioConfig, seed: int, workers: int) -> LinkReport:
    topology = cfg.topology_model()
    ofdm = cfg.ofdm_config()
    grid = cfg.rop_grid()
    model = cfg.receiver.crosstalk_model
    rep = _new_report(cfg, seed)
    runs = {
        "unidirectional": (Direction.UNIDIRECTIONAL, True),
        "bidirectional": (Direction.BIDIRECTIONAL, True),
        "back_to_back": (Direction.UNIDIRECTIONAL, False),
    }
    for name, (direction, fso) in runs.items():
        rep.evm_curves[name] = evm_vs_rop_sweep(topology, grid, direction, seed, ofdm, fso, model, workers)
    rop = cfg.campaign.subcarrier_rop
    for name in ("unidirectional", "bidirectional"):
        direction, fso = runs[name]
        (res,) = evm_points(topology, ofdm, [rop], direction, seed, fso, model)
        rep.evm_subcarrier.append(SubcarrierEvm(name, rop, res.subcarrier_index, res.per_subcarrier_evm_percent))
        rep.extra[f"{name}.average_evm_at_{rop:g}dbm"] = res.average_evm_percent
    uni, bi = rep.evm_curves["unidirectional"], rep.evm_curves["bidirectional"]
    rep.extra["sensitivity_gap_db"] = _finite(abs(uni.sensitivity_10pct_dbm - bi.sensitivity_10pct_dbm))
    return rep


def throughput_report(cfg: ScenarioConfig, seed: int) -> LinkReport:
    scenario = cfg.throughput_scenario()
    trace, tp = run_throughput_hour(cfg.topology_model(), cfg.processes(seed), scenario, seed,
                                    cfg.campaign.sample_cap)
    rep = _new_report(cfg, seed)
    rep.throughput = tp
    rep.extra["sensitivity_dbm"] = scenario.sensitivity_dbm
    rep.extra["link_port"] = trace.port.value
    if scenario.gust is not None:
        second = int(math.floor(scenario.gust.time))
        rep.extra["gust_second"] = second
        rep.extra["gust_rate_mbps"] = float(tp.rate_mbps[second])
    return rep


def _write_calibration(cfg: ScenarioConfig, seed: int, workers: int, out: Path, fmt: str) -> list[Path]:
    run = run_calibration(cfg, seed, workers)
    frozen = run.frozen.apply(cfg)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "calibration.toml"]
    paths[0].write_text(frozen.to_toml(), encoding="utf-8")
    summary = {k: (_finite(v) if isinstance(v, float) else v) for k, v in run.summary().items()}
    if fmt == "json":
        p = out / "calibration.json"
        p.write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    else:
        p = write_csv(out / "calibration.csv", ["key", "value"], sorted(summary.items()))
    paths.append(p)
    return paths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsobridge", description="Full-duplex FSO bridge simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario TOML file")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--preset", choices=sorted(PRESETS), default=None)
    common.add_argument("--out", type=Path, default=Path("out"))
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="one-month paired SMF/MMF campaign")
    sub.add_parser("sweep", parents=[common], help="EVM versus ROP, uni- and bidirectional")
    sub.add_parser("throughput", parents=[common], help="one-hour GbE throughput trace")
    sub.add_parser("calibrate", parents=[common], help="solve receiver, pointing and gust parameters")
    rp = sub.add_parser("report", parents=[common], help="re-emit a saved JSON report")
    rp.add_argument("input", type=Path, help="report.json or the directory holding it")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    fmt = "json" if args.format == "json" else "csv_bundle"
    try:
        if args.command == "report":
            paths = emit_report(load_report(args.input), args.out, fmt)
        else:
            cfg = load_config(args.config, args.preset)
            log.info("running %s with seed %d", args.command, args.seed)
            if args.command == "calibrate":
                paths = _write_calibration(cfg, args.seed, args.workers, args.out, args.format)
            else:
                if args.command == "simulate":
                    rep = month_report(cfg, args.seed)
                elif args.command == "sweep":
                    rep = sweep_report(cfg, args.seed, args.workers)
                else:
                    rep = throughput_report(cfg, args.seed)
                paths = emit_report(rep, args.out, fmt)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CampaignTooLargeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
