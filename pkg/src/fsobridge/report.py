"""LinkReport container and its CSV/JSON emitters."""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .campaign import PowerTrace, RopStatistics, SweepCurve, ThroughputTrace
from .components import Port

REPORT_VERSION = 1

DEFAULT_METADATA = {
    "peak_to_peak_definition": "loss-of-signal samples clamped to the monitor floor",
    "clear_sky_selection": "samples outside scripted weather events",
    "throughput_model": "empirical surrogate, no TCP or Ethernet stack",
}


class ReportFormat(str, enum.Enum):
    CSV_BUNDLE = "csv_bundle"
    JSON = "json"


@dataclass
class SubcarrierEvm:
    label: str
    rop_dbm: float
    subcarrier_index: np.ndarray
    evm_percent: np.ndarray

    def to_dict(self) -> dict:
        return {"label": self.label, "rop_dbm": self.rop_dbm,
                "subcarrier_index": self.subcarrier_index.tolist(), "evm_percent": self.evm_percent.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SubcarrierEvm":
        return cls(d["label"], d["rop_dbm"], np.asarray(d["subcarrier_index"], dtype=int),
                   np.asarray(d["evm_percent"], dtype=float))


@dataclass
class LinkReport:
    """Everything a run produced; empty sections are simply absent from the bundle."""

    seed: int
    preset: str
    config_hash: str
    metadata: dict = field(default_factory=lambda: dict(DEFAULT_METADATA))
    traces: dict[str, PowerTrace] = field(default_factory=dict)
    temperature: np.ndarray | None = None
    statistics: dict[str, dict[str, RopStatistics]] = field(default_factory=dict)
    spread_reduction_db: float | None = None
    evm_curves: dict[str, SweepCurve] = field(default_factory=dict)
    evm_subcarrier: list[SubcarrierEvm] = field(default_factory=list)
    throughput: ThroughputTrace | None = None
    extra: dict = field(default_factory=dict)

    # per-port views
    def mean_rop_dbm(self, weather_filter: str = "all") -> dict[str, float]:
        return {p: s[weather_filter].mean_dbm for p, s in self.statistics.items()}

    def three_sigma_spread_db(self, weather_filter: str = "all") -> dict[str, float]:
        return {p: s[weather_filter].three_sigma_db for p, s in self.statistics.items()}

    def peak_to_peak_spread_db(self, weather_filter: str = "all") -> dict[str, float]:
        return {p: s[weather_filter].peak_to_peak_db for p, s in self.statistics.items()}

    def sensitivity_at_10pct_evm(self) -> dict[str, float]:
        return {k: c.sensitivity_10pct_dbm for k, c in self.evm_curves.items()}

    def summary(self) -> dict:
        out = {"report_version": REPORT_VERSION, "seed": self.seed, "preset": self.preset,
               "config_hash": self.config_hash}
        for port, stats in self.statistics.items():
            for filt, s in stats.items():
                out[f"{port}.{filt}.mean_dbm"] = s.mean_dbm
                out[f"{port}.{filt}.three_sigma_db"] = s.three_sigma_db
                out[f"{port}.{filt}.peak_to_peak_db"] = s.peak_to_peak_db
                out[f"{port}.{filt}.sample_count"] = s.sample_count
        if self.spread_reduction_db is not None:
            out["spread_reduction_db"] = self.spread_reduction_db
        for k, v in self.sensitivity_at_10pct_evm().items():
            out[f"{k}.sensitivity_10pct_dbm"] = v
        if self.throughput is not None:
            r = self.throughput.rate_mbps
            out["throughput.min_mbps"] = float(r.min())
            out["throughput.max_mbps"] = float(r.max())
            out["throughput.mean_mbps"] = float(r.mean())
        out.update(self.extra)
        for k, v in self.metadata.items():
            out[f"meta.{k}"] = v
        return out

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "seed": self.seed,
            "preset": self.preset,
            "config_hash": self.config_hash,
            "metadata": self.metadata,
            "traces": {k: _trace_to_dict(t) for k, t in self.traces.items()},
            "temperature": None if self.temperature is None else _finite_or_none(self.temperature),
            "statistics": {p: {f: s.to_dict() for f, s in st.items()} for p, st in self.statistics.items()},
            "spread_reduction_db": self.spread_reduction_db,
            "evm_curves": {k: c.to_dict() for k, c in self.evm_curves.items()},
            "evm_subcarrier": [s.to_dict() for s in self.evm_subcarrier],
            "throughput": None if self.throughput is None else self.throughput.to_dict(),
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinkReport":
        if d.get("report_version") != REPORT_VERSION:
            raise ValueError(f"unsupported report version {d.get('report_version')!r}")
        temp = d.get("temperature")
        tp = d.get("throughput")
        return cls(
            seed=d["seed"],
            preset=d["preset"],
            config_hash=d["config_hash"],
            metadata=d["metadata"],
            traces={k: _trace_from_dict(t) for k, t in d["traces"].items()},
            temperature=None if temp is None else np.array([math.nan if x is None else x for x in temp]),
            statistics={p: {f: RopStatistics.from_dict(s) for f, s in st.items()}
                        for p, st in d["statistics"].items()},
            spread_reduction_db=d["spread_reduction_db"],
            evm_curves={k: SweepCurve.from_dict(c) for k, c in d["evm_curves"].items()},
            evm_subcarrier=[SubcarrierEvm.from_dict(s) for s in d["evm_subcarrier"]],
            throughput=None if tp is None else ThroughputTrace.from_dict(tp),
            extra=d["extra"],
        )


def _finite_or_none(a: np.ndarray) -> list:
    # JSON has no infinities; a dead monitor (-inf dBm) is stored as null
    return [float(x) if math.isfinite(x) else None for x in a]


def _trace_to_dict(t: PowerTrace) -> dict:
    return {
        "port": t.port.value,
        "timestamps": t.timestamps.tolist(),
        "rop_dbm": _finite_or_none(t.rop_dbm),
        "quantization": t.quantization,
        "weather_active": t.weather_active.astype(int).tolist(),
        "floor_dbm": t.floor_dbm,
        "channel_digest": t.channel_digest,
    }


def _trace_from_dict(d: dict) -> PowerTrace:
    rop = np.array([-math.inf if x is None else x for x in d["rop_dbm"]], dtype=float)
    return PowerTrace(np.asarray(d["timestamps"], dtype=float), rop, Port(d["port"]), d["quantization"],
                      np.asarray(d["weather_active"], dtype=bool), d["floor_dbm"], d["channel_digest"])


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (list, tuple)):
        return json.dumps(list(x))
    if x is None:
        return ""
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> Path:
    """Byte-stable CSV: ``\\n`` line ends and ``repr`` floats."""
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def emit_report(report: LinkReport, out_dir: str | Path, fmt: ReportFormat | str = ReportFormat.CSV_BUNDLE) -> list[Path]:
    """Write the report; returns the written paths in a fixed order."""
    fmt = ReportFormat("csv_bundle" if fmt == "csv" else fmt)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    if fmt is ReportFormat.JSON:
        path = out / "report.json"
        text = json.dumps(report.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        return [path]

    written = []
    if report.traces:
        s = report.traces.get(Port.MONITOR_S.value)
        m = report.traces.get(Port.MONITOR_M.value)
        ref = s if s is not None else m
        temp = report.temperature if report.temperature is not None else np.full(len(ref), math.nan)
        cols = [ref.timestamps, ref.timestamps / 86400.0, temp]
        header = ["time_s", "day", "temperature_c"]
        for name, tr in (("S", s), ("M", m)):
            if tr is not None:
                cols += [tr.monitor_reading(), tr.loss_of_signal]
                header += [f"rop_{name}_dbm", f"los_{name}"]
        cols.append(ref.weather_active)
        header.append("weather_active")
        written.append(write_csv(out / "fig2a_trace.csv", header, zip(*cols)))
    if report.statistics:
        rows = []
        for port, stats in sorted(report.statistics.items()):
            for filt, st in sorted(stats.items()):
                for lo, hi, c in zip(st.bin_edges[:-1], st.bin_edges[1:], st.counts):
                    rows.append((port, filt, float(lo), float(hi), int(c)))
        written.append(write_csv(out / "fig2b_hist.csv", ["port", "filter", "bin_lo_dbm", "bin_hi_dbm", "count"],
                                  rows))
    if report.throughput is not None:
        tp = report.throughput
        written.append(write_csv(out / "fig2c_throughput.csv", ["time_s", "rate_mbps", "good_fraction"],
                                  zip(tp.seconds, tp.rate_mbps, tp.good_fraction)))
    if report.evm_subcarrier:
        rows = [(s.label, s.rop_dbm, int(i), e) for s in report.evm_subcarrier
                for i, e in zip(s.subcarrier_index, s.evm_percent)]
        written.append(write_csv(out / "fig3b_evm_subcarrier.csv",
                                  ["curve", "rop_dbm", "subcarrier", "evm_percent"], rows))
    if report.evm_curves:
        rows = [(k, c.direction.value, c.fso_path, r, e) for k, c in sorted(report.evm_curves.items())
                for r, e in zip(c.rop_dbm, c.evm_percent)]
        written.append(write_csv(out / "fig3c_evm_rop.csv",
                                  ["curve", "direction", "fso_path", "rop_dbm", "evm_percent"], rows))
    written.append(write_csv(out / "summary.csv", ["key", "value"], sorted(report.summary().items())))
    return written


def load_report(path: str | Path) -> LinkReport:
    """Read a JSON report; ``path`` may be the file or its directory."""
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    return LinkReport.from_dict(data)
