import json
import math

import numpy as np
import pytest

from fsobridge.campaign import Direction, PowerTrace, SweepCurve, ThroughputTrace, rop_statistics
from fsobridge.components import Port
from fsobridge.report import LinkReport, ReportFormat, SubcarrierEvm, emit_report, load_report


def _report() -> LinkReport:
    t = np.arange(6, dtype=float) * 60.0
    weather = np.array([0, 0, 1, 1, 0, 0], dtype=bool)
    smf = PowerTrace(t, np.array([-14.0, -np.inf, -30.0, -41.0, -16.5, -15.25]), Port.MONITOR_S,
                     weather_active=weather, channel_digest="abc")
    mmf = PowerTrace(t, np.array([-18.0, -19.5, -24.0, -25.0, -18.75, -18.125]), Port.MONITOR_M,
                     weather_active=weather, channel_digest="abc")
    rep = LinkReport(seed=7, preset="paper-2023", config_hash="0123456789abcdef")
    rep.traces = {"monitor_S": smf, "monitor_M": mmf}
    rep.temperature = np.linspace(10.0, 20.0, 6)
    rep.statistics = {tr.port.value: {f: rop_statistics(tr, f) for f in ("all", "clear_sky")}
                      for tr in (smf, mmf)}
    rep.spread_reduction_db = 12.5
    rep.evm_curves["unidirectional"] = SweepCurve(Direction.UNIDIRECTIONAL, True, np.array([-24.0, -22.0, -20.0]),
                                                  np.array([12.0, 9.5, 7.0]), -22.4)
    rep.evm_curves["never"] = SweepCurve(Direction.BIDIRECTIONAL, True, np.array([-24.0]), np.array([15.0]), math.nan)
    rep.evm_subcarrier.append(SubcarrierEvm("unidirectional", -17.0, np.arange(4), np.array([6.0, 6.5, 7.0, 6.2])))
    rep.throughput = ThroughputTrace(np.arange(3), np.array([900.0, 464.0, 800.0]), np.array([1.0, 0.49, 1.0]))
    rep.extra["smf_degradation_day"] = 5.2
    return rep


def _files(paths):
    return {p.name: p.read_bytes() for p in paths}


def test_csv_bundle_contents(tmp_path):
    paths = emit_report(_report(), tmp_path, "csv")
    assert [p.name for p in paths] == ["fig2a_trace.csv", "fig2b_hist.csv", "fig2c_throughput.csv",
                                       "fig3b_evm_subcarrier.csv", "fig3c_evm_rop.csv", "summary.csv"]
    trace = (tmp_path / "fig2a_trace.csv").read_text().splitlines()
    assert trace[0] == "time_s,day,temperature_c,rop_S_dbm,los_S,rop_M_dbm,los_M,weather_active"
    # a dead monitor reads the floor and flags loss of signal
    assert trace[2].split(",")[3:5] == ["-40.0", "1"]
    summary = dict(line.split(",", 1) for line in (tmp_path / "summary.csv").read_text().splitlines()[1:])
    assert summary["never.sensitivity_10pct_dbm"] == "nan"
    assert float(summary["throughput.min_mbps"]) == 464.0


def test_csv_is_byte_stable(tmp_path):
    a = _files(emit_report(_report(), tmp_path / "a"))
    b = _files(emit_report(_report(), tmp_path / "b"))
    assert a == b
    assert all(b"\r" not in v for v in a.values())


def test_empty_report_is_summary_only(tmp_path):
    paths = emit_report(LinkReport(1, "paper-2023", "x"), tmp_path, ReportFormat.CSV_BUNDLE)
    assert [p.name for p in paths] == ["summary.csv"]


def test_json_round_trip_is_lossless(tmp_path):
    rep = _report()
    (path,) = emit_report(rep, tmp_path, "json")
    json.loads(path.read_text())  # strict JSON, no NaN tokens
    back = load_report(tmp_path)
    assert back.summary().keys() == rep.summary().keys()
    for k, v in rep.summary().items():
        w = back.summary()[k]
        assert (isinstance(v, float) and math.isnan(v) and math.isnan(w)) or v == w
    assert np.array_equal(back.traces["monitor_S"].rop_dbm, rep.traces["monitor_S"].rop_dbm)
    assert np.array_equal(back.throughput.rate_mbps, rep.throughput.rate_mbps)
    assert _files(emit_report(back, tmp_path / "again", "json")) == _files([path])
    assert _files(emit_report(back, tmp_path / "c1")) == _files(emit_report(rep, tmp_path / "c2"))


def test_report_version_checked(tmp_path):
    d = _report().to_dict()
    d["report_version"] = 99
    with pytest.raises(ValueError, match="version"):
        LinkReport.from_dict(d)


def test_io_errors_name_the_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_report(_report(), blocker / "sub")
    with pytest.raises(OSError, match="missing"):
        load_report(tmp_path / "missing")
