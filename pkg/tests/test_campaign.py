import math
from dataclasses import replace

import numpy as np
import pytest

from fsobridge.calibration import calibrate_pointing
from fsobridge.campaign import (
    MONITOR_FLOOR_DBM,
    ChannelProcesses,
    CouplingMode,
    Direction,
    PowerTrace,
    ThroughputModel,
    coupling_efficiencies,
    crossing_rop,
    evm_vs_rop_sweep,
    gbe_throughput_trace,
    instantaneous_rop,
    payload_seeds,
    rop_statistics,
    run_month_campaign,
    smf_degradation_day,
    spread_reduction,
)
from fsobridge.channel import DAY, ChannelStates, GustEvent, WeatherTimeline
from fsobridge.components import LinkBudgetChain, Port
from fsobridge.config import build_config


@pytest.fixture(scope="module")
def month(cfg, topology):
    return run_month_campaign(topology, cfg.processes(2023), 2023)


def _trace(values, port=Port.MONITOR_M, t=None, weather=None):
    values = np.asarray(values, dtype=float)
    t = np.arange(values.size, dtype=float) if t is None else t
    return PowerTrace(t, values, port, weather_active=weather)


def test_aligned_budget_reproduces_day0(topology):
    bare = replace(topology, head=replace(topology.head, feed_chain=LinkBudgetChain()))
    rop = instantaneous_rop(bare, ChannelStates.single())
    assert float(rop[Port.MONITOR_M][0]) == pytest.approx(-12.8, abs=0.01)


def test_aligned_preset_includes_feeder(topology):
    rop = instantaneous_rop(topology, ChannelStates.single())
    assert float(rop[Port.MONITOR_M][0]) == pytest.approx(-12.8 - 5.5, abs=0.01)


def test_fog_drives_mmf_below_minus_28(topology, cfg):
    day30 = cfg.pointing_process().deterministic(30 * DAY)
    fog = 100 * 0.063
    rop = instantaneous_rop(topology, ChannelStates.single(pointing=day30, excess_loss_db=fog))
    assert float(rop[Port.MONITOR_M][0]) < -28.0


def test_large_misalignment_kills_smf_not_mmf(topology):
    rop = instantaneous_rop(topology, ChannelStates.single(pointing=(1.5e-4, 0.0)))
    assert float(rop[Port.MONITOR_S][0]) < MONITOR_FLOOR_DBM
    assert math.isfinite(float(rop[Port.MONITOR_M][0]))
    assert float(rop[Port.MONITOR_M][0]) > -30.0


def test_modal_split_dominance(topology):
    # up to 0.35 mrad the MMF capture is never below the SMF overlap; past the
    # NA roll-off both are dead (SMF under 1e-20)
    theta = np.linspace(0, 2e-3, 4001)
    eff = coupling_efficiencies(topology, np.stack([theta, np.zeros_like(theta)], axis=-1))
    inside = theta <= 3.5e-4
    assert np.all(eff["mmf"][inside] >= eff["smf"][inside])
    assert np.all(eff["smf"][eff["mmf"] < eff["smf"]] < 1e-20)


def test_link_port_follows_mode(topology):
    assert topology.link_port is Port.MONITOR_M
    assert replace(topology, coupling_mode=CouplingMode.SMF_CLASSICAL).link_port is Port.MONITOR_S


def test_topology_validation(topology):
    with pytest.raises(ValueError):
        replace(topology, span=0.0)
    with pytest.raises(ValueError):
        replace(topology, receive_aperture=topology.smf)


def test_power_trace_validation():
    with pytest.raises(ValueError):
        PowerTrace(np.arange(3.0), np.zeros(2), Port.MONITOR_S)


def test_monitor_floor_and_quantisation():
    tr = PowerTrace(np.arange(3.0), np.array([-np.inf, -45.0, -20.26]), Port.MONITOR_S, quantization=0.5)
    assert tr.loss_of_signal.tolist() == [True, True, False]
    assert tr.monitor_reading().tolist() == [-40.0, -40.0, -20.5]


def test_statistics_constant_trace():
    s = rop_statistics(_trace(np.full(50, -20.0)))
    assert s.three_sigma_db == 0.0
    assert s.peak_to_peak_db == 0.0
    assert s.mean_dbm == -20.0
    assert s.counts.sum() == 50


def test_statistics_gaussian_three_sigma():
    x = np.random.default_rng(0).normal(-20.0, 2.0, 200_000)
    s = rop_statistics(_trace(x))
    assert s.three_sigma_db == pytest.approx(6.0, rel=0.01)
    assert s.mean_dbm == pytest.approx(-20.0, abs=0.02)


def test_statistics_histogram_consistency():
    x = np.random.default_rng(1).normal(-22.0, 3.0, 50_000)
    s = rop_statistics(_trace(x))
    assert s.counts.sum() == x.size
    centres = 0.5 * (s.bin_edges[1:] + s.bin_edges[:-1])
    mean = np.sum(centres * s.counts) / s.counts.sum()
    std = math.sqrt(np.sum((centres - mean) ** 2 * s.counts) / s.counts.sum())
    width = s.bin_edges[1] - s.bin_edges[0]
    assert mean == pytest.approx(s.mean_dbm, abs=width / 2)
    # binning adds about width^2 / 12 to the variance
    assert 3 * std == pytest.approx(3 * math.sqrt((s.three_sigma_db / 3) ** 2 + width**2 / 12), abs=0.02)


def test_clear_sky_filter():
    weather = np.array([False, True, False, True])
    s = rop_statistics(_trace([-20.0, -35.0, -20.0, -35.0], weather=weather), "clear_sky")
    assert s.sample_count == 2
    assert s.peak_to_peak_db == 0.0
    with pytest.raises(ValueError):
        rop_statistics(_trace([-20.0], weather=np.array([True])), "clear_sky")
    with pytest.raises(ValueError):
        rop_statistics(_trace([-20.0]), "rainy")


def test_spread_reduction_rules():
    a = _trace([-20.0, -25.0, -22.0])
    assert spread_reduction(a, a) == 0.0
    dead = _trace([-np.inf, -np.inf, -np.inf], Port.MONITOR_S)
    assert spread_reduction(dead, a) == pytest.approx(0.0 - 5.0)
    smf = _trace([-10.0, -np.inf, -30.0], Port.MONITOR_S)
    assert spread_reduction(smf, a) == pytest.approx((-10.0 - MONITOR_FLOOR_DBM) - 5.0)
    with pytest.raises(ValueError):
        spread_reduction(a, _trace([-20.0, -25.0, -22.0], t=np.array([0.0, 2.0, 4.0])))


def test_month_campaign_is_paired_and_deterministic(month, cfg, topology):
    assert np.array_equal(month.smf.timestamps, month.mmf.timestamps)
    assert month.smf.channel_digest == month.mmf.channel_digest
    again = run_month_campaign(topology, cfg.processes(2023), 2023)
    assert np.array_equal(again.mmf.rop_dbm, month.mmf.rop_dbm)
    assert np.array_equal(again.smf.rop_dbm, month.smf.rop_dbm)
    other = run_month_campaign(topology, cfg.processes(7), 7)
    assert not np.array_equal(other.mmf.rop_dbm, month.mmf.rop_dbm)


def test_month_campaign_modal_dominance(month):
    assert np.all(month.coupling_mmf >= month.coupling_smf)


def test_month_campaign_rejects_cross_pairing(month, cfg, topology):
    other = run_month_campaign(topology, cfg.processes(7), 7)
    with pytest.raises(ValueError, match="channel"):
        spread_reduction(month.smf, other.mmf)


def test_temperature_annotation_in_month(month):
    assert np.ptp(month.temperature) == pytest.approx(24.3)


def test_smf_degrades_around_a_week(topology, cfg):
    day = smf_degradation_day(topology, cfg.pointing_process())
    assert 3.0 <= day <= 10.0


def test_pointing_calibration_reproduces_frozen_preset(cfg, topology):
    fit = calibrate_pointing(topology, cfg.processes(2023), 2023)
    assert fit.pointing.static_residual[1] == pytest.approx(cfg.pointing.static_residual[1], rel=1e-4)
    assert fit.pointing.drift_rate[0] == pytest.approx(cfg.pointing.drift_rate[0], rel=1e-4)
    assert fit.scintillation.log_amplitude_sigma == pytest.approx(cfg.weather.log_amplitude_sigma, rel=1e-3)
    assert fit.spread_reduction_db == pytest.approx(10.6, abs=0.05)


def test_crossing_interpolation():
    assert crossing_rop([-24, -23, -22], [12.0, 11.0, 9.0]) == pytest.approx(-22.5)
    assert math.isnan(crossing_rop([-24, -23], [12.0, 11.0]))


def test_payload_seeds_distinct():
    a, b = payload_seeds(2023)
    assert a != b
    assert payload_seeds(2023) == (a, b)


def test_sweep_independent_of_workers(topology, ofdm_cfg):
    grid = [-23.0, -20.0, -17.0]
    one = evm_vs_rop_sweep(topology, grid, Direction.BIDIRECTIONAL, 5, ofdm_cfg, workers=1)
    three = evm_vs_rop_sweep(topology, grid, Direction.BIDIRECTIONAL, 5, ofdm_cfg, workers=3)
    assert np.array_equal(one.evm_percent, three.evm_percent)


def test_sweep_back_to_back_is_better(topology, ofdm_cfg):
    fso = evm_vs_rop_sweep(topology, [-19.0], "unidirectional", 5, ofdm_cfg)
    b2b = evm_vs_rop_sweep(topology, [-19.0], "unidirectional", 5, ofdm_cfg, fso_path=False)
    assert b2b.evm_percent[0] == pytest.approx(4.4, abs=0.2)
    assert b2b.evm_percent[0] < fso.evm_percent[0]


def test_throughput_model_validation():
    with pytest.raises(ValueError):
        ThroughputModel(buffer_floor_rate=1000.0)
    with pytest.raises(ValueError):
        ThroughputModel(buffer_floor_rate=0.0)


def test_throughput_always_above():
    t = np.arange(0, 60, 0.01)
    tp = gbe_throughput_trace(_trace(np.full(t.size, -20.0), t=t), ThroughputModel(), -27.0, seed=1)
    assert tp.rate_mbps.size == 60
    assert np.all((tp.rate_mbps >= 744) & (tp.rate_mbps <= 952))


def test_throughput_always_below():
    t = np.arange(0, 10, 0.01)
    tp = gbe_throughput_trace(_trace(np.full(t.size, -30.0), t=t), ThroughputModel(), -27.0)
    assert np.all(tp.rate_mbps == 0.0)


def test_throughput_half_second_outage():
    t = np.arange(0, 3, 0.01)
    rop = np.where((t >= 1.0) & (t < 1.5), -35.0, -20.0)
    tp = gbe_throughput_trace(_trace(rop, t=t), ThroughputModel(), -27.0)
    assert tp.rate_mbps[1] == pytest.approx(476.0)


def test_throughput_rejects_coarse_trace():
    with pytest.raises(ValueError):
        gbe_throughput_trace(_trace(np.full(10, -20.0)), ThroughputModel(), -27.0)


def test_throughput_is_seeded():
    t = np.arange(0, 20, 0.01)
    tr = _trace(np.full(t.size, -20.0), t=t)
    a = gbe_throughput_trace(tr, ThroughputModel(), -27.0, seed=3)
    b = gbe_throughput_trace(tr, ThroughputModel(), -27.0, seed=3)
    assert np.array_equal(a.rate_mbps, b.rate_mbps)


def test_weather_free_processes_have_no_clear_sky_gap(topology, cfg):
    procs = ChannelProcesses(cfg.pointing_process(), WeatherTimeline(), cfg.scintillation())
    res = run_month_campaign(topology, procs, 1, duration=DAY)
    st = res.statistics()["monitor_M"]
    assert st["all"].mean_dbm == st["clear_sky"].mean_dbm


def test_gust_event_in_config(cfg):
    sc = cfg.throughput_scenario()
    assert sc.gust == GustEvent(1800.0, cfg.campaign.throughput.gust_peak, 1.0, 0.0)
    no_gust = build_config({"campaign": {"throughput": {"gust_peak": 0.0}}}).throughput_scenario()
    assert no_gust.gust is None
