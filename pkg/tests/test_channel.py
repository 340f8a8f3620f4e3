import math

import numpy as np
import pytest

from fsobridge.channel import (
    CHUNK_SIZE,
    DAY,
    CampaignTooLargeError,
    ChannelStates,
    GustEvent,
    PointingProcess,
    RandomStream,
    ScintillationModel,
    WeatherEvent,
    WeatherKind,
    WeatherTimeline,
    atmospheric_loss,
    generate_campaign_inputs,
    iter_campaign_inputs,
    paper_month_timeline,
    sample_count,
    sample_pointing,
    scintillation_sample,
    temperature_annotation,
)


def test_random_stream_is_keyed():
    a = RandomStream(7, 1).generator(3).standard_normal(4)
    b = RandomStream(7, 1).generator(3).standard_normal(4)
    c = RandomStream(7, 2).generator(3).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_pointing_deterministic_parts():
    proc = PointingProcess((1e-6, 2e-6), 0.0, (3e-6, 0.0))
    out = proc.deterministic(np.array([0.0, 2 * DAY]))
    assert np.allclose(out, [[1e-6, 2e-6], [7e-6, 2e-6]])


def test_scalar_residual_maps_to_x():
    assert PointingProcess(5e-6).static_residual == (5e-6, 0.0)
    with pytest.raises(ValueError):
        PointingProcess((1, 2, 3))


def test_jitter_statistics():
    proc = PointingProcess(jitter_sigma=3e-6)
    x = sample_pointing(proc, np.zeros(200_000), np.random.default_rng(1))
    assert x.shape == (200_000, 2)
    assert np.std(x) == pytest.approx(3e-6, rel=0.01)
    assert abs(np.mean(x)) < 3e-8


def test_pointing_rejects_negative_time():
    with pytest.raises(ValueError):
        sample_pointing(PointingProcess(), -1.0, np.random.default_rng(0))


def test_gust_is_at_least_half_peak_in_its_window():
    gust = GustEvent(100.0, 4e-4, 1.0)
    t = np.linspace(100.0, 101.0, 101)
    assert np.all(gust.excursion(t) >= 0.5 * 4e-4 - 1e-12)
    assert gust.excursion(100.5) == pytest.approx(4e-4)
    assert gust.excursion(98.0) == 0.0
    assert gust.excursion(102.1) == 0.0


def test_gust_azimuth():
    proc = PointingProcess(gust_events=(GustEvent(0.0, 1e-4, 1.0, math.pi / 2),))
    out = proc.deterministic(0.5)
    assert out[0] == pytest.approx(0.0, abs=1e-20)
    assert out[1] == pytest.approx(1e-4)


def test_weather_overlap_rejected():
    with pytest.raises(ValueError):
        WeatherTimeline((WeatherEvent("rain", 0, 100, 6), WeatherEvent("rain", 50, 100, 6)))
    # different kinds may overlap
    WeatherTimeline((WeatherEvent("rain", 0, 100, 6), WeatherEvent("fog", 50, 100, 100)))


def test_atmospheric_loss_sums_active_events():
    tl = WeatherTimeline((WeatherEvent("rain", 0, 100, 6), WeatherEvent("fog", 50, 100, 100)))
    loss = atmospheric_loss(tl, np.array([10.0, 60.0, 120.0, 200.0]), 63.0)
    assert np.allclose(loss, [6 * 0.063, 106 * 0.063, 100 * 0.063, 0.0])


def test_paper_month_timeline_counts():
    tl = paper_month_timeline(RandomStream(2023))
    assert tl.count(WeatherKind.RAIN) == 19
    assert tl.count("fog") == 5
    assert all(0 <= ev.start and ev.end <= 30 * DAY for ev in tl.events)
    assert tl == paper_month_timeline(RandomStream(2023))
    assert tl != paper_month_timeline(RandomStream(2024))


def test_temperature_swing_exact():
    t = np.arange(0, 30 * DAY, 600.0)
    temp = temperature_annotation(t, 24.3)
    assert np.ptp(temp) == pytest.approx(24.3)


def test_scintillation_fade_has_unit_mean():
    model = ScintillationModel(0.2, 0.01)
    fade = scintillation_sample(model, np.arange(200_000) * 1.0, np.random.default_rng(3))
    assert np.mean(fade) == pytest.approx(1.0, rel=0.01)
    # log-normal intensity: scintillation index exp(4 sigma^2) - 1
    assert np.var(fade) == pytest.approx(model.scintillation_index, rel=0.05)


def test_scintillation_correlation():
    model = ScintillationModel(0.3, 10.0)
    dt = 1.0
    fade = scintillation_sample(model, np.arange(400_000) * dt, np.random.default_rng(4))
    x = np.log(fade)
    r = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert r == pytest.approx(math.exp(-dt / 10.0), abs=0.01)


def test_zero_sigma_is_no_fade():
    assert scintillation_sample(ScintillationModel(0.0), 0.0, np.random.default_rng(0)) == 1.0


def _inputs(seed=5):
    proc = PointingProcess((0, 2e-5), 3e-6, (1e-5, 0))
    tl = paper_month_timeline(RandomStream(seed))
    return proc, tl, ScintillationModel(0.2, 30.0)


def test_campaign_deterministic_and_streamed():
    proc, tl, sc = _inputs()
    a = generate_campaign_inputs(proc, tl, sc, 2 * DAY, 5.0, RandomStream(5))
    b = generate_campaign_inputs(proc, tl, sc, 2 * DAY, 5.0, RandomStream(5))
    chunks = list(iter_campaign_inputs(proc, tl, sc, 2 * DAY, 5.0, RandomStream(5)))
    streamed = ChannelStates.concat(chunks)
    assert len(a) == sample_count(2 * DAY, 5.0) == 34560
    assert len(chunks) == math.ceil(34560 / CHUNK_SIZE)
    for f in ("t", "pointing", "excess_loss_db", "fade", "weather_active"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
        assert np.array_equal(getattr(a, f), getattr(streamed, f))


def test_campaign_prefix_stable():
    # a shorter run is a prefix of a longer one
    proc, tl, sc = _inputs()
    short = generate_campaign_inputs(proc, tl, sc, DAY, 60.0, RandomStream(5))
    long = generate_campaign_inputs(proc, tl, sc, 2 * DAY, 60.0, RandomStream(5))
    assert np.array_equal(short.pointing, long.pointing[: len(short)])
    assert np.array_equal(short.fade, long.fade[: len(short)])


def test_campaign_cap():
    proc, tl, sc = _inputs()
    with pytest.raises(CampaignTooLargeError, match="iter_campaign_inputs"):
        generate_campaign_inputs(proc, tl, sc, 30 * DAY, 0.01, RandomStream(1))


def test_sample_count_validation():
    assert sample_count(0.0, 1.0) == 1
    with pytest.raises(ValueError):
        sample_count(10.0, 0.0)
