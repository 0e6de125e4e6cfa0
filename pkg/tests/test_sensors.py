from datetime import timedelta

import pytest

from aeropipe.core import GasKind
from aeropipe.sensors import (
    DEFAULT_START,
    GasScenario,
    MuxLevel,
    SaturationError,
    ScriptedNoise,
    SensorCurve,
    VirtualDevice,
    counts_to_ppm,
    default_curves,
    load_scenario_file,
    ppm_to_counts,
    run_device_loop,
    sample_channel,
)

CURVES = default_curves()
MQ135 = CURVES[GasKind.MQ135_AIR]
MQ3 = CURVES[GasKind.MQ3_ALCOHOL]


def test_default_curve_constants():
    assert (MQ135.a, MQ135.b, MQ135.r0, MQ135.rl) == (116.602, -2.769, 76630.0, 10000.0)
    assert (MQ3.a, MQ3.b, MQ3.r0, MQ3.rl) == (0.3934, -1.504, 60000.0, 200000.0)


@pytest.mark.parametrize("bad", [dict(a=0), dict(b=0.5), dict(r0=-1), dict(rl=0), dict(vcc=0)])
def test_curve_validation(bad):
    args = dict(a=1.0, b=-1.0, r0=1.0, rl=1.0, vcc=5.0) | bad
    with pytest.raises(ValueError):
        SensorCurve(**args)


def test_ratio_one_point():
    # true_ppm = a makes Rs = R0
    assert ppm_to_counts(MQ135, MQ135.a, 0) == round(1023 * 10000 / (10000 + 76630)) == 118


def test_ratio_one_inverse_is_a():
    curve = SensorCurve(a=50.0, b=-2.0, r0=10000.0, rl=10000.0, vcc=5.0)
    # Rs = R0 = RL -> Vout = vcc/2 -> counts = 511.5
    assert counts_to_ppm(curve, 511.5) == pytest.approx(50.0, rel=1e-12)


def test_round_trip_400ppm():
    assert counts_to_ppm(MQ135, ppm_to_counts(MQ135, 400.0, 0)) == pytest.approx(400.0, rel=0.01)


def test_monotone_in_ppm():
    assert ppm_to_counts(MQ135, 1000.0, 0) > ppm_to_counts(MQ135, 100.0, 0)


def test_counts_512_hand_evaluation():
    # Vout = 5*512/1023 = 2.50244 V, Rs = 10k*(5-Vout)/Vout = 9980.47 ohm,
    # ppm = 116.602 * (9980.47/76630)^-2.769, evaluated separately
    assert counts_to_ppm(MQ135, 512) == pytest.approx(32957.73801042197, rel=1e-12)


@pytest.mark.parametrize("counts", [0, 1023, -3, 2000])
def test_saturation(counts):
    with pytest.raises(SaturationError, match="channel 1"):
        counts_to_ppm(MQ3, counts, channel=1)


@pytest.mark.parametrize("curve", [MQ135, MQ3], ids=["mq135", "mq3"])
def test_mutual_inverse_over_counts(curve):
    for counts in range(50, 971):
        ppm = counts_to_ppm(curve, counts)
        back = ppm_to_counts(curve, ppm, 0)
        assert back == counts
        assert counts_to_ppm(curve, back) == pytest.approx(ppm, rel=0.01)


@pytest.mark.parametrize("curve", [MQ135, MQ3], ids=["mq135", "mq3"])
def test_ppm_increases_with_counts(curve):
    values = [counts_to_ppm(curve, c) for c in range(1, 1023)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_clamping_absorbs_extremes():
    assert ppm_to_counts(MQ135, 0.0, 0) == 1
    assert ppm_to_counts(MQ135, 1e30, 0) == 1022
    assert ppm_to_counts(MQ135, 400.0, -5000) == 1


def scenario(mq135=400.0, mq3=0.5):
    return GasScenario.constant(mq135, mq3)


def test_zero_noise_reads_identical():
    dev = VirtualDevice("d", noise_sigma=0.0, scenario=scenario())
    s = sample_channel(dev, 0)
    assert s.raw_counts == ppm_to_counts(MQ135, 400.0, 0)
    assert s.ppm == counts_to_ppm(MQ135, s.raw_counts)


def test_same_seed_same_time_same_sample():
    a = VirtualDevice("d", rng_seed=99, scenario=scenario())
    b = VirtualDevice("d", rng_seed=99, scenario=scenario())
    assert sample_channel(a, 1, 3.0) == sample_channel(a, 1, 3.0) == sample_channel(b, 1, 3.0)


def test_scripted_reads_average():
    # base count for 400 ppm is 173; offsets give reads {500,502,498,501,499,500}
    base = ppm_to_counts(MQ135, 400.0, 0)
    draws = [v - base for v in (500, 502, 498, 501, 499, 500)]
    dev = VirtualDevice("d", noise_source=ScriptedNoise(draws), scenario=scenario())
    s = sample_channel(dev, 0)
    assert s.raw_counts == 500.0
    assert s.ppm == counts_to_ppm(MQ135, 500.0)


def test_mean_counts_not_truncated():
    base = ppm_to_counts(MQ135, 400.0, 0)
    dev = VirtualDevice("d", noise_source=ScriptedNoise([0, 0, 0, 0, 0, 1]), scenario=scenario())
    assert sample_channel(dev, 0).raw_counts == pytest.approx(base + 1 / 6)


def test_sample_sets_mux():
    dev = VirtualDevice("d", scenario=scenario())
    sample_channel(dev, 1)
    assert dev.mux_pin is MuxLevel.HIGH
    sample_channel(dev, 0)
    assert dev.mux_pin is MuxLevel.LOW


def test_sample_rejects_bad_channel():
    with pytest.raises(ValueError):
        sample_channel(VirtualDevice("d", scenario=scenario()), 2)


def test_saturated_sensor_propagates():
    curve = SensorCurve(a=1.0, b=-1.0, r0=1.0, rl=1e9)  # divider pinned near vcc
    dev = VirtualDevice("d", curves={GasKind.MQ135_AIR: curve, GasKind.MQ3_ALCOHOL: MQ3},
                        noise_sigma=0, scenario=scenario())
    assert sample_channel(dev, 0).raw_counts == 1022  # clamp keeps it one count below the rail


def test_loop_counts():
    dev = VirtualDevice("d")
    assert len(list(run_device_loop(dev, scenario(), 10.0))) == 10
    assert list(run_device_loop(VirtualDevice("d"), scenario(), 0.5)) == []
    assert len(list(run_device_loop(VirtualDevice("d", sample_period=2.0), scenario(), 9.0))) == 4


def test_loop_step_shows_at_index_five():
    step = GasScenario({
        GasKind.MQ135_AIR: [(0.0, 100.0), (4.999, 100.0), (5.0, 1000.0)],
        GasKind.MQ3_ALCOHOL: [(0.0, 0.5)],
    })
    pairs = list(run_device_loop(VirtualDevice("d", noise_sigma=0), step, 10.0))
    low, high = counts_to_ppm(MQ135, ppm_to_counts(MQ135, 100.0)), counts_to_ppm(MQ135, ppm_to_counts(MQ135, 1000.0))
    assert [p[0].ppm for p in pairs] == [low] * 5 + [high] * 5
    assert pairs[5][0].taken_at == DEFAULT_START + timedelta(seconds=5)


def test_loop_channel_order_and_reproducibility():
    run1 = list(run_device_loop(VirtualDevice("d", rng_seed=5), scenario(), 20.0))
    run2 = list(run_device_loop(VirtualDevice("d", rng_seed=5), scenario(), 20.0))
    assert run1 == run2
    assert all(a.channel == 0 and b.channel == 1 and a.taken_at == b.taken_at for a, b in run1)
    other = list(run_device_loop(VirtualDevice("d", rng_seed=6), scenario(), 20.0))
    assert other != run1


def test_sink_failure_does_not_stop_loop():
    calls = []

    def flaky(a, b):
        calls.append(a.taken_at)
        if len(calls) % 2:
            raise ConnectionError("down")

    pairs = list(run_device_loop(VirtualDevice("d"), scenario(), 6.0, flaky))
    assert len(pairs) == 6 and len(calls) == 6


def test_scenario_interpolation():
    sc = GasScenario({GasKind.MQ135_AIR: [(0.0, 100.0), (10.0, 200.0)], GasKind.MQ3_ALCOHOL: [(2.0, 1.0)]})
    assert sc.concentration(GasKind.MQ135_AIR, 5.0) == 150.0
    assert sc.concentration(GasKind.MQ135_AIR, 50.0) == 200.0
    assert sc.concentration(GasKind.MQ3_ALCOHOL, 0.0) == 1.0


@pytest.mark.parametrize("knots", [[(0.0, 1.0), (0.0, 2.0)], [(1.0, 1.0), (0.5, 2.0)], [(0.0, -1.0)]])
def test_scenario_validation(knots):
    with pytest.raises(ValueError):
        GasScenario({GasKind.MQ135_AIR: knots})


def test_scenario_file(tmp_path):
    path = tmp_path / "s.toml"
    path.write_text(
        'duration = 5\nstart = "2026-03-01T00:00:00Z"\n'
        '[[device]]\nid = "a"\nseed = 1\n'
        '[[device]]\nid = "b"\nseed = 2\nnoise_sigma = 0\n[device.curves.mq135]\nr0 = 50000.0\n'
        "[scenario.mq135]\nknots = [[0, 400.0], [3, 800.0]]\n"
        "[scenario.mq3]\nknots = [[0, 0.4]]\n"
    )
    devices, sc, settings = load_scenario_file(path)
    assert [d.device_id for d in devices] == ["a", "b"]
    assert devices[1].curves[GasKind.MQ135_AIR].r0 == 50000.0
    assert devices[1].noise_sigma == 0
    assert devices[0].start.isoformat() == "2026-03-01T00:00:00+00:00"
    assert sc.concentration(GasKind.MQ135_AIR, 1.5) == 600.0
    assert settings["duration"] == 5
