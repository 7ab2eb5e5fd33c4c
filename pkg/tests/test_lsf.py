# tests/test_lsf.py
import math

import numpy as np
import pytest

from app.channel.errors import AliasingError, ChannelValidationError, DimensionMismatchError
from app.channel.lsf import (
    bin_noise_db,
    coherence_bounds,
    delay_power_profile,
    doppler_axis,
    doppler_mask,
    doppler_power_profile,
    estimate_noise_floor,
    lsf_estimate,
    noise_threshold,
    plan_regions,
    region_start_times,
    restrict_bandwidth,
    rms_spreads,
)
from app.channel.schema import ChannelRecord, DopplerInterval, LsfGrid, RegionPlan, SpecularPath
from app.channel.synth import add_noise, gen_specular
from app.channel.taper import default_tapers, dpss, taper_grid


def random_record(s, q, seed=0, t_s=1e-4, f_s=4.96e6):
    rng = np.random.default_rng(seed)
    data = (rng.standard_normal((s, q)) + 1j * rng.standard_normal((s, q))) / math.sqrt(2)
    return ChannelRecord(data=data, t_s=t_s, f_s=f_s, label="random")


def tone_record(s, q, t_s, tones):
    t = np.arange(s) * t_s
    data = sum(gain * np.exp(2j * np.pi * nu * t) for nu, gain in tones)
    return ChannelRecord(data=np.repeat(data[:, None], q, axis=1), t_s=t_s, f_s=4.96e6)


def test_plan_regions_bookkeeping():
    plan = plan_regions((5920, 103), 100, 55, 5, 5)

    assert (plan.k_t_count, plan.k_f_count) == (1165, 10)
    assert plan.n * 129.1e-6 == pytest.approx(12.9e-3, rel=1e-3)
    assert plan.m * 4.96e6 == pytest.approx(272.7e6, rel=1e-3)
    assert plan.time_span(1) == (1, 100)
    assert plan.freq_span(2) == (6, 60)


def test_plan_regions_rejects_oversized_region():
    with pytest.raises(DimensionMismatchError):
        plan_regions((20, 20), 30, 10, 5, 5)
    with pytest.raises(ChannelValidationError):
        plan_regions((20, 20), 10, 10, 0, 5)


def test_doppler_axis_is_centred():
    np.testing.assert_allclose(doppler_axis(4, 1.0), [-0.5, -0.25, 0.0, 0.25])
    np.testing.assert_allclose(doppler_axis(5, 0.1), [-4.0, -2.0, 0.0, 2.0, 4.0])


def test_lsf_estimate_matches_quadruple_loop_oracle():
    n, m = 8, 6
    record = random_record(12, 10, seed=3)
    plan = plan_regions((12, 10), n, m, 2, 2)
    tapers = taper_grid(dpss(n, 2.0, 2), dpss(m, 1.5, 2))

    grid = lsf_estimate(record, plan, tapers)

    rows, cols = np.arange(n), np.arange(m)
    expected = np.zeros((plan.k_t_count, plan.k_f_count, n, m))
    for k_t in range(plan.k_t_count):
        for k_f in range(plan.k_f_count):
            region = record.data[k_t * 2 : k_t * 2 + n, k_f * 2 : k_f * 2 + m]
            for window in tapers.windows:
                for p in range(n):
                    for l in range(m):
                        kernel = np.exp(-2j * np.pi * (p - n // 2) * rows / n)[:, None] * np.exp(
                            2j * np.pi * l * cols / m
                        )[None, :]
                        value = (region * window * kernel).sum() / math.sqrt(n * m)
                        expected[k_t, k_f, p, l] += abs(value) ** 2 / len(tapers.windows)

    np.testing.assert_allclose(grid.lsf, expected, rtol=1e-10, atol=0)
    assert grid.taper_count == 4


def test_lsf_parseval_per_region():
    record = random_record(80, 80, seed=5)
    plan = plan_regions((80, 80), 8, 8, 8, 8)
    tapers = default_tapers(8, 8, 2.0, 2.0, 2, 2)

    grid = lsf_estimate(record, plan, tapers)
    assert plan.k_t_count * plan.k_f_count == 100

    for k_t in range(10):
        for k_f in range(10):
            region = record.data[k_t * 8 : k_t * 8 + 8, k_f * 8 : k_f * 8 + 8]
            tapered = np.mean([np.sum(np.abs(region * w) ** 2) for w in tapers.windows])
            assert grid.lsf[k_t, k_f].sum() == pytest.approx(tapered, rel=1e-9)


def test_lsf_shift_covariance():
    n, m, t_s, f_s = 16, 12, 1e-4, 4.96e6
    record = random_record(48, 24, seed=7, t_s=t_s, f_s=f_s)
    plan = plan_regions((48, 24), n, m, 4, 4)
    tapers = default_tapers(n, m, 2.0, 2.0, 2, 2)
    base = lsf_estimate(record, plan, tapers).lsf

    doppler_bins, delay_bins = 3, 2
    t = np.arange(48)[:, None]
    q = np.arange(24)[None, :]
    shifted = record.data * np.exp(2j * np.pi * doppler_bins * t / n) * np.exp(-2j * np.pi * delay_bins * q / m)
    moved = lsf_estimate(ChannelRecord(data=shifted, t_s=t_s, f_s=f_s), plan, tapers).lsf

    expected = np.roll(np.roll(base, doppler_bins, axis=2), delay_bins, axis=3)
    np.testing.assert_allclose(moved, expected, rtol=1e-9, atol=1e-12)


def test_lsf_estimate_independent_of_workers():
    record = random_record(120, 40, seed=11)
    plan = plan_regions((120, 40), 30, 30, 5, 5)
    tapers = default_tapers(30, 30, 2.0, 2.5, 2, 2)

    serial = lsf_estimate(record, plan, tapers, workers=1)
    threaded = lsf_estimate(record, plan, tapers, workers=4)
    assert np.array_equal(serial.lsf, threaded.lsf)


def test_lsf_estimate_rejects_mismatched_tapers():
    record = random_record(40, 40)
    plan = plan_regions((40, 40), 30, 30, 5, 5)
    with pytest.raises(DimensionMismatchError):
        lsf_estimate(record, plan, default_tapers(20, 30, 2.0, 2.5, 2, 2))


def test_profiles_have_expected_shapes():
    record = random_record(60, 40, seed=1)
    plan = plan_regions((60, 40), 20, 20, 10, 10)
    grid = lsf_estimate(record, plan, default_tapers(20, 20, 2.0, 2.0, 2, 2))

    assert doppler_power_profile(grid).shape == (plan.k_t_count, 20)
    assert delay_power_profile(grid).shape == (plan.k_f_count, 20)
    assert doppler_power_profile(grid, [0]).shape == (plan.k_t_count, 20)


def test_coherence_bounds():
    t_c, f_c = coherence_bounds(3.75e-9, 250.0)
    assert t_c == 4e-3
    assert f_c == pytest.approx(266.7e6, rel=1e-3)

    t_c, f_c = coherence_bounds(0.0, 0.0)
    assert t_c == math.inf and f_c == math.inf


def test_rms_spreads_undefined_for_empty_regions():
    record = random_record(60, 30, seed=2)
    plan = plan_regions((60, 30), 30, 30, 5, 5)
    grid = lsf_estimate(record, plan, default_tapers(30, 30, 2.0, 2.5, 2, 2))

    tau_rms, nu_rms = rms_spreads(grid)
    assert tau_rms.shape == (plan.k_t_count, plan.k_f_count)
    assert np.all(np.isfinite(tau_rms)) and np.all(nu_rms > 0)

    empty = noise_threshold(grid, 0.0, math.inf)
    tau_rms, nu_rms = rms_spreads(empty)
    assert np.all(np.isnan(tau_rms)) and np.all(np.isnan(nu_rms))


def single_region_grid(lsf, doppler, delay):
    n, m = lsf.shape
    plan = RegionPlan(n=n, m=m, delta_t=1, delta_f=1, k_t_count=1, k_f_count=1)
    return LsfGrid(lsf=lsf[None, None], doppler_axis=doppler, delay_axis=delay, plan=plan, t_s=1e-4, f_s=4.96e6)


def test_rms_delay_spread_of_two_equal_deltas():
    lsf = np.zeros((4, 8))
    lsf[2, 0] = lsf[2, 4] = 1.0
    grid = single_region_grid(lsf, doppler_axis(4, 1e-4), np.arange(8) * 0.5e-9)

    tau_rms, nu_rms = rms_spreads(grid)

    # deltas at 0 and d = 2 ns
    assert tau_rms[0, 0] == pytest.approx(1e-9, rel=1e-6)
    assert nu_rms[0, 0] == pytest.approx(0.0, abs=1e-6)


def test_rms_doppler_spread_of_flat_marginal():
    n, t_s = 1001, 1e-4
    lsf = np.zeros((n, 4))
    lsf[:, 1] = 1.0
    axis = doppler_axis(n, t_s)
    grid = single_region_grid(lsf, axis, np.arange(4) * 1e-9)

    _, nu_rms = rms_spreads(grid)

    nu_max = float(axis[-1])
    assert nu_rms[0, 0] == pytest.approx(nu_max / math.sqrt(3), rel=2e-3)


def test_profiles_of_flat_lsf():
    plan = RegionPlan(n=4, m=5, delta_t=1, delta_f=1, k_t_count=2, k_f_count=3)
    grid = LsfGrid(
        lsf=np.ones((2, 3, 4, 5)),
        doppler_axis=doppler_axis(4, 1e-4),
        delay_axis=np.arange(5) * 1e-9,
        plan=plan,
        t_s=1e-4,
        f_s=4.96e6,
    )

    np.testing.assert_allclose(doppler_power_profile(grid), np.ones((2, 4)))
    np.testing.assert_allclose(delay_power_profile(grid), np.ones((3, 5)))


@pytest.fixture
def tone_in_noise():
    """Unit-power tone at 312.5 Hz and delay bin 12 of 32, plus AWGN 30 dB below it."""
    f_s = 4.96e6
    path = SpecularPath.constant(doppler=312.5, delay=12 / (32 * f_s))
    clean = gen_specular([path], (256, 64), (1e-4, f_s))
    plan = plan_regions((256, 64), 64, 32, 16, 16)
    tapers = default_tapers(64, 32, 2.0, 2.5, 2, 2)
    return clean, add_noise(clean, 30.0, seed=3), plan, tapers


def test_noise_threshold_keeps_tone_and_clears_noise(tone_in_noise):
    clean, noisy, plan, tapers = tone_in_noise
    assert noisy.noise_floor_db == pytest.approx(-30.0)

    tone = lsf_estimate(clean, plan, tapers).lsf
    thresholded = noise_threshold(lsf_estimate(noisy, plan, tapers), noisy.noise_floor_db, 10.0).lsf

    peak = np.unravel_index(np.argmax(tone[0, 0]), tone.shape[2:])
    assert np.all(thresholded[:, :, peak[0], peak[1]] > 0)

    limit = 10 ** ((bin_noise_db(-30.0, plan) + 10.0) / 10)
    noise_only = tone < 0.01 * limit
    assert noise_only.mean() > 0.5
    assert np.mean(thresholded[noise_only] == 0) >= 0.99


def test_estimate_noise_floor_of_tone_in_noise(tone_in_noise):
    _, noisy, plan, tapers = tone_in_noise
    grid = lsf_estimate(noisy, plan, tapers)

    assert estimate_noise_floor(grid) == pytest.approx(noisy.noise_floor_db, abs=1.0)


def test_lsf_estimate_thresholds_known_floor(tone_in_noise):
    _, noisy, plan, tapers = tone_in_noise

    raw = lsf_estimate(noisy, plan, tapers)
    fused = lsf_estimate(noisy, plan, tapers, workers=2, floor_db=-30.0, margin_db=10.0)

    np.testing.assert_array_equal(fused.lsf, noise_threshold(raw, -30.0, 10.0).lsf)
    assert not fused.lsf.flags.writeable
    assert not raw.lsf.flags.writeable


def test_noise_threshold_limits():
    record = random_record(60, 30, seed=4)
    plan = plan_regions((60, 30), 30, 30, 5, 5)
    grid = lsf_estimate(record, plan, default_tapers(30, 30, 2.0, 2.5, 2, 2))

    assert noise_threshold(grid, 0.0, -math.inf) is grid
    assert noise_threshold(grid, -math.inf, 10.0) is grid
    assert not noise_threshold(grid, 0.0, math.inf).lsf.any()

    thresholded = noise_threshold(grid, 0.0, 3.0)
    limit = 10 ** ((bin_noise_db(0.0, plan) + 3.0) / 10)
    kept = thresholded.lsf[thresholded.lsf > 0]
    assert np.all(kept >= limit)
    assert 0 < kept.size < grid.lsf.size


def test_estimate_noise_floor_of_white_noise():
    record = random_record(200, 60, seed=9)
    plan = plan_regions((200, 60), 30, 30, 5, 5)
    grid = lsf_estimate(record, plan, default_tapers(30, 30, 2.0, 2.5, 2, 2))

    assert estimate_noise_floor(grid, 0.25) == pytest.approx(0.0, abs=0.5)


def test_estimate_noise_floor_needs_four_delay_bins():
    record = random_record(40, 3)
    plan = plan_regions((40, 3), 30, 3, 5, 1)
    grid = lsf_estimate(record, plan, default_tapers(30, 3, 2.0, 1.0, 2, 1))
    with pytest.raises(ChannelValidationError):
        estimate_noise_floor(grid)


def tone_power(record, nu):
    """Power of the ``nu`` Hz component of the first frequency column."""
    t = np.arange(record.s) * record.t_s
    return abs(np.mean(record.data[:, 0] * np.exp(-2j * np.pi * nu * t))) ** 2


def power_ratio_db(after, before, nu):
    return 10 * math.log10(tone_power(after, nu) / tone_power(before, nu) + 1e-300)


def test_doppler_mask_suppresses_out_of_band_tone():
    record = tone_record(2048, 4, 129.1e-6, [(-400.0, 1.0), (100.0, 1.0)])

    masked = doppler_mask(record, 512, DopplerInterval.parse("(-inf,-258)"))

    assert power_ratio_db(masked, record, 100.0) <= -40.0
    assert abs(power_ratio_db(masked, record, -400.0)) <= 0.5
    assert "doppler-mask(-inf,-258)" in masked.label


def test_doppler_mask_bin_centred_tones():
    record = tone_record(2048, 4, 1.0 / (512 * 12.5), [(-1000.0, 1.0), (500.0, 1.0)])

    masked = doppler_mask(record, 512, DopplerInterval.parse("(-inf,-258)"))

    assert power_ratio_db(masked, record, 500.0) <= -40.0
    assert abs(power_ratio_db(masked, record, -1000.0)) <= 0.5


def test_doppler_mask_removes_static_channel():
    record = ChannelRecord(data=np.ones((2048, 4)), t_s=129.1e-6, f_s=4.96e6)

    masked = doppler_mask(record, 512, DopplerInterval(hi=-258.0))

    energy_db = 10 * math.log10(np.sum(np.abs(masked.data) ** 2) / np.sum(np.abs(record.data) ** 2) + 1e-300)
    assert energy_db <= -40.0


def test_doppler_mask_full_interval_is_identity():
    record = random_record(700, 5, seed=8)
    masked = doppler_mask(record, 256, DopplerInterval())
    np.testing.assert_allclose(masked.data, record.data, atol=1e-12)


def test_doppler_mask_rejects_aliased_bounds():
    record = random_record(64, 2, t_s=1e-4)
    with pytest.raises(AliasingError):
        doppler_mask(record, 32, DopplerInterval(lo=-6000.0, hi=0.0))


def test_restrict_bandwidth_keeps_leading_columns():
    record = random_record(10, 103)
    restricted = restrict_bandwidth(record, 100e6)

    assert restricted.q == 20
    np.testing.assert_array_equal(restricted.data, record.data[:, :20])
    assert restrict_bandwidth(record, 1e9) is record
    with pytest.raises(ChannelValidationError):
        restrict_bandwidth(record, 1e6)


def test_region_start_times():
    plan = plan_regions((100, 30), 30, 30, 5, 5)
    np.testing.assert_allclose(region_start_times(plan, 1e-3)[:3], [0.0, 5e-3, 10e-3])
