"""
Tests for the arbitrary-length FFT, the bin schedule and feature extraction
"""
import logging

import numpy as np
import pytest

from conftest import skeleton_frames
from pipeline.errors import DataError, DimensionError, ParameterError
from pipeline.pose_ingest import PoseSequence
from pipeline.spectral import (
    SpectralFeatures,
    TimeSeries,
    bin_widths,
    bluestein,
    build_schedule,
    dft_naive,
    extract_features,
    fft_bluestein,
    resample,
    search_c,
    unbinned,
)


@pytest.mark.parametrize("n", list(range(2, 65)) + [997, 1000, 1024, 4096])
def test_bluestein_matches_naive_dft(n):
    """Bluestein agrees with the direct DFT on 20 random inputs of each length"""
    for seed in range(20):
        series = TimeSeries(np.random.default_rng([n, seed]).normal(size=n), 25.0)
        expected = dft_naive(series).coefficients
        got = fft_bluestein(series).coefficients
        assert np.abs(got - expected).max() <= 1e-9 * np.abs(expected).max(), f"n={n} seed={seed}"


def test_bluestein_matches_numpy_fft():
    x = np.random.default_rng(3).normal(size=(4, 997))
    assert np.allclose(bluestein(x), np.fft.fft(x, axis=-1), rtol=0, atol=1e-9)


def test_naive_dft_matches():
    x = np.random.default_rng(1).normal(size=50)
    spectrum = dft_naive(TimeSeries(x, 25.0))
    assert np.allclose(spectrum.coefficients, np.fft.fft(x))
    assert spectrum.resolution == pytest.approx(0.5)


def test_fft_needs_two_samples():
    with pytest.raises(ParameterError):
        TimeSeries(np.array([1.0]), 25.0)
    with pytest.raises(ParameterError):
        bluestein(np.array([1.0]))


def test_tone_peak_bin():
    """A 2 Hz tone over 1000 samples at 25 fps peaks at coefficient 80"""
    t = np.arange(1000) / 25.0
    spectrum = fft_bluestein(TimeSeries(np.sin(2 * np.pi * 2.0 * t), 25.0))
    k = int(np.argmax(spectrum.magnitudes[:500]))
    assert k == 80
    assert spectrum.frequency(k) == pytest.approx(2.0)
    print("✓ 2 Hz tone lands on coefficient 80")


def test_default_schedule():
    """c = 1.00264 at 25 fps: unit widths up to n = 153, 198 bins over 241 coefficients"""
    schedule = build_schedule()
    assert schedule.coverage == 241
    assert all(w == 1 for w in schedule.widths[:154])
    assert schedule.widths[154] == 2
    assert schedule.num_bins == 198
    assert schedule.edges[0] == 0 and schedule.edges[-1] == 241
    assert all(b > a for a, b in zip(schedule.edges, schedule.edges[1:]))
    print(f"✓ default schedule: {schedule.num_bins} bins")


def test_doubling_widths():
    assert bin_widths(1, 2.0, 7) == [1, 2, 4]


def test_schedule_parameter_errors():
    with pytest.raises(ParameterError):
        bin_widths(1, 1.0, 10)
    with pytest.raises(ParameterError):
        bin_widths(0, 2.0, 10)
    with pytest.raises(ParameterError):
        build_schedule(fps=25.0, cutoff_hz=13.0)
    with pytest.raises(ParameterError):
        build_schedule(fps=120.0)


def test_unbinned_schedule():
    schedule = unbinned(build_schedule())
    assert schedule.num_bins == 241
    assert not schedule.binned
    assert set(schedule.widths) == {1}


def test_resample_keeps_duration():
    series = TimeSeries(np.linspace(0.0, 1.0, 31), 30.0)
    out = resample(series, 25.0)
    assert out.sample_rate == 25.0
    assert len(out) == 26
    assert out.samples[-1] == pytest.approx(1.0)


def tone_sequence(fps: float, frames: int, hz: float) -> PoseSequence:
    kp = skeleton_frames(frames)
    t = np.arange(frames) / fps
    kp[:, 4, 0] += 10.0 * np.sin(2 * np.pi * hz * t)
    return PoseSequence(kp, fps=fps, subject_id="tone", label=0)


def test_extract_features_shape_and_peak():
    """Features are (bins, 18, 2), non-negative, and a wrist tone shows up in its bin"""
    schedule = unbinned(build_schedule())
    features = extract_features(tone_sequence(25.0, 1000, 2.0), schedule)
    assert features.values.shape == (241, 18, 2)
    assert np.all(features.values >= 0)
    assert int(np.argmax(features.values[:, 4, 0])) == 80
    # static joints carry no energy once the mean is removed
    assert np.allclose(features.values[:, 0], 0.0, atol=1e-9)


def test_short_sequences_are_zero_padded():
    schedule = build_schedule(c=2.0)
    features = extract_features(tone_sequence(25.0, 100, 2.0), schedule)
    assert features.values.shape == (8, 18, 2)
    assert features.values[:, 4, 0].sum() > 0


def test_resampling_is_logged(caplog):
    """30 fps input is resampled onto the 25 fps grid"""
    with caplog.at_level(logging.INFO, logger="pipeline.spectral"):
        features = extract_features(tone_sequence(30.0, 300, 2.0), build_schedule(c=2.0))
    assert "resampled 30 fps -> 25 fps" in caplog.text
    assert features.num_bins == 8


def test_features_reject_wrong_shape():
    schedule = build_schedule(c=2.0)
    with pytest.raises(DimensionError):
        SpectralFeatures(np.zeros((7, 18, 2)), schedule, "bad")
    with pytest.raises(ParameterError):
        SpectralFeatures(-np.ones((8, 18, 2)), schedule, "bad")


def test_features_from_dict_version():
    features = extract_features(tone_sequence(25.0, 100, 2.0), build_schedule(c=2.0))
    data = features.to_dict()
    assert data["num_bins"] == 8
    data["format_version"] = 2
    with pytest.raises(DataError):
        SpectralFeatures.from_dict(data)


def test_search_c_prefers_smallest_on_ties():
    seqs = [tone_sequence(25.0, 100, 2.0)]
    assert search_c(seqs, [1.5, 1.2, 2.0], lambda feats: 50.0) == 1.2


def test_search_c_picks_best():
    seqs = [tone_sequence(25.0, 100, 2.0)]
    # fewer bins scores higher here, so the largest c wins
    best = search_c(seqs, [1.2, 2.0, 1.5], lambda feats: 100.0 - feats[0].num_bins)
    assert best == 2.0


def test_search_c_validates_grid():
    with pytest.raises(ParameterError):
        search_c([], [], lambda feats: 0.0)
    with pytest.raises(ParameterError):
        search_c([], [1.0, 2.0], lambda feats: 0.0)
