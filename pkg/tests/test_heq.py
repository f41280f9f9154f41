import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import ks_2samp

from melhts.exceptions import DataError, ParameterError
from melhts.heq import (
    apply_heq,
    build_lut,
    empirical_cdf,
    estimate_histograms,
    fit_heq,
    histogram_1d,
    merge_histograms,
    quantile,
)
from melhts.models import Histogram1D, MelSpectrogram


def mel_of(frames) -> MelSpectrogram:
    frames = np.atleast_2d(frames)
    return MelSpectrogram(frames=frames, frame_shift_ms=10.0, num_filters=frames.shape[1])


@pytest.fixture
def generated_and_target(rng):
    # generated speech is over-smoothed: narrower and shifted
    generated = np.column_stack([rng.normal(-3.0, 0.5, 4000), rng.normal(-8.0, 0.3, 4000)])
    target = np.column_stack([rng.normal(-2.0, 1.5, 5000), rng.gamma(2.0, 1.0, 5000) - 10.0])
    return mel_of(generated), mel_of(target)


class TestHistograms:
    def test_counts_every_value(self, rng):
        hist = histogram_1d(rng.normal(size=500), 10)
        assert hist.total == 500
        assert hist.counts.shape == (10,)

    def test_degenerate_range_widened(self):
        hist = histogram_1d(np.full(3, 3.0), 4)
        assert hist.bin_edges[0] == 2.5
        assert hist.bin_edges[-1] == 3.5

    def test_bins_and_empty_input(self):
        with pytest.raises(ParameterError):
            histogram_1d(np.arange(5.0), 1)
        with pytest.raises(DataError):
            histogram_1d(np.array([]), 8)

    def test_merge(self):
        a = histogram_1d(np.array([0.1, 0.2, 0.9]), 2, (0.0, 1.0))
        b = histogram_1d(np.array([0.7]), 2, (0.0, 1.0))
        merged = merge_histograms(a, b)
        assert list(merged.counts) == [2, 2]
        assert merged.total == 4
        with pytest.raises(ParameterError):
            merge_histograms(a, histogram_1d(np.array([0.7]), 2, (0.0, 2.0)))

    def test_shared_ranges_make_histograms_mergeable(self, generated_and_target):
        generated, target = generated_and_target
        ranges = np.array([[-10.0, 5.0], [-12.0, 5.0]])
        left = estimate_histograms([generated], 16, ranges)
        right = estimate_histograms([target], 16, ranges)
        merged = [merge_histograms(a, b) for a, b in zip(left, right)]
        assert merged[0].total == 9000

    def test_mixed_coefficient_counts(self, rng):
        with pytest.raises(ParameterError):
            estimate_histograms([mel_of(rng.normal(size=(4, 2))), mel_of(rng.normal(size=(4, 3)))], 8)


class TestCdf:
    @pytest.fixture
    def gapped(self):
        return Histogram1D(bin_edges=[0.0, 1.0, 2.0, 3.0], counts=[1, 0, 1], total=2)

    def test_cdf_is_linear_inside_bins(self, gapped):
        assert_allclose(empirical_cdf(gapped, [-1.0, 0.5, 1.5, 2.5, 4.0]), [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_quantile_is_left_continuous(self, gapped):
        assert_allclose(quantile(gapped, [0.0, 0.25, 0.5, 0.75, 1.0]), [0.0, 0.5, 1.0, 2.5, 3.0])


class TestEqualization:
    def test_matches_target_distribution(self, generated_and_target):
        generated, target = generated_and_target
        lut = fit_heq([generated], [target], bins=64)
        equalized = apply_heq(generated, lut)
        for d in range(2):
            before = ks_2samp(generated.frames[:, d], target.frames[:, d]).statistic
            after = ks_2samp(equalized.frames[:, d], target.frames[:, d]).statistic
            assert after <= 0.25 * before

    def test_maps_are_monotone(self, generated_and_target):
        generated, target = generated_and_target
        lut = fit_heq([generated], [target], bins=32)
        grid = np.linspace(-12.0, 6.0, 400)
        mel = apply_heq(mel_of(np.column_stack([grid, grid])), lut)
        assert np.all(np.diff(mel.frames, axis=0) >= 0)

    def test_same_distribution_is_near_identity(self, rng):
        mel = mel_of(rng.normal(-4.0, 1.0, size=(3000, 2)))
        bins = 32
        lut = fit_heq([mel], [mel], bins=bins)
        width = max(h.bin_width for h in estimate_histograms([mel], bins))
        error = np.abs(apply_heq(mel, lut).frames - mel.frames)
        # sparse tail bins may be empty, so only the bulk is checked
        bulk = np.abs(mel.frames + 4.0) < 2.0
        assert np.max(error[bulk]) <= width + 1e-6

    def test_output_keeps_shape_and_metadata(self, generated_and_target):
        generated, target = generated_and_target
        equalized = apply_heq(generated, fit_heq([generated], [target], bins=16))
        assert equalized.frames.shape == generated.frames.shape
        assert equalized.frame_shift_ms == generated.frame_shift_ms
        assert np.all(equalized.frames >= equalized.log_floor)

    def test_out_of_range_values_clamp(self):
        src = histogram_1d(np.linspace(0.0, 1.0, 100), 4)
        tgt = histogram_1d(np.linspace(10.0, 20.0, 100), 4)
        lut_map = build_lut(src, tgt)
        assert lut_map.values[0] == pytest.approx(10.0)
        assert lut_map.values[-1] == pytest.approx(20.0)

    def test_filter_count_mismatch(self, generated_and_target, rng):
        generated, target = generated_and_target
        lut = fit_heq([generated], [target], bins=16)
        with pytest.raises(ParameterError):
            apply_heq(mel_of(rng.normal(size=(5, 3))), lut)
