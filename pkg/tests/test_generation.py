import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from melhts.analysis import delta_window_matrix
from melhts.exceptions import InsufficientDataError, ParameterError
from melhts.hmm.generation import generate_parameters, mlpg, state_plan
from melhts.models import SyllablePosition

from tests.conftest import label


def dense_mlpg(means, variances, half_window):
    num_frames, width = means.shape
    dim = width // 3
    first = delta_window_matrix(num_frames, half_window).toarray()
    windows = np.vstack([np.eye(num_frames), first, first @ first])
    out = np.empty((num_frames, dim))
    for d in range(dim):
        mu = np.concatenate([means[:, d], means[:, dim + d], means[:, 2 * dim + d]])
        precision = 1.0 / np.concatenate([variances[:, d], variances[:, dim + d], variances[:, 2 * dim + d]])
        lhs = windows.T @ (precision[:, None] * windows)
        out[:, d] = np.linalg.solve(lhs, windows.T @ (precision * mu))
    return out


def utterance_labels():
    return [label("sil", r="a", pos=SyllablePosition.ONSET),
            label("a", l="sil", r="sil", syllable_index=1),
            label("sil", l="a", pos=SyllablePosition.ONSET, syllable_index=2)]


class TestMlpg:
    @pytest.mark.parametrize("half_window", [1, 2])
    def test_matches_dense_solve(self, rng, half_window):
        means = rng.normal(size=(40, 6))
        variances = rng.uniform(0.2, 3.0, size=(40, 6))
        assert_allclose(mlpg(means, variances, half_window), dense_mlpg(means, variances, half_window), atol=1e-8)

    def test_uninformative_deltas_return_statics(self, rng):
        means = rng.normal(size=(12, 6))
        variances = np.ones((12, 6))
        variances[:, 2:] = np.inf
        assert_array_equal(mlpg(means, variances, 1), means[:, :2])

    def test_constant_trajectory_is_a_fixed_point(self):
        means = np.zeros((10, 3))
        means[:, 0] = 4.0
        assert_allclose(mlpg(means, np.ones((10, 3)), 2)[:, 0], 4.0)

    def test_width_must_stack_three_streams(self, rng):
        with pytest.raises(ParameterError):
            mlpg(rng.normal(size=(5, 4)), np.ones((5, 4)), 1)


class TestStatePlan:
    def test_durations_round_half_up(self, tiny_model):
        leaves, durations = state_plan(utterance_labels(), tiny_model)
        assert list(leaves) == [2, 3, 0, 1, 2, 3]
        assert list(durations) == [1, 1, 2, 4, 1, 1]

    def test_speaking_rate_scales(self, tiny_model):
        _, durations = state_plan(utterance_labels(), tiny_model, speaking_rate=2.0)
        assert list(durations) == [2, 1, 5, 7, 2, 1]

    @pytest.mark.parametrize("rate", [0.0, -1.0])
    def test_rate_must_be_positive(self, tiny_model, rate):
        with pytest.raises(ParameterError):
            state_plan(utterance_labels(), tiny_model, rate)

    def test_empty_labels(self, tiny_model):
        with pytest.raises(ParameterError):
            state_plan([], tiny_model)


class TestGenerateParameters:
    def test_unsmoothed_frames_repeat_state_means(self, tiny_model):
        mel = generate_parameters(utterance_labels(), tiny_model, smooth="none")
        expected = [[-5, -5], [-4, -6], [1, -1], [1, -1], [2, 0], [2, 0], [2, 0], [2, 0], [-5, -5], [-4, -6]]
        assert_array_equal(mel.frames, np.array(expected, dtype=np.float64))
        assert mel.frame_shift_ms == 10.0
        assert mel.sample_rate_hz == 16000

    def test_smoothed_frames_beat_the_step_trajectory(self, tiny_model):
        smooth = generate_parameters(utterance_labels(), tiny_model).frames
        rough = generate_parameters(utterance_labels(), tiny_model, smooth="none").frames
        assert smooth.shape == rough.shape == (10, 2)

        # statics are the step means, deltas have mean 0 and unit variance everywhere
        first = delta_window_matrix(10, 1).toarray()

        def cost(c):
            return np.sum((c - rough) ** 2) + np.sum((first @ c) ** 2) + np.sum((first @ first @ c) ** 2)

        assert cost(smooth) < cost(rough)
        assert not np.allclose(smooth, rough)

    def test_unknown_phone(self, tiny_model):
        with pytest.raises(InsufficientDataError) as info:
            generate_parameters([label("zz")], tiny_model)
        assert info.value.phones == ["zz"]

    def test_unknown_smoothing(self, tiny_model):
        with pytest.raises(ParameterError):
            generate_parameters(utterance_labels(), tiny_model, smooth="spline")
