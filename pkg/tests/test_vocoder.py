import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from melhts.analysis import build_mel_filterbank, filter_centers_hz, mel_spectrogram, stft, stft_magnitude
from melhts.exceptions import ParameterError
from melhts.models import AudioBuffer, FrameSpec, LinearMagnitude, MelSpectrogram
from melhts.vocoder import (
    griffin_lim,
    istft,
    mel_l1,
    mel_to_audio,
    mel_to_linear,
    spectral_convergence,
)

SR = 16000
SPEC = FrameSpec(frame_length_ms=25.0, frame_shift_ms=10.0, fft_size=512)


def mel_of(frames) -> MelSpectrogram:
    frames = np.asarray(frames, dtype=np.float64)
    return MelSpectrogram(frames=frames, frame_shift_ms=10.0, num_filters=frames.shape[1], sample_rate_hz=SR)


def tone(freq_hz: float, seconds: float = 0.3) -> AudioBuffer:
    t = np.arange(int(seconds * SR)) / SR
    return AudioBuffer(samples=0.5 * np.sin(2 * np.pi * freq_hz * t), sample_rate_hz=SR)


def chirp_magnitude(seconds: float = 0.3) -> LinearMagnitude:
    t = np.arange(int(seconds * SR)) / SR
    samples = 0.3 * np.sin(2 * np.pi * (300.0 + 2000.0 * t) * t) + 0.2 * np.sin(2 * np.pi * 1200.0 * t)
    magnitudes = stft_magnitude(AudioBuffer(samples=samples, sample_rate_hz=SR), SPEC)
    return LinearMagnitude(magnitudes=magnitudes, frame_shift_ms=10.0, sample_rate_hz=SR, fft_size=512)


class TestMelToLinear:
    def test_tone_peak_survives(self):
        fb = build_mel_filterbank(40, SR, 512)
        mag = mel_to_linear(mel_spectrogram(tone(1000.0), SPEC, fb), fb)
        assert mag.magnitudes.shape[1] == 257
        peak_hz = np.argmax(mag.magnitudes.mean(axis=0)) * SR / 512
        centres = filter_centers_hz(fb)
        spacing = np.max(np.diff(centres[np.abs(centres - 1000.0) < 300.0]))
        assert abs(peak_hz - 1000.0) <= 2 * spacing

    def test_powers_in_the_filter_span_are_recovered(self, rng):
        fb = build_mel_filterbank(20, SR, 512)
        power = rng.uniform(0.1, 2.0, size=(6, 20)) @ fb.weights
        mel = mel_of(np.log(power @ fb.weights.T))
        mag = mel_to_linear(mel, fb)
        # mel frames carry float32 precision
        assert_allclose(mag.magnitudes ** 2, power, rtol=1e-4, atol=1e-6)

    def test_magnitudes_are_nonnegative(self, rng):
        fb = build_mel_filterbank(20, SR, 512)
        mag = mel_to_linear(mel_of(rng.normal(-3.0, 2.0, size=(5, 20))), fb)
        assert np.all(mag.magnitudes >= 0)

    def test_filter_count_mismatch(self, rng):
        with pytest.raises(ParameterError):
            mel_to_linear(mel_of(rng.normal(size=(3, 10))), build_mel_filterbank(20, SR, 512))


class TestGriffinLim:
    def test_istft_inverts_stft_inside_the_signal(self):
        audio = tone(440.0)
        rebuilt = istft(stft(audio.samples, SPEC, SR), SPEC, SR)
        assert_allclose(rebuilt[400:-400], audio.samples[400:rebuilt.size - 400], atol=1e-9)

    def test_convergence_never_increases(self):
        mag = chirp_magnitude()
        snapshots = {}

        def keep(iteration, signal):
            if iteration in (0, 8, 32, 64):
                snapshots[iteration] = spectral_convergence(signal, mag, SPEC)

        griffin_lim(mag, 64, SPEC, seed=7, on_iteration=keep)
        values = [snapshots[i] for i in (0, 8, 32, 64)]
        assert all(later <= earlier + 1e-9 for earlier, later in zip(values, values[1:]))
        assert values[-1] < values[0]

    def test_callback_sees_every_iteration(self):
        seen = []
        griffin_lim(chirp_magnitude(0.1), 3, SPEC, on_iteration=lambda i, _: seen.append(i))
        assert seen == [0, 1, 2, 3]

    def test_zero_magnitude_is_silence(self):
        mag = LinearMagnitude(magnitudes=np.zeros((10, 257)), frame_shift_ms=10.0, sample_rate_hz=SR, fft_size=512)
        audio = griffin_lim(mag, 4, SPEC)
        assert audio.samples.size == 9 * 160 + 400
        assert_array_equal(audio.samples, 0.0)

    def test_seeded_runs_repeat(self):
        mag = chirp_magnitude(0.1)
        first = griffin_lim(mag, 5, SPEC, seed=3).samples
        assert_array_equal(first, griffin_lim(mag, 5, SPEC, seed=3).samples)
        assert not np.array_equal(first, griffin_lim(mag, 5, SPEC, seed=4).samples)

    def test_output_is_within_full_scale(self):
        audio = griffin_lim(chirp_magnitude(0.1), 2, SPEC)
        assert np.max(np.abs(audio.samples)) <= 1.0

    def test_negative_iterations(self):
        with pytest.raises(ParameterError):
            griffin_lim(chirp_magnitude(0.1), -1, SPEC)

    def test_fft_size_mismatch(self):
        with pytest.raises(ParameterError):
            griffin_lim(chirp_magnitude(0.1), 1, SPEC.model_copy(update={"fft_size": 1024}))

    def test_mel_to_audio(self):
        fb = build_mel_filterbank(20, SR, 512)
        mel = mel_spectrogram(tone(800.0), SPEC, fb)
        audio = mel_to_audio(mel, fb, SPEC, iterations=2)
        assert audio.sample_rate_hz == SR
        assert audio.samples.size == (mel.num_frames - 1) * 160 + 400


class TestMelL1:
    def test_constant_offset(self, rng):
        frames = rng.normal(size=(8, 4))
        assert mel_l1(mel_of(frames), mel_of(frames + 0.75)) == pytest.approx(0.75)
        assert mel_l1(mel_of(frames), mel_of(frames)) == 0.0

    def test_hand_computed_distance(self):
        assert mel_l1(mel_of([[0.0, 1.0], [2.0, 3.0]]), mel_of([[1.0, 1.0], [2.0, 5.0]])) == 0.75

    def test_symmetric_and_triangle(self, rng):
        for _ in range(50):
            a, b, c = (mel_of(rng.normal(size=(6, 3))) for _ in range(3))
            assert mel_l1(a, b) == mel_l1(b, a)
            assert mel_l1(a, c) <= mel_l1(a, b) + mel_l1(b, c) + 1e-12

    def test_shape_mismatch(self, rng):
        with pytest.raises(ParameterError) as info:
            mel_l1(mel_of(rng.normal(size=(8, 4))), mel_of(rng.normal(size=(7, 4))))
        assert info.value.field == "shape"
