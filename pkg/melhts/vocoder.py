# melhts/vocoder.py

from typing import Callable, Optional

import numpy as np

from melhts.analysis import analysis_window, stft
from melhts.config import logger
from melhts.exceptions import ParameterError
from melhts.models import AudioBuffer, FrameSpec, LinearMagnitude, MelFilterbank, MelSpectrogram
from melhts.storage import export_mel, import_mel

__all__ = [
    "export_mel",
    "griffin_lim",
    "import_mel",
    "istft",
    "mel_l1",
    "mel_to_audio",
    "mel_to_linear",
    "spectral_convergence",
]

# Overlap-add normalisation skips samples whose summed squared window is below this.
_WINDOW_EPS = 1e-12


def mel_to_linear(mel: MelSpectrogram, fb: MelFilterbank) -> LinearMagnitude:
    """
    Least-squares linear magnitudes: exp(mel) through the pseudo-inverse of
    the filterbank, negative powers clamped to zero, then the square root.
    """
    if mel.num_filters != fb.num_filters:
        raise ParameterError("num_filters", f"mel has {mel.num_filters} filters, filterbank has {fb.num_filters}")
    power = np.exp(mel.frames) @ np.linalg.pinv(fb.weights).T
    magnitudes = np.sqrt(np.maximum(power, 0.0))
    return LinearMagnitude(magnitudes=magnitudes, frame_shift_ms=mel.frame_shift_ms,
                           sample_rate_hz=fb.sample_rate_hz, fft_size=fb.fft_size)


def istft(spectrum: np.ndarray, spec: FrameSpec, sample_rate_hz: int) -> np.ndarray:
    """
    Least-squares inverse of `analysis.stft`: windowed overlap-add divided
    by the summed squared window.
    """
    frame_length = spec.frame_length_samples(sample_rate_hz)
    hop = spec.hop_samples(sample_rate_hz)
    window = analysis_window(spec, sample_rate_hz)
    frames = np.fft.irfft(spectrum, n=spec.fft_size, axis=1)[:, :frame_length] * window
    num_frames = frames.shape[0]
    length = (num_frames - 1) * hop + frame_length
    index = (np.arange(num_frames) * hop)[:, None] + np.arange(frame_length)
    signal = np.zeros(length)
    norm = np.zeros(length)
    np.add.at(signal, index, frames)
    np.add.at(norm, index, np.broadcast_to(window * window, frames.shape))
    covered = norm > _WINDOW_EPS
    signal[covered] /= norm[covered]
    return signal


def griffin_lim(mag: LinearMagnitude, iterations: int, spec: FrameSpec, seed: int = 0,
                on_iteration: Optional[Callable[[int, np.ndarray], None]] = None) -> AudioBuffer:
    """
    Phase reconstruction by alternating projections.

    Starts from uniformly random phase drawn from `seed` (zero phase when
    iterations == 0) and repeats STFT -> keep phase -> ISTFT. `on_iteration`
    sees the signal after every step, including the starting point
    (iteration 0). The result is scaled down only if it exceeds full scale.
    """
    if iterations < 0:
        raise ParameterError("iterations", f"{iterations} is negative")
    if mag.fft_size != spec.fft_size:
        raise ParameterError("fft_size", f"magnitudes use {mag.fft_size}, frame spec uses {spec.fft_size}")
    sample_rate_hz = mag.sample_rate_hz
    spec.check_sample_rate(sample_rate_hz)

    if iterations == 0:
        phase = np.ones(mag.magnitudes.shape, dtype=np.complex128)
    else:
        rng = np.random.default_rng(seed)
        phase = np.exp(2j * np.pi * rng.random(mag.magnitudes.shape))
    signal = istft(mag.magnitudes * phase, spec, sample_rate_hz)
    if on_iteration is not None:
        on_iteration(0, signal)

    for iteration in range(1, iterations + 1):
        rebuilt = stft(signal, spec, sample_rate_hz)
        signal = istft(mag.magnitudes * np.exp(1j * np.angle(rebuilt)), spec, sample_rate_hz)
        if on_iteration is not None:
            on_iteration(iteration, signal)

    peak = float(np.max(np.abs(signal)))
    if peak > 1.0:
        signal = signal / peak
    logger.debug(f"event=griffin_lim iterations={iterations} frames={mag.magnitudes.shape[0]} peak={peak:.6f}")
    return AudioBuffer(samples=signal, sample_rate_hz=sample_rate_hz)


def spectral_convergence(samples: np.ndarray, mag: LinearMagnitude, spec: FrameSpec) -> float:
    """||  |STFT(y)| - mag  ||_F / ||mag||_F over the frames both cover."""
    rebuilt = np.abs(stft(samples, spec, mag.sample_rate_hz))
    count = min(rebuilt.shape[0], mag.magnitudes.shape[0])
    target = mag.magnitudes[:count]
    error = float(np.linalg.norm(rebuilt[:count] - target))
    reference = float(np.linalg.norm(target))
    return error / reference if reference > 0 else error


def mel_to_audio(mel: MelSpectrogram, fb: MelFilterbank, spec: FrameSpec, iterations: int = 64,
                 seed: int = 0) -> AudioBuffer:
    return griffin_lim(mel_to_linear(mel, fb), iterations, spec, seed=seed)


def mel_l1(a: MelSpectrogram, b: MelSpectrogram) -> float:
    """Mean absolute difference of two equally shaped mel-spectrograms."""
    if a.frames.shape != b.frames.shape:
        raise ParameterError("shape", f"cannot compare {a.frames.shape} with {b.frames.shape}")
    return float(np.mean(np.abs(a.frames - b.frames)))
