# melhts/analysis.py

from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import librosa
import numpy as np
import scipy.sparse as sp
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks, get_window

from melhts.config import ENERGY_FLOOR, LOG_FLOOR, logger
from melhts.exceptions import InputError, ParameterError
from melhts.models import (
    AudioBuffer,
    Boundary,
    BoundarySet,
    BoundarySource,
    EnergyContour,
    FluxContour,
    FrameSpec,
    GdFunction,
    MelFilterbank,
    MelSpectrogram,
)
from melhts.storage import write_csv

_SCIPY_WINDOWS = {"hann": "hann", "hamming": "hamming", "rect": "boxcar"}
MIN_GD_LENGTH = 8


# ---------------------------
# FRAMING AND STFT
# ---------------------------

def analysis_window(spec: FrameSpec, sample_rate_hz: int) -> np.ndarray:
    return get_window(_SCIPY_WINDOWS[spec.window], spec.frame_length_samples(sample_rate_hz), fftbins=True)


def frame_signal(samples: np.ndarray, spec: FrameSpec, sample_rate_hz: int) -> np.ndarray:
    """
    Cuts `samples` into T x frame_length frames, T = 1 + (len - frame_length) // hop.

    Raises:
        InputError: If the signal is shorter than one frame.
    """
    frame_length = spec.frame_length_samples(sample_rate_hz)
    hop = spec.hop_samples(sample_rate_hz)
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    if samples.size < frame_length:
        raise InputError(f"signal has {samples.size} samples, shorter than one frame ({frame_length})")
    return librosa.util.frame(samples, frame_length=frame_length, hop_length=hop, axis=0)


def stft(samples: np.ndarray, spec: FrameSpec, sample_rate_hz: int) -> np.ndarray:
    """Complex T x (fft_size/2 + 1) STFT of windowed frames zero-padded to fft_size."""
    spec.check_sample_rate(sample_rate_hz)
    frames = frame_signal(samples, spec, sample_rate_hz) * analysis_window(spec, sample_rate_hz)
    return np.fft.rfft(frames, n=spec.fft_size, axis=1)


def stft_magnitude(audio: AudioBuffer, spec: FrameSpec) -> np.ndarray:
    return np.abs(stft(audio.samples, spec, audio.sample_rate_hz))


def log_energies(energies: np.ndarray) -> np.ndarray:
    """log(max(e, ENERGY_FLOOR)), clamped at LOG_FLOOR."""
    safe = np.where(energies > ENERGY_FLOOR, energies, 1.0)
    return np.maximum(np.where(energies > ENERGY_FLOOR, np.log(safe), LOG_FLOOR), LOG_FLOOR)


# ---------------------------
# MEL FILTERBANK
# ---------------------------

def build_mel_filterbank(num_filters: int, sample_rate_hz: int, fft_size: int,
                         fmin_hz: float = 0.0, fmax_hz: Optional[float] = None) -> MelFilterbank:
    """
    Triangular, unnormalized filters with centers equally spaced on
    m(f) = 2595 log10(1 + f/700).

    Raises:
        ParameterError: Naming the first out-of-range argument.
    """
    if fmax_hz is None:
        fmax_hz = sample_rate_hz / 2.0
    if fft_size < 2 or fft_size & (fft_size - 1):
        raise ParameterError("fft_size", f"{fft_size} is not a power of two")
    if not 1 <= num_filters <= fft_size // 2:
        raise ParameterError("num_filters", f"{num_filters} is outside [1, {fft_size // 2}]")
    if fmin_hz < 0:
        raise ParameterError("fmin_hz", f"{fmin_hz} is negative")
    if fmax_hz > sample_rate_hz / 2.0:
        raise ParameterError("fmax_hz", f"{fmax_hz} exceeds the Nyquist frequency")
    if fmin_hz >= fmax_hz:
        raise ParameterError("fmin_hz", f"{fmin_hz} is not below fmax_hz={fmax_hz}")

    weights = librosa.filters.mel(sr=sample_rate_hz, n_fft=fft_size, n_mels=num_filters,
                                  fmin=fmin_hz, fmax=fmax_hz, htk=True, norm=None, dtype=np.float64)
    return MelFilterbank(num_filters=num_filters, sample_rate_hz=sample_rate_hz, fft_size=fft_size,
                         fmin_hz=float(fmin_hz), fmax_hz=float(fmax_hz), weights=weights)


def filter_centers_hz(fb: MelFilterbank) -> np.ndarray:
    edges = librosa.mel_frequencies(n_mels=fb.num_filters + 2, fmin=fb.fmin_hz, fmax=fb.fmax_hz, htk=True)
    return edges[1:-1]


def mel_spectrogram(audio: AudioBuffer, spec: FrameSpec, fb: MelFilterbank) -> MelSpectrogram:
    """
    Log mel energies, one row per frame.

    Raises:
        ParameterError: If the filterbank does not match the audio or frame spec.
        InputError: If the audio is shorter than one frame.
    """
    if fb.sample_rate_hz != audio.sample_rate_hz:
        raise ParameterError("sample_rate_hz",
                             f"filterbank is for {fb.sample_rate_hz} Hz, audio is {audio.sample_rate_hz} Hz")
    if fb.fft_size != spec.fft_size:
        raise ParameterError("fft_size", f"filterbank uses {fb.fft_size}, frame spec uses {spec.fft_size}")
    power = stft_magnitude(audio, spec) ** 2
    frames = log_energies(power @ fb.weights.T)
    return MelSpectrogram(frames=frames, frame_shift_ms=spec.frame_shift_ms, num_filters=fb.num_filters,
                          log_floor=LOG_FLOOR, sample_rate_hz=audio.sample_rate_hz)


# ---------------------------
# CONTOURS
# ---------------------------

def short_term_energy(audio: AudioBuffer, spec: FrameSpec) -> EnergyContour:
    frames = frame_signal(audio.samples, spec, audio.sample_rate_hz)
    windowed = frames * analysis_window(spec, audio.sample_rate_hz)
    return EnergyContour(values=np.sum(windowed * windowed, axis=1), frame_shift_ms=spec.frame_shift_ms)


def _band_masks(band_edges_hz, fft_size: int, sample_rate_hz: int) -> np.ndarray:
    nyquist = sample_rate_hz / 2.0
    freqs = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate_hz)
    masks = []
    previous_high = -np.inf
    for low, high in band_edges_hz:
        if not 0 <= low < high <= nyquist:
            raise ParameterError("band_edges_hz", f"band ({low}, {high}) is outside [0, {nyquist}]")
        if low < previous_high:
            raise ParameterError("band_edges_hz", "bands must be ascending and non-overlapping")
        previous_high = high
        mask = (freqs >= low) & (freqs < high)
        if high >= nyquist:
            mask |= freqs == nyquist
        masks.append(mask)
    return np.array(masks)


def sub_band_spectral_flux(stft_mag: np.ndarray, band_edges_hz: Sequence[Tuple[float, float]],
                           spec: FrameSpec, sample_rate_hz: int,
                           weights: Optional[Sequence[float]] = None) -> FluxContour:
    """
    Positive frame-to-frame magnitude change summed inside each band.
    value_t = sum_b w_b * sum_{k in b} max(|S(t,k)| - |S(t-1,k)|, 0), value_0 = 0.

    Raises:
        InputError: If fewer than two frames are given.
        ParameterError: If a band leaves [0, Nyquist] or the weights do not match the bands.
    """
    stft_mag = np.asarray(stft_mag, dtype=np.float64)
    if stft_mag.ndim != 2 or stft_mag.shape[0] < 2:
        raise InputError("spectral flux needs at least two frames")
    if stft_mag.shape[1] != spec.fft_size // 2 + 1:
        raise ParameterError("stft_mag", f"expected {spec.fft_size // 2 + 1} bins, got {stft_mag.shape[1]}")
    bands = [(float(low), float(high)) for low, high in band_edges_hz]
    masks = _band_masks(bands, spec.fft_size, sample_rate_hz)
    if weights is None:
        weights = np.ones(len(bands))
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(bands),) or np.any(weights < 0):
        raise ParameterError("weights", "one nonnegative weight per band is required")

    rise = np.maximum(np.diff(stft_mag, axis=0), 0.0)
    # (T-1) x bands, then weighted sum over bands
    per_band = rise @ masks.T.astype(np.float64)
    values = np.concatenate(([0.0], per_band @ weights))
    return FluxContour(values=values, band_edges_hz=bands, frame_shift_ms=spec.frame_shift_ms)


Contour = Union[EnergyContour, FluxContour]


def smooth_contour(contour: Contour, points: int = 5) -> Contour:
    """Moving average over `points` frames with replicated edges."""
    if points <= 1:
        return contour
    smoothed = uniform_filter1d(contour.values, size=points, mode="nearest")
    return contour.model_copy(update={"values": np.maximum(smoothed, 0.0)})


def export_contour_csv(contour: Union[Contour, GdFunction], path: Path, offset_ms: float = 0.0) -> int:
    shift = contour.frame_shift_ms
    rows = ((t, repr(t * shift + offset_ms), repr(float(v))) for t, v in enumerate(contour.values))
    return write_csv(path, ("frame_index", "time_ms", "value"), rows)


# ---------------------------
# DELTA FEATURES
# ---------------------------

def delta_window_matrix(num_frames: int, half_window: int) -> sp.csr_matrix:
    """
    Sparse T x T regression operator: (W x)_t = sum_k k x_{clip(t+k)} / (2 sum_k k^2).
    """
    offsets = np.arange(-half_window, half_window + 1)
    norm = 2.0 * np.sum(np.arange(1, half_window + 1) ** 2)
    rows = np.repeat(np.arange(num_frames), offsets.size)
    cols = np.clip(rows + np.tile(offsets, num_frames), 0, num_frames - 1)
    data = np.tile(offsets / norm, num_frames)
    # duplicate (row, col) pairs from clipping are summed on conversion
    return sp.csr_matrix((data, (rows, cols)), shape=(num_frames, num_frames))


def delta_features(feat: np.ndarray, half_window: int = 2) -> np.ndarray:
    """
    Stacks [static | delta | delta-delta] along the feature axis.

    Raises:
        InputError: If T < 2 * half_window + 1.
    """
    feat = np.asarray(feat, dtype=np.float64)
    if half_window < 1:
        raise ParameterError("half_window", f"{half_window} must be at least 1")
    if feat.ndim != 2 or feat.shape[0] < 2 * half_window + 1:
        raise InputError(f"delta features need at least {2 * half_window + 1} frames")
    window = delta_window_matrix(feat.shape[0], half_window)
    delta = window @ feat
    return np.hstack([feat, delta, window @ delta])


# ---------------------------
# GROUP DELAY
# ---------------------------

def min_phase_group_delay(contour: Contour, wsf: int = 8, invert: bool = False) -> GdFunction:
    """
    Group delay of the minimum-phase signal whose log magnitude is the contour.

    The floored contour (reciprocal when `invert`) is log-compressed and
    mean-removed, mirrored into an even spectrum of length 2N, turned into
    a causal cepstrum and truncated to max(2, N // wsf) coefficients. The
    group delay at w_k = pi k / N is sum_n n c[n] cos(n w_k).

    Raises:
        InputError: If the contour has fewer than 8 frames.
        ParameterError: If wsf < 1.
    """
    values = np.asarray(contour.values, dtype=np.float64)
    n = values.size
    if n < MIN_GD_LENGTH:
        raise InputError(f"group delay needs at least {MIN_GD_LENGTH} frames, got {n}")
    if wsf < 1:
        raise ParameterError("wsf", f"{wsf} must be at least 1")

    peak = float(np.max(values))
    floor = ENERGY_FLOOR * peak if peak > 0 else ENERGY_FLOOR
    log_mag = np.log(np.maximum(values, floor))
    if invert:
        log_mag = -log_mag
    log_mag = log_mag - np.mean(log_mag)
    if np.allclose(log_mag, 0.0, atol=1e-12):
        return GdFunction(values=np.zeros(n), wsf=wsf, frame_shift_ms=contour.frame_shift_ms)

    symmetric = np.concatenate((log_mag, log_mag[-1:], log_mag[:0:-1]))
    cepstrum = np.fft.ifft(symmetric).real
    kept = max(2, n // wsf)
    folded = np.zeros(2 * n)
    folded[1:kept] = 2.0 * cepstrum[1:kept]
    ramp = np.arange(2 * n) * folded
    group_delay = np.fft.rfft(ramp).real[:n]
    return GdFunction(values=group_delay, wsf=wsf, frame_shift_ms=contour.frame_shift_ms)


def pick_peaks(gd: GdFunction, min_separation_ms: float = 60.0, threshold_ratio: float = 0.1,
               offset_ms: float = 0.0, duration_ms: Optional[float] = None) -> BoundarySet:
    """
    Local maxima of `gd` strictly above threshold_ratio * max(gd), thinned greedily
    (largest first) so that picks are at least `min_separation_ms` apart.
    Frame t maps to t * frame_shift_ms + offset_ms.
    """
    if not 0 < threshold_ratio <= 1:
        raise ParameterError("threshold_ratio", f"{threshold_ratio} is outside (0, 1]")
    if min_separation_ms <= 0:
        raise ParameterError("min_separation_ms", f"{min_separation_ms} must be positive")
    shift = gd.frame_shift_ms
    if duration_ms is None:
        duration_ms = gd.values.size * shift + offset_ms

    top = float(np.max(gd.values)) if gd.values.size else 0.0
    if top <= 0:
        return BoundarySet(boundaries=[], utterance_duration_ms=duration_ms, frame_shift_ms=shift)

    distance = max(1, int(np.ceil(min_separation_ms / shift - 1e-9)))
    # a peak level with the threshold is dropped
    peaks, _ = find_peaks(gd.values, height=np.nextafter(threshold_ratio * top, np.inf), distance=distance)
    boundaries = [Boundary(time_ms=t * shift + offset_ms, source=BoundarySource.GD)
                  for t in peaks if 0 <= t * shift + offset_ms <= duration_ms]
    logger.debug(f"event=gd_peaks frames={gd.values.size} picked={len(boundaries)}")
    return BoundarySet(boundaries=boundaries, utterance_duration_ms=duration_ms, frame_shift_ms=shift)
