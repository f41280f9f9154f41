# melhts/wavio.py

import io
from math import gcd
from pathlib import Path

import numpy as np
import soundfile as sf
from scipy.signal import resample_poly

from melhts.config import logger
from melhts.exceptions import InputError, StorageError
from melhts.models import AudioBuffer
from melhts.storage import atomic_write_bytes


def load_audio(path: Path, target_sample_rate_hz: int) -> AudioBuffer:
    """
    Reads a mono PCM-16 WAV file and resamples it to the working rate.

    Args:
        path: WAV file.
        target_sample_rate_hz: Working sample rate of the pipeline.

    Returns:
        AudioBuffer: Samples in [-1, 1] at `target_sample_rate_hz`.

    Raises:
        StorageError: If the file is missing or unreadable.
        InputError: If the file is multichannel, not PCM-16 or empty.
    """
    path = Path(path)
    if not path.is_file():
        raise StorageError(f"audio file not found: {path}")
    try:
        info = sf.info(str(path))
        if info.channels != 1:
            raise InputError(f"{path}: expected mono audio, found {info.channels} channels")
        if info.subtype != "PCM_16":
            raise InputError(f"{path}: expected PCM_16 samples, found {info.subtype}")
        samples, sample_rate_hz = sf.read(str(path), dtype="float64", always_2d=False)
    except RuntimeError as e:
        raise StorageError(f"cannot read audio {path}: {e}") from e

    if samples.size == 0:
        raise InputError(f"{path}: no samples")

    if sample_rate_hz != target_sample_rate_hz:
        divisor = gcd(int(sample_rate_hz), int(target_sample_rate_hz))
        samples = resample_poly(samples, target_sample_rate_hz // divisor, sample_rate_hz // divisor)
        # the polyphase filter can overshoot full scale slightly
        samples = np.clip(samples, -1.0, 1.0)
        logger.debug(f"event=audio_resampled path={path} from_hz={sample_rate_hz} to_hz={target_sample_rate_hz}")

    return AudioBuffer(samples=samples, sample_rate_hz=target_sample_rate_hz)


def normalize_peak(samples: np.ndarray, peak_dbfs: float = -1.0) -> np.ndarray:
    peak = float(np.max(np.abs(samples))) if samples.size else 0.0
    if peak == 0.0:
        return np.zeros_like(samples)
    return samples * (10.0 ** (peak_dbfs / 20.0) / peak)


def write_wav(audio: AudioBuffer, path: Path, peak_dbfs: float = -1.0) -> int:
    """Writes PCM-16 audio peak-normalized to `peak_dbfs`; silence stays zero."""
    buffer = io.BytesIO()
    sf.write(buffer, normalize_peak(audio.samples, peak_dbfs), audio.sample_rate_hz,
             format="WAV", subtype="PCM_16")
    return atomic_write_bytes(path, buffer.getvalue())
