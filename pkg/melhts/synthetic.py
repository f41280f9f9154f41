# melhts/synthetic.py

"""
Deterministic synthetic speech-like material: syllable trains with known
boundaries and a small labelled corpus for smoke runs and tests.
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.signal import butter, sosfilt

from melhts.config import SILENCE_PHONE, logger
from melhts.models import AudioBuffer, PhoneClass
from melhts.storage import atomic_write_text
from melhts.wavio import write_wav

# Background level of pauses and gaps.
NOISE_FLOOR = 1e-3

_PHONE_CLASSES: Dict[str, PhoneClass] = {
    "a": PhoneClass.VOWEL,
    "aa": PhoneClass.VOWEL,
    "i": PhoneClass.VOWEL,
    "k": PhoneClass.STOP,
    "t": PhoneClass.STOP,
    "r": PhoneClass.SEMIVOWEL,
    "s": PhoneClass.FRICATIVE,
    "m": PhoneClass.NASAL,
    "ch": PhoneClass.AFFRICATE,
    SILENCE_PHONE: PhoneClass.SILENCE,
}

_WORDS: Dict[str, Tuple[str, ...]] = {
    "ka": ("k", "a"),
    "taa": ("t", "aa"),
    "mi": ("m", "i"),
    "sa": ("s", "a"),
    "ra": ("r", "a"),
    "chi": ("ch", "i"),
    "kami": ("k", "a", "m", "i"),
    "tasa": ("t", "a", "s", "a"),
    "mira": ("m", "i", "r", "a"),
    "iska": ("i", "s", "k", "a"),
}

# formant-like emphasis per vowel (Hz)
_VOWEL_FORMANTS = {"a": (700.0, 1200.0), "aa": (800.0, 1300.0), "i": (300.0, 2300.0)}

# (min, max) duration in ms per class
_DURATIONS_MS = {
    PhoneClass.VOWEL: (90.0, 130.0),
    PhoneClass.STOP: (50.0, 70.0),
    PhoneClass.FRICATIVE: (70.0, 100.0),
    PhoneClass.AFFRICATE: (70.0, 100.0),
    PhoneClass.NASAL: (50.0, 80.0),
    PhoneClass.SEMIVOWEL: (50.0, 70.0),
    PhoneClass.SILENCE: (100.0, 120.0),
}


class ToyUtterance(BaseModel):
    utterance_id: str
    transcript: str
    wav_path: Path
    phone_ends_ms: List[float]


class ToyCorpus(BaseModel):
    directory: Path
    manifest_path: Path
    lexicon_path: Path
    phone_class_path: Path
    utterances: List[ToyUtterance]


def toy_lexicon() -> Tuple[Dict[str, Tuple[str, ...]], Dict[str, PhoneClass]]:
    """Words and phone classes of the toy language."""
    return dict(_WORDS), dict(_PHONE_CLASSES)


# ---------------------------
# SIGNAL BUILDING BLOCKS
# ---------------------------

def _envelope(length: int, ramp: int) -> np.ndarray:
    env = np.ones(length)
    ramp = min(ramp, length // 2)
    if ramp > 0:
        rise = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = rise
        env[length - ramp:] = rise[::-1]
    return env


def _harmonics(length: int, sample_rate_hz: int, f0: float, max_hz: float,
               formants: Sequence[float] = (), bandwidth_hz: float = 300.0) -> np.ndarray:
    t = np.arange(length) / sample_rate_hz
    signal = np.zeros(length)
    for k in range(1, int(max_hz // f0) + 1):
        freq = k * f0
        gain = 1.0 / k
        for formant in formants:
            gain += np.exp(-0.5 * ((freq - formant) / bandwidth_hz) ** 2)
        signal += gain * np.sin(2.0 * np.pi * freq * t)
    peak = np.max(np.abs(signal))
    return signal / peak if peak > 0 else signal


def _band_noise(rng: np.random.Generator, length: int, sample_rate_hz: int, low_hz: float) -> np.ndarray:
    sos = butter(4, low_hz, btype="highpass", fs=sample_rate_hz, output="sos")
    noise = sosfilt(sos, rng.standard_normal(length))
    peak = np.max(np.abs(noise))
    return noise / peak if peak > 0 else noise


def _phone_signal(rng: np.random.Generator, phone: str, length: int, sample_rate_hz: int, f0: float) -> np.ndarray:
    phone_class = _PHONE_CLASSES[phone]
    ramp = int(0.01 * sample_rate_hz)
    nyquist = sample_rate_hz / 2.0
    if phone_class is PhoneClass.VOWEL:
        body = 0.5 * _harmonics(length, sample_rate_hz, f0, min(4000.0, nyquist - f0), _VOWEL_FORMANTS[phone])
        return body * _envelope(length, ramp)
    if phone_class is PhoneClass.NASAL:
        return 0.15 * _harmonics(length, sample_rate_hz, f0, 500.0) * _envelope(length, ramp)
    if phone_class is PhoneClass.SEMIVOWEL:
        return 0.2 * _harmonics(length, sample_rate_hz, f0, 1500.0, (500.0,)) * _envelope(length, ramp)
    if phone_class is PhoneClass.FRICATIVE:
        return 0.12 * _band_noise(rng, length, sample_rate_hz, min(3000.0, 0.6 * nyquist)) * _envelope(length, ramp)
    if phone_class in (PhoneClass.STOP, PhoneClass.AFFRICATE):
        closure = int(0.6 * length) if phone_class is PhoneClass.STOP else int(0.3 * length)
        out = NOISE_FLOOR * rng.standard_normal(length)
        release = length - closure
        cutoff = 1000.0 if phone_class is PhoneClass.STOP else min(3000.0, 0.6 * nyquist)
        out[closure:] += 0.15 * _band_noise(rng, release, sample_rate_hz, cutoff) * _envelope(release, ramp // 2)
        return out
    return NOISE_FLOOR * rng.standard_normal(length)


# ---------------------------
# SYLLABLE TRAINS
# ---------------------------

def synth_syllable_utterance(rng: np.random.Generator, num_syllables: int = 6, sample_rate_hz: int = 16000,
                             burst_ms: Tuple[float, float] = (110.0, 160.0),
                             gap_ms: Tuple[float, float] = (50.0, 80.0)) -> Tuple[AudioBuffer, List[float]]:
    """
    Vowel-like harmonic bursts separated by low-energy gaps.

    Returns the audio and the true syllable boundaries: the centre of every
    gap between two bursts, in ms.
    """
    pieces = []
    boundaries = []
    cursor = 0

    def gap() -> int:
        return int(rng.uniform(*gap_ms) * sample_rate_hz / 1000.0)

    lead = gap()
    pieces.append(NOISE_FLOOR * rng.standard_normal(lead))
    cursor += lead
    for index in range(num_syllables):
        length = int(rng.uniform(*burst_ms) * sample_rate_hz / 1000.0)
        f0 = rng.uniform(110.0, 180.0)
        vowel = ("a", "aa", "i")[index % 3]
        pieces.append(_phone_signal(rng, vowel, length, sample_rate_hz, f0))
        cursor += length
        pause = gap()
        pieces.append(NOISE_FLOOR * rng.standard_normal(pause))
        if index < num_syllables - 1:
            boundaries.append(1000.0 * (cursor + pause / 2.0) / sample_rate_hz)
        cursor += pause
    samples = np.clip(np.concatenate(pieces), -1.0, 1.0)
    return AudioBuffer(samples=samples, sample_rate_hz=sample_rate_hz), boundaries


# ---------------------------
# TOY CORPUS
# ---------------------------

def synth_utterance(rng: np.random.Generator, phones: Sequence[str],
                    sample_rate_hz: int = 16000) -> Tuple[AudioBuffer, List[float]]:
    """Audio of a phone sequence and the end time (ms) of every phone."""
    f0 = rng.uniform(110.0, 160.0)
    pieces, ends, cursor = [], [], 0
    for phone in phones:
        low, high = _DURATIONS_MS[_PHONE_CLASSES[phone]]
        length = int(rng.uniform(low, high) * sample_rate_hz / 1000.0)
        pieces.append(_phone_signal(rng, phone, length, sample_rate_hz, f0))
        cursor += length
        ends.append(1000.0 * cursor / sample_rate_hz)
    samples = np.clip(np.concatenate(pieces), -1.0, 1.0)
    return AudioBuffer(samples=samples, sample_rate_hz=sample_rate_hz), ends


def write_toy_corpus(directory: Path, num_utterances: int = 20, seed: int = 0, sample_rate_hz: int = 16000,
                     words_per_utterance: Tuple[int, int] = (2, 4), words: Optional[Sequence[str]] = None) -> ToyCorpus:
    """
    Writes WAV files, `manifest.tsv`, `lexicon.txt` and `phones.txt` for a
    random corpus over the toy lexicon. Identical seeds give identical files.
    """
    directory = Path(directory)
    rng = np.random.default_rng(seed)
    vocabulary = sorted(words or _WORDS)

    lexicon_path = directory / "lexicon.txt"
    phone_class_path = directory / "phones.txt"
    atomic_write_text(lexicon_path, "".join(f"{w}\t{' '.join(p)}\n" for w, p in sorted(_WORDS.items())))
    atomic_write_text(phone_class_path, "".join(f"{p}\t{c.value}\n" for p, c in sorted(_PHONE_CLASSES.items())))

    utterances = []
    for index in range(num_utterances):
        utterance_id = f"toy_{index:04d}"
        count = int(rng.integers(words_per_utterance[0], words_per_utterance[1] + 1))
        transcript = [vocabulary[int(i)] for i in rng.integers(0, len(vocabulary), size=count)]
        phones = [SILENCE_PHONE] + [p for w in transcript for p in _WORDS[w]] + [SILENCE_PHONE]
        audio, ends = synth_utterance(rng, phones, sample_rate_hz)
        wav_path = directory / "wav" / f"{utterance_id}.wav"
        write_wav(audio, wav_path)
        utterances.append(ToyUtterance(utterance_id=utterance_id, transcript=" ".join(transcript),
                                       wav_path=wav_path, phone_ends_ms=ends))

    manifest_path = directory / "manifest.tsv"
    atomic_write_text(manifest_path, "".join(f"{u.utterance_id}\twav/{u.wav_path.name}\t{u.transcript}\n"
                                             for u in utterances))
    logger.info(f"event=toy_corpus_written dir={directory} utterances={num_utterances} seed={seed}")
    return ToyCorpus(directory=directory, manifest_path=manifest_path, lexicon_path=lexicon_path,
                     phone_class_path=phone_class_path, utterances=utterances)
