# melhts/models.py

import re
from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from melhts.config import LOG_FLOOR, PAD_PHONE, SUPPORTED_SAMPLE_RATES
from melhts.exceptions import ParameterError

# Characters that delimit the fields of a serialized context label.
LABEL_DELIMITERS = "^-+=@:/"


def _as_float_array(value, ndim: int, name: str) -> np.ndarray:
    array = np.asarray(value, dtype=np.float64)
    if array.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-D, got shape {array.shape}")
    return array


class ArrayRecord(BaseModel):
    """Base for immutable records that carry numpy arrays."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# ---------------------------
# SIGNAL ANALYSIS RECORDS
# ---------------------------

class AudioBuffer(ArrayRecord):
    """
    Mono audio at one of the supported sample rates.
    Samples are finite and lie in [-1, 1].
    """
    samples: np.ndarray
    sample_rate_hz: int

    @field_validator("samples", mode="before")
    @classmethod
    def to_array(cls, value):
        return _as_float_array(value, 1, "samples")

    @model_validator(mode="after")
    def check_samples(self):
        if self.samples.size == 0:
            raise ValueError("audio must contain at least one sample")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio samples must be finite")
        if np.max(np.abs(self.samples)) > 1.0:
            raise ValueError("audio samples must lie in [-1, 1]")
        if self.sample_rate_hz not in SUPPORTED_SAMPLE_RATES:
            raise ValueError(f"sample_rate_hz must be one of {SUPPORTED_SAMPLE_RATES}")
        return self

    @property
    def duration_ms(self) -> float:
        return 1000.0 * self.samples.size / self.sample_rate_hz


class FrameSpec(BaseModel):
    """Frame geometry shared by STFT, mel, energy and flux computations."""
    model_config = ConfigDict(frozen=True)

    frame_length_ms: float = Field(gt=0)
    frame_shift_ms: float = Field(gt=0)
    window: Literal["hann", "hamming", "rect"] = "hann"
    fft_size: int = Field(gt=0)

    @model_validator(mode="after")
    def check_geometry(self):
        if self.frame_shift_ms > self.frame_length_ms:
            raise ValueError("frame_shift_ms must not exceed frame_length_ms")
        if self.fft_size & (self.fft_size - 1):
            raise ValueError("fft_size must be a power of two")
        return self

    def frame_length_samples(self, sample_rate_hz: int) -> int:
        return int(round(self.frame_length_ms * sample_rate_hz / 1000.0))

    def hop_samples(self, sample_rate_hz: int) -> int:
        return max(1, int(round(self.frame_shift_ms * sample_rate_hz / 1000.0)))

    def check_sample_rate(self, sample_rate_hz: int) -> None:
        """Raises ParameterError when the FFT cannot hold one frame at this rate."""
        frame_length = self.frame_length_samples(sample_rate_hz)
        if frame_length > self.fft_size:
            raise ParameterError(
                "fft_size", f"{self.fft_size} is shorter than the frame ({frame_length} samples)"
            )


class MelFilterbank(ArrayRecord):
    """Triangular mel filters; `weights` is num_filters x (fft_size/2 + 1)."""
    num_filters: int = Field(ge=1)
    sample_rate_hz: int
    fft_size: int
    fmin_hz: float
    fmax_hz: float
    weights: np.ndarray

    @field_validator("weights", mode="before")
    @classmethod
    def to_array(cls, value):
        return _as_float_array(value, 2, "weights")

    @model_validator(mode="after")
    def check_shape(self):
        expected = (self.num_filters, self.fft_size // 2 + 1)
        if self.weights.shape != expected:
            raise ValueError(f"weights must have shape {expected}, got {self.weights.shape}")
        if np.any(self.weights < 0):
            raise ValueError("filter weights must be nonnegative")
        return self


class MelSpectrogram(ArrayRecord):
    """
    T x num_filters log mel energies; the currency of the whole pipeline.
    Frames and floor are held at float32 precision, the precision of a mel file.
    """
    frames: np.ndarray
    frame_shift_ms: float = Field(gt=0)
    num_filters: int = Field(ge=1)
    log_floor: float = LOG_FLOOR
    sample_rate_hz: int = 22050

    @field_validator("frames", mode="before")
    @classmethod
    def to_array(cls, value):
        return _as_float_array(value, 2, "frames").astype(np.float32).astype(np.float64)

    @field_validator("log_floor", mode="after")
    @classmethod
    def to_float32(cls, value: float) -> float:
        return float(np.float32(value))

    @model_validator(mode="after")
    def check_frames(self):
        if self.frames.shape[0] < 1:
            raise ValueError("a mel spectrogram needs at least one frame")
        if self.frames.shape[1] != self.num_filters:
            raise ValueError(
                f"frames have {self.frames.shape[1]} coefficients but num_filters is {self.num_filters}"
            )
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("mel entries must be finite")
        if np.min(self.frames) < self.log_floor:
            raise ValueError("mel entries must not fall below log_floor")
        return self

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


def _check_contour(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError("contour values must be finite")
    if np.any(values < 0):
        raise ValueError("contour values must be nonnegative")


class EnergyContour(ArrayRecord):
    """Per-frame short-term energy."""
    values: np.ndarray
    frame_shift_ms: float = Field(gt=0)

    @field_validator("values", mode="before")
    @classmethod
    def to_array(cls, value):
        return _as_float_array(value, 1, "values")

    @model_validator(mode="after")
    def check_values(self):
        _check_contour(self.values)
        return self


class FluxContour(ArrayRecord):
    """Per-frame sub-band spectral flux over `band_edges_hz`."""
    values: np.ndarray
    band_edges_hz: List[Tuple[float, float]]
    frame_shift_ms: float = Field(gt=0)

    @field_validator("values", mode="before")
    @classmethod
    def to_array(cls, value):
        return _as_float_array(value, 1, "values")

    @model_validator(mode="after")
    def check_values(self):
        _check_contour(self.values)
        previous_high = -np.inf
        for low, high in self.band_edges_hz:
            if not (0 <= low < high) or low < previous_high:
                raise ValueError("bands must be ascending and non-overlapping")
            previous_high = high
        return self


class GdFunction(ArrayRecord):
    """Group delay of a contour, one value per contour frame."""
    values: np.ndarray
    wsf: int = Field(ge=1)
    frame_shift_ms: float = Field(gt=0)

    @field_validator("values", mode="before")
    @classmethod
    def to_array(cls, value):
        return _as_float_array(value, 1, "values")

    @model_validator(mode="after")
    def check_values(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("group delay values must be finite")
        return self


# ---------------------------
# TEXT RECORDS
# ---------------------------

class PhoneClass(str, Enum):
    VOWEL = "vowel"
    FRICATIVE = "fricative"
    AFFRICATE = "affricate"
    NASAL = "nasal"
    SEMIVOWEL = "semivowel"
    STOP = "stop"
    SILENCE = "silence"
    OTHER = "other"


class Phone(BaseModel):
    """One entry of the phone set."""
    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    phone_class: PhoneClass

    @field_validator("id")
    @classmethod
    def check_id(cls, value: str) -> str:
        if value == PAD_PHONE:
            raise ValueError(f"'{PAD_PHONE}' is reserved as the context padding symbol")
        if any(ch in value for ch in LABEL_DELIMITERS) or any(ch.isspace() for ch in value):
            raise ValueError(f"phone id '{value}' contains a reserved character")
        return value

    @property
    def is_vowel(self) -> bool:
        return self.phone_class is PhoneClass.VOWEL


def count_vowel_runs(phones) -> int:
    runs = 0
    previous = False
    for phone in phones:
        if phone.is_vowel and not previous:
            runs += 1
        previous = phone.is_vowel
    return runs


class Syllable(BaseModel):
    """A C*VC* unit (or a nucleus-free unit such as a pause)."""
    model_config = ConfigDict(frozen=True)

    phones: Tuple[Phone, ...] = Field(min_length=1)
    has_nucleus: bool

    @model_validator(mode="after")
    def check_shape(self):
        runs = count_vowel_runs(self.phones)
        if runs > 1:
            raise ValueError("a syllable holds at most one vowel run")
        if self.has_nucleus != (runs == 1):
            raise ValueError("has_nucleus must match the presence of a vowel run")
        return self

    @classmethod
    def from_phones(cls, phones) -> "Syllable":
        phones = tuple(phones)
        return cls(phones=phones, has_nucleus=count_vowel_runs(phones) == 1)

    @property
    def name(self) -> str:
        return "".join(phone.id for phone in self.phones)


class SyllablePosition(str, Enum):
    ONSET = "onset"
    NUCLEUS = "nucleus"
    CODA = "coda"


_LABEL_PATTERN = re.compile(
    r"^(?P<ll>[^\^]+)\^(?P<l>[^-]+)-(?P<c>[^+]+)\+(?P<r>[^=]+)=(?P<rr>[^@]+)"
    r"@(?P<pos>[a-z]+):(?P<syl>\d+)/(?P<wl>[01])(?P<wr>[01])$"
)


class ContextLabel(BaseModel):
    """Pentaphone context plus syllable position and word-boundary flags."""
    model_config = ConfigDict(frozen=True)

    ll: str
    l: str
    c: str
    r: str
    rr: str
    pos_in_syllable: SyllablePosition
    syllable_index: int = Field(ge=0)
    is_word_boundary_left: bool = False
    is_word_boundary_right: bool = False

    @field_validator("c")
    @classmethod
    def check_center(cls, value: str) -> str:
        if not value or value == PAD_PHONE:
            raise ValueError("the center phone cannot be the padding symbol")
        return value

    def to_htk(self) -> str:
        return (
            f"{self.ll}^{self.l}-{self.c}+{self.r}={self.rr}"
            f"@{self.pos_in_syllable.value}:{self.syllable_index}"
            f"/{int(self.is_word_boundary_left)}{int(self.is_word_boundary_right)}"
        )

    @classmethod
    def parse(cls, text: str) -> "ContextLabel":
        match = _LABEL_PATTERN.match(text.strip())
        if match is None:
            raise ValueError(f"not a context label: '{text}'")
        return cls(
            ll=match["ll"], l=match["l"], c=match["c"], r=match["r"], rr=match["rr"],
            pos_in_syllable=SyllablePosition(match["pos"]),
            syllable_index=int(match["syl"]),
            is_word_boundary_left=match["wl"] == "1",
            is_word_boundary_right=match["wr"] == "1",
        )


# ---------------------------
# SEGMENTATION RECORDS
# ---------------------------

class BoundarySource(str, Enum):
    HMM = "HMM"
    GD = "GD"
    SBSF = "SBSF"
    STE = "STE"


class CorrectionMethod(str, Enum):
    STE = "STE"
    SBSF = "SBSF"
    KEEP = "KEEP"


class CorrectionRule(BaseModel):
    model_config = ConfigDict(frozen=True)

    left_class: PhoneClass
    right_class: PhoneClass
    method: CorrectionMethod


class Boundary(BaseModel):
    model_config = ConfigDict(frozen=True)

    time_ms: float = Field(ge=0)
    source: BoundarySource
    left_unit: str = ""
    right_unit: str = ""


class BoundarySet(BaseModel):
    """
    Ordered boundaries over one utterance.
    When `frame_shift_ms` is set, neighbours are at least one frame shift apart.
    """
    model_config = ConfigDict(frozen=True)

    boundaries: List[Boundary] = Field(default_factory=list)
    utterance_duration_ms: float = Field(ge=0)
    frame_shift_ms: Optional[float] = None

    @model_validator(mode="after")
    def check_order(self):
        times = [b.time_ms for b in self.boundaries]
        for previous, current in zip(times, times[1:]):
            if current <= previous:
                raise ValueError("boundary times must be strictly ascending")
            if self.frame_shift_ms is not None and current - previous < self.frame_shift_ms - 1e-9:
                raise ValueError("boundaries must be at least one frame shift apart")
        if times and times[-1] > self.utterance_duration_ms + 1e-9:
            raise ValueError("boundary lies beyond the end of the utterance")
        return self

    def __len__(self) -> int:
        return len(self.boundaries)

    @property
    def times_ms(self) -> np.ndarray:
        return np.array([b.time_ms for b in self.boundaries], dtype=np.float64)


# ---------------------------
# ALIGNMENT RECORDS
# ---------------------------

class PhoneSegment(BaseModel):
    """
    Frames [start_frame, end_frame) assigned to one phone.
    `state_ends` holds the exclusive end frame of every emitting state.
    """
    unit: str
    phone: str
    start_frame: int = Field(ge=0)
    end_frame: int
    state_ends: List[int]
    label: Optional[ContextLabel] = None

    @model_validator(mode="after")
    def check_states(self):
        if self.end_frame <= self.start_frame:
            raise ValueError("a phone segment needs at least one frame")
        previous = self.start_frame
        for end in self.state_ends:
            if end <= previous:
                raise ValueError("every state occupies at least one frame")
            previous = end
        if not self.state_ends or self.state_ends[-1] != self.end_frame:
            raise ValueError("the last state must end with the segment")
        return self

    @property
    def state_durations(self) -> List[int]:
        starts = [self.start_frame] + self.state_ends[:-1]
        return [end - start for start, end in zip(starts, self.state_ends)]


class AlignmentResult(BaseModel):
    """
    A left-to-right state path split into contiguous phone segments.
    `log_likelihood` includes transition terms; `acoustic_log_likelihood`
    is the sum of the emission log-densities along the same path.
    """
    segments: List[PhoneSegment]
    log_likelihood: float
    acoustic_log_likelihood: float
    num_frames: int = Field(ge=1)

    @model_validator(mode="after")
    def check_cover(self):
        expected = 0
        for segment in self.segments:
            if segment.start_frame != expected:
                raise ValueError("phone segments must be contiguous")
            expected = segment.end_frame
        if expected != self.num_frames:
            raise ValueError("phone segments must cover the utterance")
        return self


# ---------------------------
# HISTOGRAM EQUALIZATION RECORDS
# ---------------------------

class Histogram1D(ArrayRecord):
    bin_edges: np.ndarray
    counts: np.ndarray
    total: int = Field(ge=0)

    @field_validator("bin_edges", mode="before")
    @classmethod
    def edges_to_array(cls, value):
        return _as_float_array(value, 1, "bin_edges")

    @field_validator("counts", mode="before")
    @classmethod
    def counts_to_array(cls, value):
        return np.asarray(value, dtype=np.int64)

    @model_validator(mode="after")
    def check_bins(self):
        if self.bin_edges.size < 2 or np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must be strictly ascending")
        if self.counts.shape != (self.bin_edges.size - 1,):
            raise ValueError("one count per bin is required")
        if np.any(self.counts < 0) or int(self.counts.sum()) != self.total:
            raise ValueError("counts must be nonnegative and sum to total")
        return self

    @property
    def bin_width(self) -> float:
        return float(np.max(np.diff(self.bin_edges)))


class HeqMap(ArrayRecord):
    """Monotone piecewise-linear map for one mel coefficient."""
    knots: np.ndarray
    values: np.ndarray

    @field_validator("knots", "values", mode="before")
    @classmethod
    def to_array(cls, value):
        return _as_float_array(value, 1, "knots/values")

    @model_validator(mode="after")
    def check_monotone(self):
        if self.knots.size < 2 or self.knots.shape != self.values.shape:
            raise ValueError("a map needs at least two (knot, value) pairs")
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be strictly ascending")
        if np.any(np.diff(self.values) < 0):
            raise ValueError("map values must be non-decreasing")
        return self


class HeqLut(BaseModel):
    """One HeqMap per mel coefficient."""
    model_config = ConfigDict(frozen=True)

    maps: List[HeqMap] = Field(min_length=1)

    @property
    def num_coefficients(self) -> int:
        return len(self.maps)


# ---------------------------
# VOCODER RECORDS
# ---------------------------

class LinearMagnitude(ArrayRecord):
    """T x (fft_size/2 + 1) STFT magnitudes."""
    magnitudes: np.ndarray
    frame_shift_ms: float = Field(gt=0)
    sample_rate_hz: int
    fft_size: int

    @field_validator("magnitudes", mode="before")
    @classmethod
    def to_array(cls, value):
        return _as_float_array(value, 2, "magnitudes")

    @model_validator(mode="after")
    def check_magnitudes(self):
        if self.magnitudes.shape[1] != self.fft_size // 2 + 1:
            raise ValueError("magnitudes need fft_size/2 + 1 bins per frame")
        if not np.all(np.isfinite(self.magnitudes)) or np.any(self.magnitudes < 0):
            raise ValueError("magnitudes must be finite and nonnegative")
        return self


# ---------------------------
# CORPUS RECORDS
# ---------------------------

class ManifestEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    utterance_id: str = Field(min_length=1)
    wav_path: Path
    transcript: str


class CorpusManifest(BaseModel):
    entries: List[ManifestEntry]

    @model_validator(mode="after")
    def check_unique_ids(self):
        seen = set()
        for entry in self.entries:
            if entry.utterance_id in seen:
                raise ValueError(f"duplicate utterance id '{entry.utterance_id}'")
            seen.add(entry.utterance_id)
        return self
