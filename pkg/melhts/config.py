# melhts/config.py

import logging
import math
import os
import sys
from pathlib import Path
from typing import Iterable, List, Literal, Optional, Tuple

import numpy as np
from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from melhts.exceptions import ConfigError

# --- Configure Logger ---
# Every module imports this logger; handlers are attached by setup_logging()
# so that importing the library never writes files on its own.
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
logger = logging.getLogger("melhts")
logger.addHandler(logging.NullHandler())
# numba reports every compilation at DEBUG level.
logging.getLogger("numba").setLevel(logging.WARNING)

# --- Load environment variables ---
# A .env file in the working directory may carry MELHTS_* defaults; real
# environment variables win.
load_dotenv(override=False)

# --- Signal constants ---
SUPPORTED_SAMPLE_RATES = (16000, 22050, 44100, 48000)
ENERGY_FLOOR = 1e-10
# Rounded to float32 so that floor rows survive the float32 mel export bit-exactly.
LOG_FLOOR = float(np.float32(math.log(ENERGY_FLOOR)))
DEFAULT_SBSF_BANDS = ((2000.0, 4000.0), (4000.0, 8000.0))

# --- Text constants ---
SILENCE_PHONE = "sil"
PAD_PHONE = "x"

# --- Exit codes (stable CLI contract) ---
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_IO_ERROR = 2
EXIT_DATA_ERROR = 3


def setup_logging(level: Optional[str] = None, log_file: Optional[Path] = None) -> None:
    """
    Attaches the console handler (and optionally a file handler) to the package logger.

    Args:
        level: Logging level name. Defaults to MELHTS_LOG_LEVEL or INFO.
        log_file: Optional path of a log file that receives the same records.
    """
    level_name = (level or os.getenv("MELHTS_LOG_LEVEL", "INFO")).upper()
    if not isinstance(logging.getLevelName(level_name), int):
        raise ConfigError(f"unknown log level '{level_name}'")
    logger.setLevel(level_name)

    # Drop handlers from an earlier call so repeated CLI invocations in one
    # process do not duplicate lines.
    for handler in list(logger.handlers):
        if not isinstance(handler, logging.NullHandler):
            logger.removeHandler(handler)
            handler.close()

    formatter = logging.Formatter(LOG_FORMAT)
    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setFormatter(formatter)
    logger.addHandler(stream_handler)

    if log_file is not None:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.debug(f"event=logging_ready level={level_name} log_file={log_file}")


def _is_power_of_two(value: int) -> bool:
    return value > 0 and (value & (value - 1)) == 0


def _split_list(value):
    # dotenv values arrive as strings: "a,b,c"
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


# ---------------------------
# CONFIGURATION SECTIONS
# ---------------------------

class AnalysisConfig(BaseModel):
    """Working sample rate, frame geometry and mel resolution."""
    model_config = ConfigDict(extra="forbid")

    sample_rate_hz: int = 22050
    frame_length_ms: float = Field(25.0, gt=0)
    frame_shift_ms: float = Field(10.0, gt=0)
    window: Literal["hann", "hamming", "rect"] = "hann"
    fft_size: int = 1024
    num_filters: int = Field(80, ge=1)
    fmin_hz: float = Field(0.0, ge=0)
    fmax_hz: Optional[float] = None
    ste_frame_length_ms: float = Field(20.0, gt=0)
    delta_half_window: int = Field(2, ge=1)

    @field_validator("sample_rate_hz")
    @classmethod
    def check_sample_rate(cls, value: int) -> int:
        if value not in SUPPORTED_SAMPLE_RATES:
            raise ValueError(f"sample_rate_hz must be one of {SUPPORTED_SAMPLE_RATES}")
        return value

    @field_validator("fft_size")
    @classmethod
    def check_fft_size(cls, value: int) -> int:
        if not _is_power_of_two(value):
            raise ValueError("fft_size must be a power of two")
        return value

    @model_validator(mode="after")
    def check_geometry(self):
        if self.frame_shift_ms > self.frame_length_ms:
            raise ValueError("frame_shift_ms must not exceed frame_length_ms")
        if self.frame_shift_ms > self.ste_frame_length_ms:
            raise ValueError("frame_shift_ms must not exceed ste_frame_length_ms")
        longest = max(self.frame_length_ms, self.ste_frame_length_ms)
        if round(longest * self.sample_rate_hz / 1000.0) > self.fft_size:
            raise ValueError("fft_size must cover the frame length in samples")
        if self.num_filters > self.fft_size // 2:
            raise ValueError("num_filters must not exceed fft_size / 2")
        if self.fmax_hz is not None and self.fmax_hz > self.sample_rate_hz / 2:
            raise ValueError("fmax_hz must not exceed the Nyquist frequency")
        if self.fmin_hz >= self.effective_fmax_hz:
            raise ValueError("fmin_hz must be below fmax_hz")
        return self

    @property
    def effective_fmax_hz(self) -> float:
        return self.fmax_hz if self.fmax_hz is not None else self.sample_rate_hz / 2.0


class GdConfig(BaseModel):
    """Group-delay boundary detection."""
    model_config = ConfigDict(extra="forbid")

    wsf: int = Field(8, ge=1)
    threshold_ratio: float = Field(0.1, gt=0, le=1)
    min_separation_ms: float = Field(60.0, gt=0)
    smoothing_points: int = Field(5, ge=1)
    sbsf_bands: List[Tuple[float, float]] = Field(default_factory=lambda: list(DEFAULT_SBSF_BANDS))
    sbsf_weights: Optional[List[float]] = None

    @field_validator("sbsf_bands", mode="before")
    @classmethod
    def parse_bands(cls, value):
        if isinstance(value, str):
            bands = []
            for item in _split_list(value):
                low, sep, high = item.partition("-")
                if not sep:
                    raise ValueError(f"band '{item}' must look like low-high")
                bands.append((float(low), float(high)))
            return bands
        return value

    @field_validator("sbsf_weights", mode="before")
    @classmethod
    def parse_weights(cls, value):
        return _split_list(value)

    @model_validator(mode="after")
    def check_weights(self):
        if self.sbsf_weights is not None and len(self.sbsf_weights) != len(self.sbsf_bands):
            raise ValueError("sbsf_weights needs one weight per band")
        return self


class SegmenterConfig(BaseModel):
    """Hybrid HMM/GD boundary correction."""
    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    snap_window_ms: float = Field(80.0, gt=0)
    accuracy_tolerance_ms: float = Field(20.0, gt=0)


class TextConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    split_policy: Literal["single_onset", "max_onset"] = "single_onset"


class HmmConfig(BaseModel):
    """Acoustic model topology, training schedule and clustering thresholds."""
    model_config = ConfigDict(extra="forbid")

    num_states: int = Field(5, ge=1)
    sentence_iterations: int = Field(2, ge=0)
    iterations: int = Field(8, ge=0)
    min_occupancy: float = Field(50.0, ge=0)
    min_gain: float = Field(50.0, ge=0)
    variance_floor_ratio: float = Field(1e-4, gt=0)
    smoothing: Literal["none", "mlpg"] = "mlpg"
    speaking_rate: float = Field(1.0, gt=0)


# --- Synthesis-side sections ---
class HeqConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    bins: int = Field(64, ge=2)


class VocoderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    griffin_lim_iterations: int = Field(64, ge=0)
    seed: int = 0
    peak_dbfs: float = Field(-1.0, le=0)


# --- Locations and runtime ---
class PathsConfig(BaseModel):
    """Input and output locations. Relative paths resolve against the config file."""
    model_config = ConfigDict(extra="forbid")

    corpus: Optional[Path] = None
    lexicon: Optional[Path] = None
    phone_classes: Optional[Path] = None
    model: Optional[Path] = None
    heq_lut: Optional[Path] = None
    output_dir: Path = Path("out")

    def resolved(self, base: Path) -> "PathsConfig":
        updates = {}
        for name in type(self).model_fields:
            value = getattr(self, name)
            if value is not None and not value.is_absolute():
                updates[name] = (base / value).resolve()
        return self.model_copy(update=updates)


class RuntimeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    workers: int = Field(1, ge=1)
    log_file: Optional[Path] = None


class PipelineConfig(BaseModel):
    """The single structured configuration shared by every subcommand."""
    model_config = ConfigDict(extra="forbid")

    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    gd: GdConfig = Field(default_factory=GdConfig)
    segmenter: SegmenterConfig = Field(default_factory=SegmenterConfig)
    text: TextConfig = Field(default_factory=TextConfig)
    hmm: HmmConfig = Field(default_factory=HmmConfig)
    heq: HeqConfig = Field(default_factory=HeqConfig)
    vocoder: VocoderConfig = Field(default_factory=VocoderConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)

    @model_validator(mode="after")
    def check_bands_below_nyquist(self):
        nyquist = self.analysis.sample_rate_hz / 2.0
        for low, high in self.gd.sbsf_bands:
            if not 0 <= low < high <= nyquist:
                raise ValueError(f"sbsf band ({low}, {high}) must lie within [0, {nyquist}]")
        return self


def load_config(path: Optional[Path] = None, overrides: Iterable[str] = ()) -> PipelineConfig:
    """
    Builds the pipeline configuration.

    Precedence: defaults < config file < MELHTS_* environment < overrides.

    Args:
        path: Optional dotenv-style file with one `section.key=value` per line.
        overrides: `section.key=value` strings, usually from repeated --set flags.

    Returns:
        PipelineConfig: Validated configuration with absolute paths.

    Raises:
        ConfigError: If the file is missing, a key is malformed or a value is invalid.
    """
    # Flat "section.key" -> string map; later sources overwrite earlier ones.
    raw = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        for key, value in dotenv_values(path).items():
            if value is None:
                raise ConfigError(f"config key '{key}' has no value")
            raw[key] = value
        base = path.resolve().parent
        logger.info(f"event=config_loaded path={path} keys={len(raw)}")

    # Environment override for the worker count.
    threads = os.getenv("MELHTS_THREADS")
    if threads:
        raw["runtime.workers"] = threads

    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override '{item}' must look like section.key=value")
        raw[key.strip()] = value.strip()

    # Split into one dict per section for pydantic.
    nested = {}
    for key, value in raw.items():
        section, dot, name = key.partition(".")
        if not dot or not name:
            raise ConfigError(f"config key '{key}' must look like section.key")
        nested.setdefault(section, {})[name] = value

    try:
        config = PipelineConfig.model_validate(nested)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e

    # Relative paths resolve against the config file, or the working directory without one.
    return config.model_copy(update={"paths": config.paths.resolved(base)})
