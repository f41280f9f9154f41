# melhts/segmenter.py

from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from melhts.analysis import (
    MIN_GD_LENGTH,
    min_phase_group_delay,
    pick_peaks,
    short_term_energy,
    smooth_contour,
    stft_magnitude,
    sub_band_spectral_flux,
)
from melhts.config import PipelineConfig, logger
from melhts.exceptions import InternalError, ParameterError
from melhts.models import (
    AlignmentResult,
    AudioBuffer,
    Boundary,
    BoundarySet,
    BoundarySource,
    CorrectionMethod,
    CorrectionRule,
    FrameSpec,
    PhoneClass,
    Syllable,
)
from melhts.storage import write_csv
from melhts.textproc import syllable_phone_ranges

_STE_LEFT_BLOCKERS = {PhoneClass.FRICATIVE, PhoneClass.NASAL}
_STE_RIGHT_BLOCKERS = {PhoneClass.FRICATIVE, PhoneClass.AFFRICATE, PhoneClass.NASAL, PhoneClass.SEMIVOWEL}
_SBSF_CLASSES = {PhoneClass.FRICATIVE, PhoneClass.AFFRICATE}


# ---------------------------
# RULE TABLE
# ---------------------------

def rule_for_pair(left_class: PhoneClass, right_class: PhoneClass) -> CorrectionMethod:
    """
    STE when the left phone is not a fricative or nasal and the right phone
    is not a fricative, affricate, nasal or semivowel; otherwise SBSF when
    exactly one side is a fricative or affricate; otherwise KEEP.
    """
    left_class, right_class = PhoneClass(left_class), PhoneClass(right_class)
    if left_class not in _STE_LEFT_BLOCKERS and right_class not in _STE_RIGHT_BLOCKERS:
        return CorrectionMethod.STE
    if (left_class in _SBSF_CLASSES) != (right_class in _SBSF_CLASSES):
        return CorrectionMethod.SBSF
    return CorrectionMethod.KEEP


def correction_rules() -> List[CorrectionRule]:
    """The full table over every (left, right) class pair."""
    return [CorrectionRule(left_class=left, right_class=right, method=rule_for_pair(left, right))
            for left in PhoneClass for right in PhoneClass]


# ---------------------------
# PARAMETERS
# ---------------------------

class SegmentationParams(BaseModel):
    """Frame geometry and GD settings used to find and snap boundaries."""
    model_config = ConfigDict(frozen=True)

    frame_spec: FrameSpec
    ste_frame_spec: FrameSpec
    wsf: int = Field(8, ge=1)
    threshold_ratio: float = Field(0.1, gt=0, le=1)
    min_separation_ms: float = Field(60.0, gt=0)
    smoothing_points: int = Field(5, ge=1)
    sbsf_bands: List[Tuple[float, float]] = [(2000.0, 4000.0), (4000.0, 8000.0)]
    sbsf_weights: Optional[List[float]] = None
    snap_window_ms: float = Field(80.0, gt=0)

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "SegmentationParams":
        analysis = config.analysis
        frame_spec = FrameSpec(frame_length_ms=analysis.frame_length_ms, frame_shift_ms=analysis.frame_shift_ms,
                               window=analysis.window, fft_size=analysis.fft_size)
        ste_frame_spec = frame_spec.model_copy(update={"frame_length_ms": analysis.ste_frame_length_ms})
        return cls(frame_spec=frame_spec, ste_frame_spec=ste_frame_spec, wsf=config.gd.wsf,
                   threshold_ratio=config.gd.threshold_ratio, min_separation_ms=config.gd.min_separation_ms,
                   smoothing_points=config.gd.smoothing_points, sbsf_bands=config.gd.sbsf_bands,
                   sbsf_weights=config.gd.sbsf_weights, snap_window_ms=config.segmenter.snap_window_ms)

    @property
    def frame_shift_ms(self) -> float:
        return self.frame_spec.frame_shift_ms

    @property
    def edge_offset_ms(self) -> float:
        """Time of the edge between frames t-1 and t, relative to t * shift."""
        return (self.frame_spec.frame_length_ms - self.frame_spec.frame_shift_ms) / 2.0


def frame_edge_ms(frame: int, params: SegmentationParams) -> float:
    return frame * params.frame_shift_ms + params.edge_offset_ms


def ms_to_frame_edge(time_ms: float, params: SegmentationParams, num_frames: int) -> int:
    frame = int(np.floor((time_ms - params.edge_offset_ms) / params.frame_shift_ms + 0.5))
    return int(np.clip(frame, 0, num_frames))


# ---------------------------
# CANDIDATES AND SNAPPING
# ---------------------------

def candidate_boundaries(audio: AudioBuffer, method: CorrectionMethod, params: SegmentationParams) -> BoundarySet:
    """
    GD peaks of the smoothed reciprocal STE contour (method STE) or of the
    smoothed SBSF contour (method SBSF), tagged with the method.
    Times are absolute: frame centres for STE, frame edges for SBSF.
    """
    duration_ms = audio.duration_ms
    if method is CorrectionMethod.KEEP:
        return BoundarySet(boundaries=[], utterance_duration_ms=duration_ms)

    if method is CorrectionMethod.STE:
        contour = short_term_energy(audio, params.ste_frame_spec)
        offset_ms = params.ste_frame_spec.frame_length_ms / 2.0
        invert = True
        source = BoundarySource.STE
    else:
        magnitude = stft_magnitude(audio, params.frame_spec)
        if magnitude.shape[0] < 2:
            return BoundarySet(boundaries=[], utterance_duration_ms=duration_ms)
        contour = sub_band_spectral_flux(magnitude, params.sbsf_bands, params.frame_spec,
                                         audio.sample_rate_hz, params.sbsf_weights)
        offset_ms = params.edge_offset_ms
        invert = False
        source = BoundarySource.SBSF

    if contour.values.size < MIN_GD_LENGTH:
        return BoundarySet(boundaries=[], utterance_duration_ms=duration_ms)
    contour = smooth_contour(contour, params.smoothing_points)
    gd = min_phase_group_delay(contour, params.wsf, invert=invert)
    peaks = pick_peaks(gd, params.min_separation_ms, params.threshold_ratio,
                       offset_ms=offset_ms, duration_ms=duration_ms)
    tagged = [b.model_copy(update={"source": source}) for b in peaks.boundaries]
    return peaks.model_copy(update={"boundaries": tagged})


def snap_boundary(hmm_time_ms: float, candidates: Union[BoundarySet, Sequence[float]], window_ms: float) -> float:
    """
    Nearest candidate within +-window_ms of `hmm_time_ms`, or `hmm_time_ms`
    itself when none is that close. Equidistant candidates resolve to the earlier one.
    """
    if window_ms <= 0:
        raise ParameterError("window_ms", f"{window_ms} must be positive")
    times = candidates.times_ms if isinstance(candidates, BoundarySet) else np.asarray(candidates, dtype=float)
    if times.size == 0:
        return hmm_time_ms
    times = np.sort(times)
    distances = np.abs(times - hmm_time_ms)
    best = int(np.argmin(distances))  # first minimum, so the earlier candidate on ties
    if distances[best] <= window_ms:
        return float(times[best])
    return hmm_time_ms


def _boundary_classes(left: Syllable, right: Syllable) -> Tuple[PhoneClass, PhoneClass]:
    return left.phones[-1].phone_class, right.phones[0].phone_class


def hybrid_segment(audio: AudioBuffer, syllables: Sequence[Syllable], hmm_bounds: BoundarySet,
                   params: SegmentationParams) -> BoundarySet:
    """
    Corrects every HMM syllable boundary with GD evidence chosen by the rule
    table. The boundary count never changes; a snap that breaks the
    ordering is reverted and the boundary keeps its HMM time and tag.

    Raises:
        ParameterError: If the boundary count does not match the syllable transitions.
    """
    if len(hmm_bounds) != max(0, len(syllables) - 1):
        raise ParameterError("hmm_bounds", f"{len(hmm_bounds)} boundaries for {len(syllables)} syllables")

    candidates: Dict[CorrectionMethod, BoundarySet] = {}
    hmm_times = [b.time_ms for b in hmm_bounds.boundaries]
    times, sources = [], []
    for index, boundary in enumerate(hmm_bounds.boundaries):
        method = rule_for_pair(*_boundary_classes(syllables[index], syllables[index + 1]))
        if method is CorrectionMethod.KEEP:
            times.append(boundary.time_ms)
            sources.append(BoundarySource.HMM)
            continue
        if method not in candidates:
            candidates[method] = candidate_boundaries(audio, method, params)
        snapped = snap_boundary(boundary.time_ms, candidates[method], params.snap_window_ms)
        times.append(snapped)
        if snapped == boundary.time_ms and boundary.time_ms not in candidates[method].times_ms:
            sources.append(BoundarySource.HMM)
        else:
            sources.append(BoundarySource(method.value))

    _repair_order(times, sources, hmm_times, params.frame_shift_ms)

    boundaries = [Boundary(time_ms=t, source=s, left_unit=syllables[i].name, right_unit=syllables[i + 1].name)
                  for i, (t, s) in enumerate(zip(times, sources))]
    duration_ms = max(hmm_bounds.utterance_duration_ms, audio.duration_ms)
    result = BoundarySet(boundaries=boundaries, utterance_duration_ms=duration_ms,
                         frame_shift_ms=params.frame_shift_ms)
    moved = sum(s is not BoundarySource.HMM for s in sources)
    logger.debug(f"event=hybrid_segment boundaries={len(boundaries)} corrected={moved}")
    return result


def _repair_order(times: List[float], sources: List[BoundarySource], hmm_times: List[float],
                  frame_shift_ms: float) -> None:
    tolerance = 1e-9
    changed = True
    while changed:
        changed = False
        for i in range(1, len(times)):
            if times[i] - times[i - 1] >= frame_shift_ms - tolerance:
                continue
            if sources[i] is not BoundarySource.HMM:
                victim = i
            elif sources[i - 1] is not BoundarySource.HMM:
                victim = i - 1
            else:
                raise InternalError("HMM boundaries are closer than one frame shift")
            times[victim] = hmm_times[victim]
            sources[victim] = BoundarySource.HMM
            changed = True
            break


# ---------------------------
# ALIGNMENT BRIDGES AND SCORING
# ---------------------------

def boundaries_from_alignment(alignment: AlignmentResult, syllables: Sequence[Syllable],
                              params: SegmentationParams) -> BoundarySet:
    """HMM syllable boundaries: the first frame edge of every syllable but the first."""
    ranges = syllable_phone_ranges(syllables)
    if ranges and ranges[-1][1] != len(alignment.segments):
        raise ParameterError("syllables", "syllables do not cover the aligned phones")
    boundaries = []
    for (start, _), left, right in zip(ranges[1:], syllables, syllables[1:]):
        frame = alignment.segments[start].start_frame
        boundaries.append(Boundary(time_ms=frame_edge_ms(frame, params), source=BoundarySource.HMM,
                                   left_unit=left.name, right_unit=right.name))
    duration = frame_edge_ms(alignment.num_frames, params)
    return BoundarySet(boundaries=boundaries, utterance_duration_ms=duration, frame_shift_ms=params.frame_shift_ms)


def boundary_accuracy(reference: BoundarySet, hypothesis: BoundarySet, tolerance_ms: float = 20.0) -> float:
    """Percentage of reference boundaries with a hypothesis boundary within `tolerance_ms`."""
    ref = reference.times_ms
    if ref.size == 0:
        return 100.0
    hyp = hypothesis.times_ms
    if hyp.size == 0:
        return 0.0
    nearest = np.min(np.abs(ref[:, None] - hyp[None, :]), axis=1)
    return float(100.0 * np.mean(nearest <= tolerance_ms + 1e-9))


def diagnostics_rows(hmm_bounds: BoundarySet, corrected: BoundarySet) -> List[tuple]:
    rows = []
    for index, (before, after) in enumerate(zip(hmm_bounds.boundaries, corrected.boundaries)):
        rows.append((index, f"{before.time_ms:.3f}", f"{after.time_ms:.3f}",
                     f"{after.time_ms - before.time_ms:.3f}", after.source.value,
                     after.left_unit, after.right_unit))
    return rows


def write_diagnostics(path, hmm_bounds: BoundarySet, corrected: BoundarySet) -> int:
    header = ("index", "hmm_ms", "time_ms", "shift_ms", "source", "left", "right")
    return write_csv(path, header, diagnostics_rows(hmm_bounds, corrected))
