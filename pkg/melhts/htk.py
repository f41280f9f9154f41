# melhts/htk.py

from pathlib import Path
from typing import List, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from melhts.exceptions import FormatError
from melhts.models import AlignmentResult, Boundary, BoundarySet, BoundarySource, Syllable
from melhts.segmenter import SegmentationParams, frame_edge_ms
from melhts.storage import atomic_write_text, read_text

# HTK times are integers in units of 100 ns.
UNITS_PER_MS = 10_000


class LabelEntry(BaseModel):
    """One `start end label` line of an HTK label file."""
    model_config = ConfigDict(frozen=True)

    start: int = Field(ge=0)
    end: int
    label: str = Field(min_length=1)

    @model_validator(mode="after")
    def check_span(self):
        if self.end < self.start:
            raise ValueError("label end precedes its start")
        return self

    @property
    def start_ms(self) -> float:
        return self.start / UNITS_PER_MS

    @property
    def end_ms(self) -> float:
        return self.end / UNITS_PER_MS


def ms_to_units(time_ms: float) -> int:
    return int(round(time_ms * UNITS_PER_MS))


def write_label_file(path: Path, entries: Sequence[LabelEntry]) -> int:
    text = "".join(f"{e.start} {e.end} {e.label}\n" for e in entries)
    return atomic_write_text(path, text)


def read_label_file(path: Path) -> List[LabelEntry]:
    entries = []
    for number, line in enumerate(read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split(maxsplit=2)
        if len(fields) != 3:
            raise FormatError(f"line {number}: expected 'start end label'", path=str(path))
        try:
            entries.append(LabelEntry(start=int(fields[0]), end=int(fields[1]), label=fields[2].strip()))
        except ValueError as e:
            raise FormatError(f"line {number}: {e}", path=str(path)) from e
    return entries


def alignment_to_entries(alignment: AlignmentResult, params: SegmentationParams) -> List[LabelEntry]:
    """
    Phone-level entries; full-context labels are used when the segments carry them.
    Interior times are frame edges, the same instants the segmenter reports,
    and the first entry starts at 0.
    """
    entries = []
    for segment in alignment.segments:
        label = segment.label.to_htk() if segment.label is not None else segment.phone
        start = frame_edge_ms(segment.start_frame, params) if segment.start_frame > 0 else 0.0
        entries.append(LabelEntry(start=ms_to_units(start),
                                  end=ms_to_units(frame_edge_ms(segment.end_frame, params)),
                                  label=label))
    return entries


def syllable_entries(boundaries: BoundarySet, syllables: Sequence[Syllable]) -> List[LabelEntry]:
    """
    Syllable-level entries: syllable i spans from boundary i-1 (or 0) to
    boundary i (or the end of the utterance).
    """
    if len(boundaries) != len(syllables) - 1:
        raise ValueError("expected one boundary per syllable transition")
    times = [0.0] + [b.time_ms for b in boundaries.boundaries] + [boundaries.utterance_duration_ms]
    return [LabelEntry(start=ms_to_units(a), end=ms_to_units(b), label=syllable.name)
            for a, b, syllable in zip(times, times[1:], syllables)]


def entries_to_boundaries(entries: Sequence[LabelEntry]) -> BoundarySet:
    """Interior boundaries (the start of every entry but the first)."""
    duration = entries[-1].end_ms if entries else 0.0
    boundaries = [Boundary(time_ms=e.start_ms, source=BoundarySource.HMM,
                           left_unit=previous.label, right_unit=e.label)
                  for previous, e in zip(entries, entries[1:])]
    return BoundarySet(boundaries=boundaries, utterance_duration_ms=duration)
