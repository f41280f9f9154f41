# melhts/hmm/training.py

from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import Callable, Dict, Hashable, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from melhts.config import HmmConfig, logger
from melhts.exceptions import AlignmentError, InsufficientDataError, ParameterError
from melhts.hmm.clustering import ContextStats, cluster_states
from melhts.hmm.kernels import emission_log_densities, forward_backward_kernel, viterbi_kernel
from melhts.hmm.model import (
    MIN_TRANSITION,
    AcousticModel,
    DecisionTree,
    HmmSet,
    HmmState,
    ModelMetadata,
    PhoneHmm,
    StateSequence,
    TreeNode,
    build_questions,
)
from melhts.models import AlignmentResult, ArrayRecord, ContextLabel, PhoneSegment

ABSOLUTE_VARIANCE_FLOOR = 1e-6
# Occupancies below this count as "never visited" in the M-step.
MIN_STATE_OCCUPANCY = 1e-10

Unit = Union[str, ContextLabel]


# ---------------------------
# TRAINING DATA
# ---------------------------

class TrainingUtterance(ArrayRecord):
    """Mel + delta features of one utterance with its transcript phones."""
    utterance_id: str
    features: np.ndarray
    phones: List[str] = Field(min_length=1)
    labels: Optional[List[ContextLabel]] = None

    @field_validator("features", mode="before")
    @classmethod
    def to_array(cls, value):
        return np.asarray(value, dtype=np.float64)

    @model_validator(mode="after")
    def check_labels(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError("features must be a non-empty T x D matrix")
        if self.labels is not None and [label.c for label in self.labels] != self.phones:
            raise ValueError("labels must follow the phone sequence")
        return self

    @property
    def num_frames(self) -> int:
        return int(self.features.shape[0])


class Chunk(BaseModel):
    """Frames [start_frame, end_frame) aligned against phones [first_phone, last_phone)."""
    model_config = ConfigDict(frozen=True)

    start_frame: int = Field(ge=0)
    end_frame: int
    first_phone: int = Field(ge=0)
    last_phone: int

    @model_validator(mode="after")
    def check_span(self):
        if self.end_frame < self.start_frame or self.last_phone <= self.first_phone:
            raise ValueError("a chunk spans at least one phone and no negative frame range")
        return self

    @property
    def num_frames(self) -> int:
        return self.end_frame - self.start_frame

    @property
    def num_phones(self) -> int:
        return self.last_phone - self.first_phone


def whole_utterance_chunks(utterance: TrainingUtterance) -> List[Chunk]:
    return [Chunk(start_frame=0, end_frame=utterance.num_frames, first_phone=0, last_phone=len(utterance.phones))]


def chunks_from_boundaries(phone_ranges: Sequence[Tuple[int, int]], boundary_frames: Sequence[int],
                           num_frames: int) -> List[Chunk]:
    """One chunk per syllable; syllable i starts at boundary_frames[i-1]."""
    if len(boundary_frames) != len(phone_ranges) - 1:
        raise ParameterError("boundary_frames", "expected one boundary per syllable transition")
    edges = [0] + [int(np.clip(f, 0, num_frames)) for f in boundary_frames] + [num_frames]
    edges = [int(e) for e in np.maximum.accumulate(edges)]
    return [Chunk(start_frame=a, end_frame=b, first_phone=p0, last_phone=p1)
            for (p0, p1), a, b in zip(phone_ranges, edges, edges[1:])]


def merge_short_chunks(chunks: Sequence[Chunk], num_states: int) -> List[Chunk]:
    """
    Merges every chunk with fewer frames than its shortest left-to-right
    path (num_states per phone) into its right neighbour, or its left
    neighbour when it is the last one.
    """
    merged = list(chunks)
    index = 0
    while index < len(merged) and len(merged) > 1:
        chunk = merged[index]
        if chunk.num_frames >= num_states * chunk.num_phones:
            index += 1
            continue
        if index + 1 < len(merged):
            other = merged.pop(index + 1)
            merged[index] = Chunk(start_frame=chunk.start_frame, end_frame=other.end_frame,
                                  first_phone=chunk.first_phone, last_phone=other.last_phone)
        else:
            other = merged.pop(index - 1)
            index -= 1
            merged[index] = Chunk(start_frame=other.start_frame, end_frame=chunk.end_frame,
                                  first_phone=other.first_phone, last_phone=chunk.last_phone)
    return merged


def units_of(utterance: TrainingUtterance, labels: bool = False) -> List[Unit]:
    if labels:
        if utterance.labels is None:
            raise ParameterError("labels", f"utterance {utterance.utterance_id} carries no context labels")
        return list(utterance.labels)
    return list(utterance.phones)


# ---------------------------
# FLAT START
# ---------------------------

def flat_start_segmentation(num_frames: int, num_phones: int, num_states: int) -> np.ndarray:
    """
    Exclusive end frame of every state when phones share the utterance
    equally and states share each phone equally: phone p starts at p*T//P.
    """
    phone_edges = (np.arange(num_phones + 1) * num_frames) // num_phones
    ends = []
    for start, end in zip(phone_edges[:-1], phone_edges[1:]):
        length = end - start
        ends.extend(start + (np.arange(1, num_states + 1) * length) // num_states)
    return np.array(ends, dtype=np.int64)


def variance_floor_for(features: Sequence[np.ndarray], ratio: float) -> np.ndarray:
    stacked = np.concatenate(features, axis=0)
    return np.maximum(ratio * np.var(stacked, axis=0), ABSOLUTE_VARIANCE_FLOOR)


def flat_start_init(corpus: Sequence[TrainingUtterance], num_states: int = 5,
                    variance_floor_ratio: float = 1e-4) -> HmmSet:
    """
    Moment estimates of every state from an equal-duration segmentation;
    transitions start uniform (self-loop 0.5).

    Raises:
        InsufficientDataError: If every utterance is too short to hold S frames per phone.
    """
    usable = []
    for utterance in corpus:
        if utterance.num_frames < num_states * len(utterance.phones):
            logger.warning(f"event=flat_start_skip id={utterance.utterance_id} frames={utterance.num_frames} "
                           f"phones={len(utterance.phones)} states={num_states}")
            continue
        usable.append(utterance)
    if not usable:
        raise InsufficientDataError("no utterance is long enough for a flat start",
                                    {p for u in corpus for p in u.phones})

    dim = usable[0].features.shape[1]
    floor = variance_floor_for([u.features for u in usable], variance_floor_ratio)
    count: Dict[str, np.ndarray] = {}
    first: Dict[str, np.ndarray] = {}
    second: Dict[str, np.ndarray] = {}
    for utterance in usable:
        ends = flat_start_segmentation(utterance.num_frames, len(utterance.phones), num_states)
        starts = np.concatenate(([0], ends[:-1]))
        for index, (start, end) in enumerate(zip(starts, ends)):
            phone = utterance.phones[index // num_states]
            state = index % num_states
            frames = utterance.features[start:end]
            if phone not in count:
                count[phone] = np.zeros(num_states)
                first[phone] = np.zeros((num_states, dim))
                second[phone] = np.zeros((num_states, dim))
            count[phone][state] += frames.shape[0]
            first[phone][state] += frames.sum(axis=0)
            second[phone][state] += (frames * frames).sum(axis=0)

    phones = {}
    for phone in sorted(count):
        n = count[phone]
        mean = first[phone] / n[:, None]
        var = np.maximum(second[phone] / n[:, None] - mean * mean, floor)
        states = [HmmState(mean=mean[s], var=var[s], occupancy=n[s]) for s in range(num_states)]
        phones[phone] = PhoneHmm(phone=phone, states=states, self_loop=np.full(num_states, 0.5),
                                 dur_mean=np.full(num_states, 2.0), dur_var=np.full(num_states, 2.0))
    logger.info(f"event=flat_start utterances={len(usable)} phones={len(phones)} states={num_states}")
    return HmmSet(phones=phones, num_states=num_states, variance_floor=floor)


# ---------------------------
# VITERBI ALIGNMENT
# ---------------------------

def _segments_from_path(path: np.ndarray, seq: StateSequence, units: Sequence[Unit],
                        frame_offset: int = 0) -> List[PhoneSegment]:
    num_states = len(seq.log_self) // len(units)
    starts = np.searchsorted(path, np.arange(len(seq.log_self)), side="left")
    ends = np.append(starts[1:], path.size)
    segments = []
    for u, unit in enumerate(units):
        block = slice(u * num_states, (u + 1) * num_states)
        label = unit if isinstance(unit, ContextLabel) else None
        segments.append(PhoneSegment(
            unit=unit.to_htk() if label is not None else unit,
            phone=seq.phones[u],
            start_frame=int(starts[block][0]) + frame_offset,
            end_frame=int(ends[block][-1]) + frame_offset,
            state_ends=[int(e) + frame_offset for e in ends[block]],
            label=label,
        ))
    return segments


def _align(model, features: np.ndarray, units: Sequence[Unit]):
    seq = model.state_sequence(units)
    if features.shape[0] < len(seq.log_self):
        raise AlignmentError(f"{features.shape[0]} frames cannot pass through {len(seq.log_self)} states")
    log_b = emission_log_densities(features, seq.means, seq.variances)
    path, score = viterbi_kernel(log_b, seq.log_self, seq.log_next)
    if not np.isfinite(score):
        raise AlignmentError("no left-to-right path reaches the final state")
    acoustic = float(np.sum(log_b[np.arange(path.size), path]))
    return seq, path, float(score), acoustic


def viterbi_align(model, features: np.ndarray, units: Sequence[Unit]) -> AlignmentResult:
    """
    Maximum-likelihood left-to-right state path of `features` through the
    concatenated models of `units` (phone ids for an HmmSet, context labels
    for an AcousticModel).

    Raises:
        AlignmentError: If there are fewer frames than states.
        InsufficientDataError: If a unit has no model.
    """
    features = np.asarray(features, dtype=np.float64)
    units = list(units)
    seq, path, score, acoustic = _align(model, features, units)
    return AlignmentResult(segments=_segments_from_path(path, seq, units), log_likelihood=score,
                           acoustic_log_likelihood=acoustic, num_frames=features.shape[0])


def align_chunks(model, utterance: TrainingUtterance, chunks: Optional[Sequence[Chunk]] = None,
                 use_labels: bool = False) -> AlignmentResult:
    """Viterbi alignment constrained to chunk boundaries, concatenated."""
    units = units_of(utterance, use_labels)
    chunks = chunks or whole_utterance_chunks(utterance)
    segments, score, acoustic = [], 0.0, 0.0
    for chunk in chunks:
        chunk_units = units[chunk.first_phone:chunk.last_phone]
        features = utterance.features[chunk.start_frame:chunk.end_frame]
        seq, path, chunk_score, chunk_acoustic = _align(model, features, chunk_units)
        segments.extend(_segments_from_path(path, seq, chunk_units, frame_offset=chunk.start_frame))
        score += chunk_score
        acoustic += chunk_acoustic
    return AlignmentResult(segments=segments, log_likelihood=score, acoustic_log_likelihood=acoustic,
                           num_frames=utterance.num_frames)


# ---------------------------
# EMBEDDED RE-ESTIMATION
# ---------------------------

class StateAccumulator:
    """Per-phone sufficient statistics; merged by addition."""

    def __init__(self, num_states: int, dim: int):
        self.num_states = num_states
        self.dim = dim
        self.occupancy: Dict[str, np.ndarray] = {}
        self.first: Dict[str, np.ndarray] = {}
        self.second: Dict[str, np.ndarray] = {}
        self.stay: Dict[str, np.ndarray] = {}

    def _slot(self, phone: str) -> None:
        if phone not in self.occupancy:
            self.occupancy[phone] = np.zeros(self.num_states)
            self.first[phone] = np.zeros((self.num_states, self.dim))
            self.second[phone] = np.zeros((self.num_states, self.dim))
            self.stay[phone] = np.zeros(self.num_states)

    def add(self, seq: StateSequence, gamma: np.ndarray, stay: np.ndarray,
            features: np.ndarray, squares: np.ndarray) -> None:
        count = self.num_states
        for u, phone in enumerate(seq.phones):
            block = slice(u * count, (u + 1) * count)
            weights = gamma[:, block]
            self._slot(phone)
            self.occupancy[phone] += weights.sum(axis=0)
            self.first[phone] += weights.T @ features
            self.second[phone] += weights.T @ squares
            self.stay[phone] += stay[block]

    def merge(self, other: "StateAccumulator") -> None:
        for phone in other.occupancy:
            self._slot(phone)
            self.occupancy[phone] += other.occupancy[phone]
            self.first[phone] += other.first[phone]
            self.second[phone] += other.second[phone]
            self.stay[phone] += other.stay[phone]


def _accumulate_utterance(hmm_set: HmmSet, job) -> Tuple[StateAccumulator, float, int]:
    utterance, chunks = job
    accumulator = StateAccumulator(hmm_set.num_states, hmm_set.feature_dim)
    total, skipped = 0.0, 0
    for chunk in chunks or whole_utterance_chunks(utterance):
        features = utterance.features[chunk.start_frame:chunk.end_frame]
        seq = hmm_set.state_sequence(utterance.phones[chunk.first_phone:chunk.last_phone])
        if features.shape[0] < len(seq.log_self):
            skipped += 1
            continue
        log_b = emission_log_densities(features, seq.means, seq.variances)
        gamma, stay, loglik = forward_backward_kernel(log_b, seq.log_self, seq.log_next)
        if not np.isfinite(loglik):
            skipped += 1
            continue
        accumulator.add(seq, gamma, stay, features, features * features)
        total += loglik
    return accumulator, total, skipped


def _maximize(hmm_set: HmmSet, accumulator: StateAccumulator) -> HmmSet:
    floor = hmm_set.variance_floor
    phones = {}
    for phone, hmm in hmm_set.phones.items():
        if phone not in accumulator.occupancy:
            phones[phone] = hmm
            continue
        occupancy = accumulator.occupancy[phone]
        states = list(hmm.states)
        self_loop = hmm.self_loop.copy()
        for s in range(hmm_set.num_states):
            n = occupancy[s]
            if n < MIN_STATE_OCCUPANCY:
                continue
            mean = accumulator.first[phone][s] / n
            var = np.maximum(accumulator.second[phone][s] / n - mean * mean, floor)
            states[s] = HmmState(mean=mean, var=var, occupancy=n)
            self_loop[s] = np.clip(accumulator.stay[phone][s] / n, MIN_TRANSITION, 1.0 - MIN_TRANSITION)
        forward = 1.0 - self_loop
        phones[phone] = PhoneHmm(phone=phone, states=states, self_loop=self_loop,
                                 dur_mean=1.0 / forward,
                                 dur_var=np.maximum(self_loop / (forward * forward), 1.0))
    return hmm_set.model_copy(update={"phones": phones})


def embedded_reestimate(hmm_set: HmmSet, corpus: Sequence[TrainingUtterance],
                        chunks: Optional[Sequence[Optional[Sequence[Chunk]]]] = None,
                        iterations: int = 1, workers: int = 1,
                        history: Optional[List[float]] = None) -> HmmSet:
    """
    Baum-Welch over every chunk (whole utterances when `chunks` is None),
    with statistics pooled across the corpus before each M-step.

    The total log-likelihood of each E-step is appended to `history`; it
    never decreases from one iteration to the next.
    """
    if iterations < 0:
        raise ParameterError("iterations", f"{iterations} is negative")
    if chunks is not None and len(chunks) != len(corpus):
        raise ParameterError("chunks", "one chunk list per utterance is required")
    jobs = list(zip(corpus, chunks if chunks is not None else [None] * len(corpus)))
    for iteration in range(iterations):
        accumulator = StateAccumulator(hmm_set.num_states, hmm_set.feature_dim)
        total, skipped = 0.0, 0
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            # map keeps job order, so the merge order is fixed
            for part, loglik, part_skipped in pool.map(partial(_accumulate_utterance, hmm_set), jobs):
                accumulator.merge(part)
                total += loglik
                skipped += part_skipped
        if not accumulator.occupancy:
            raise InsufficientDataError("no chunk has a feasible alignment",
                                        {p for u in corpus for p in u.phones})
        hmm_set = _maximize(hmm_set, accumulator)
        if history is not None:
            history.append(total)
        logger.info(f"event=train_iteration iteration={iteration + 1} loglik={total:.6f} skipped_chunks={skipped}")
    return hmm_set


# ---------------------------
# DURATIONS
# ---------------------------

class DurationModel(NamedTuple):
    mean: float
    var: float
    count: int


def estimate_durations(alignments: Iterable[AlignmentResult],
                       key_fn: Optional[Callable[[PhoneSegment, int], Hashable]] = None,
                       variance_floor: float = 1.0) -> Dict[Hashable, DurationModel]:
    """
    Gaussian over the number of frames each state occupies. States are
    keyed by (phone, state index) unless `key_fn` maps them elsewhere.
    """
    if key_fn is None:
        key_fn = lambda segment, state: (segment.phone, state)  # noqa: E731
    samples: Dict[Hashable, List[int]] = {}
    for alignment in alignments:
        for segment in alignment.segments:
            for state, frames in enumerate(segment.state_durations):
                samples.setdefault(key_fn(segment, state), []).append(frames)
    models = {}
    for key, values in samples.items():
        values = np.asarray(values, dtype=np.float64)
        models[key] = DurationModel(mean=float(values.mean()),
                                    var=float(max(values.var(), variance_floor)),
                                    count=int(values.size))
    return models


# ---------------------------
# FULL TRAINING RECIPE
# ---------------------------

class TrainingSchedule(BaseModel):
    num_states: int = Field(5, ge=1)
    sentence_iterations: int = Field(2, ge=0)
    iterations: int = Field(8, ge=0)
    min_occupancy: float = Field(50.0, ge=0)
    min_gain: float = Field(50.0, ge=0)
    variance_floor_ratio: float = Field(1e-4, gt=0)
    workers: int = Field(1, ge=1)

    @classmethod
    def from_config(cls, hmm: HmmConfig, workers: int = 1) -> "TrainingSchedule":
        return cls(num_states=hmm.num_states, sentence_iterations=hmm.sentence_iterations,
                   iterations=hmm.iterations, min_occupancy=hmm.min_occupancy, min_gain=hmm.min_gain,
                   variance_floor_ratio=hmm.variance_floor_ratio, workers=workers)


class TrainingLogEntry(BaseModel):
    stage: str
    iteration: int
    log_likelihood: float


Chunker = Callable[[TrainingUtterance, AlignmentResult], List[Chunk]]


def _context_statistics(alignments: Sequence[AlignmentResult], corpus: Sequence[TrainingUtterance]
                        ) -> Dict[Tuple[str, int], List[ContextStats]]:
    grouped: Dict[Tuple[str, int], Dict[str, list]] = {}
    for alignment, utterance in zip(alignments, corpus):
        for segment in alignment.segments:
            starts = [segment.start_frame] + segment.state_ends[:-1]
            key_label = segment.label.to_htk()
            for state, (start, end) in enumerate(zip(starts, segment.state_ends)):
                frames = utterance.features[start:end]
                slot = grouped.setdefault((segment.phone, state), {})
                if key_label not in slot:
                    slot[key_label] = [segment.label, 0.0, np.zeros(frames.shape[1]), np.zeros(frames.shape[1])]
                entry = slot[key_label]
                entry[1] += frames.shape[0]
                entry[2] += frames.sum(axis=0)
                entry[3] += (frames * frames).sum(axis=0)
    return {key: [ContextStats(label=v[0], occupancy=v[1], first=v[2], second=v[3]) for v in slot.values()]
            for key, slot in grouped.items()}


def train_acoustic_model(corpus: Sequence[TrainingUtterance], meta: ModelMetadata,
                         schedule: TrainingSchedule, chunker: Optional[Chunker] = None,
                         log: Optional[List[TrainingLogEntry]] = None) -> AcousticModel:
    """
    Flat start, utterance-level then syllable-level embedded re-estimation,
    chunk-constrained alignment, per-(phone, state) tree clustering and
    leaf duration estimation.

    Raises:
        InsufficientDataError: Naming the transcript phones that end up without data.
    """
    if any(u.labels is None for u in corpus):
        raise ParameterError("corpus", "every training utterance needs context labels")
    count = schedule.num_states
    usable = [u for u in corpus if u.num_frames >= count * len(u.phones)]
    hmm_set = flat_start_init(corpus, count, schedule.variance_floor_ratio)
    missing = {p for u in corpus for p in u.phones} - set(hmm_set.phones)
    if missing:
        raise InsufficientDataError(f"no usable training data for phones: {' '.join(sorted(missing))}", missing)

    sentence_history: List[float] = []
    hmm_set = embedded_reestimate(hmm_set, usable, None, schedule.sentence_iterations,
                                  schedule.workers, sentence_history)

    chunks: Optional[List[List[Chunk]]] = None
    if chunker is not None:
        chunks = []
        for utterance in usable:
            alignment = align_chunks(hmm_set, utterance)
            chunks.append(merge_short_chunks(chunker(utterance, alignment), count))
        logger.info(f"event=syllable_chunks chunks={sum(len(c) for c in chunks)}")

    syllable_history: List[float] = []
    hmm_set = embedded_reestimate(hmm_set, usable, chunks, schedule.iterations, schedule.workers, syllable_history)

    if log is not None:
        log.extend(TrainingLogEntry(stage="sentence", iteration=i + 1, log_likelihood=v)
                   for i, v in enumerate(sentence_history))
        log.extend(TrainingLogEntry(stage="syllable", iteration=i + 1, log_likelihood=v)
                   for i, v in enumerate(syllable_history))

    # monophone alignment carrying full-context labels for clustering
    alignments = []
    for index, utterance in enumerate(usable):
        monophone = align_chunks(hmm_set, utterance, chunks[index] if chunks else None)
        labelled = [segment.model_copy(update={"label": label, "unit": label.to_htk()})
                    for segment, label in zip(monophone.segments, utterance.labels)]
        alignments.append(monophone.model_copy(update={"segments": labelled}))

    return _cluster_model(hmm_set, alignments, usable, meta, schedule)


def _cluster_model(hmm_set: HmmSet, alignments: Sequence[AlignmentResult], corpus: Sequence[TrainingUtterance],
                   meta: ModelMetadata, schedule: TrainingSchedule) -> AcousticModel:
    questions = build_questions(meta.phone_set)
    question_map = {q.name: q for q in questions}
    stats = _context_statistics(alignments, corpus)
    phones = sorted(hmm_set.phones)

    trees: List[DecisionTree] = []
    means, variances, occupancy = [], [], []
    for phone in phones:
        for state in range(hmm_set.num_states):
            offset = len(means)
            state_stats = stats.get((phone, state))
            if state_stats:
                tree, leaves = cluster_states(state_stats, questions, schedule.min_occupancy, schedule.min_gain,
                                              hmm_set.variance_floor, phone=phone, state_index=state)
                for leaf in leaves:
                    means.append(leaf.mean)
                    variances.append(leaf.var)
                    occupancy.append(leaf.occupancy)
                tree = tree.model_copy(update={"nodes": [
                    node if node.leaf is None else TreeNode(leaf=node.leaf + offset) for node in tree.nodes]})
            else:
                monophone = hmm_set.phones[phone].states[state]
                means.append(monophone.mean)
                variances.append(monophone.var)
                occupancy.append(monophone.occupancy)
                tree = DecisionTree(phone=phone, state_index=state, nodes=[TreeNode(leaf=offset)])
            trees.append(tree)

    tree_map = {(t.phone, t.state_index): t for t in trees}

    def leaf_of(segment: PhoneSegment, state: int) -> int:
        return tree_map[(segment.phone, state)].route(segment.label, question_map)

    durations = estimate_durations(alignments, key_fn=leaf_of)
    dur_mean = np.empty(len(means))
    dur_var = np.empty(len(means))
    for leaf in range(len(means)):
        model = durations.get(leaf)
        if model is None:
            # leaves without aligned occurrences fall back to the geometric mean duration
            tree = next(t for t in trees if leaf in t.leaves)
            a = hmm_set.phones[tree.phone].self_loop[tree.state_index]
            model = DurationModel(mean=1.0 / (1.0 - a), var=1.0, count=0)
        dur_mean[leaf] = model.mean
        dur_var[leaf] = model.var

    model = AcousticModel(
        meta=meta, questions=questions, trees=trees, phones=phones,
        self_loop=np.array([hmm_set.phones[p].self_loop for p in phones]),
        means=np.array(means), variances=np.array(variances), occupancy=np.array(occupancy),
        dur_mean=dur_mean, dur_var=dur_var,
    )
    logger.info(f"event=clustering_done phones={len(phones)} trees={len(trees)} tied_states={model.num_leaves}")
    return model
