import numpy as np
import pytest

from melhts.config import PipelineConfig
from melhts.exceptions import ParameterError
from melhts.models import (
    AlignmentResult,
    Boundary,
    BoundarySet,
    BoundarySource,
    CorrectionMethod,
    Phone,
    PhoneClass,
    PhoneSegment,
    Syllable,
)
from melhts.segmenter import (
    SegmentationParams,
    boundaries_from_alignment,
    boundary_accuracy,
    candidate_boundaries,
    correction_rules,
    frame_edge_ms,
    hybrid_segment,
    ms_to_frame_edge,
    rule_for_pair,
    snap_boundary,
)
from melhts.synthetic import synth_syllable_utterance

SR = 16000


def params(**updates) -> SegmentationParams:
    config = PipelineConfig.model_validate({"analysis": {"sample_rate_hz": SR, "fft_size": 512}})
    return SegmentationParams.from_config(config).model_copy(update=updates)


def syllable(*phones) -> Syllable:
    return Syllable.from_phones([Phone(id=p, phone_class=c) for p, c in phones])


def hmm_set(times, duration_ms):
    return BoundarySet(boundaries=[Boundary(time_ms=t, source=BoundarySource.HMM) for t in times],
                       utterance_duration_ms=duration_ms, frame_shift_ms=10.0)


class TestRuleTable:
    def test_covers_every_pair(self):
        rules = correction_rules()
        assert len(rules) == len(PhoneClass) ** 2
        assert len({(r.left_class, r.right_class) for r in rules}) == len(rules)

    def test_every_pair_against_class_sets(self):
        fricative_like = {PhoneClass.FRICATIVE, PhoneClass.AFFRICATE}
        for rule in correction_rules():
            left, right = rule.left_class, rule.right_class
            ste = (left not in {PhoneClass.FRICATIVE, PhoneClass.NASAL}
                   and right not in fricative_like | {PhoneClass.NASAL, PhoneClass.SEMIVOWEL})
            if ste:
                expected = CorrectionMethod.STE
            elif (left in fricative_like) != (right in fricative_like):
                expected = CorrectionMethod.SBSF
            else:
                expected = CorrectionMethod.KEEP
            assert rule.method is expected, (left, right)

    @pytest.mark.parametrize("left, right, method", [
        (PhoneClass.VOWEL, PhoneClass.STOP, CorrectionMethod.STE),
        (PhoneClass.SILENCE, PhoneClass.VOWEL, CorrectionMethod.STE),
        (PhoneClass.VOWEL, PhoneClass.FRICATIVE, CorrectionMethod.SBSF),
        (PhoneClass.FRICATIVE, PhoneClass.VOWEL, CorrectionMethod.SBSF),
        (PhoneClass.NASAL, PhoneClass.AFFRICATE, CorrectionMethod.SBSF),
        (PhoneClass.NASAL, PhoneClass.VOWEL, CorrectionMethod.KEEP),
        (PhoneClass.VOWEL, PhoneClass.SEMIVOWEL, CorrectionMethod.KEEP),
        (PhoneClass.FRICATIVE, PhoneClass.AFFRICATE, CorrectionMethod.KEEP),
    ])
    def test_named_pairs(self, left, right, method):
        assert rule_for_pair(left, right) is method


class TestSnapping:
    def test_nearest_within_window(self):
        assert snap_boundary(100.0, [20.0, 130.0, 170.0], 80.0) == 130.0

    def test_nothing_close_keeps_hmm_time(self):
        assert snap_boundary(100.0, [10.0, 300.0], 80.0) == 100.0
        assert snap_boundary(100.0, [], 80.0) == 100.0

    def test_tie_goes_to_earlier(self):
        assert snap_boundary(100.0, [120.0, 80.0], 80.0) == 80.0

    def test_window_must_be_positive(self):
        with pytest.raises(ParameterError):
            snap_boundary(100.0, [100.0], 0.0)


class TestFrameEdges:
    def test_edge_times(self):
        p = params()
        assert p.edge_offset_ms == 7.5
        assert frame_edge_ms(3, p) == 37.5
        assert ms_to_frame_edge(37.5, p, 100) == 3
        assert ms_to_frame_edge(42.5, p, 100) == 4
        assert ms_to_frame_edge(-50.0, p, 100) == 0
        assert ms_to_frame_edge(5000.0, p, 100) == 100

    def test_boundaries_from_alignment(self):
        segments = [
            PhoneSegment(unit="sil", phone="sil", start_frame=0, end_frame=4, state_ends=[4]),
            PhoneSegment(unit="k", phone="k", start_frame=4, end_frame=7, state_ends=[7]),
            PhoneSegment(unit="a", phone="a", start_frame=7, end_frame=15, state_ends=[15]),
            PhoneSegment(unit="sil", phone="sil", start_frame=15, end_frame=20, state_ends=[20]),
        ]
        alignment = AlignmentResult(segments=segments, log_likelihood=0.0, acoustic_log_likelihood=0.0,
                                    num_frames=20)
        syllables = [syllable(("sil", PhoneClass.SILENCE)),
                     syllable(("k", PhoneClass.STOP), ("a", PhoneClass.VOWEL)),
                     syllable(("sil", PhoneClass.SILENCE))]
        bounds = boundaries_from_alignment(alignment, syllables, params())
        assert list(bounds.times_ms) == [47.5, 157.5]
        assert [b.right_unit for b in bounds.boundaries] == ["ka", "sil"]


class TestCandidates:
    def test_keep_has_no_candidates(self, rng):
        audio, _ = synth_syllable_utterance(rng, num_syllables=2)
        assert len(candidate_boundaries(audio, CorrectionMethod.KEEP, params())) == 0

    def test_energy_valleys_near_gaps(self):
        audio, truth = synth_syllable_utterance(np.random.default_rng(5), num_syllables=3)
        found = candidate_boundaries(audio, CorrectionMethod.STE, params(wsf=4))
        assert all(b.source is BoundarySource.STE for b in found.boundaries)
        assert np.all(np.diff(found.times_ms) > 0)
        for t in truth:
            assert np.min(np.abs(found.times_ms - t)) <= 20.0

    def test_flux_candidates_are_tagged(self, rng):
        audio, _ = synth_syllable_utterance(rng, num_syllables=3)
        found = candidate_boundaries(audio, CorrectionMethod.SBSF, params())
        assert all(b.source is BoundarySource.SBSF for b in found.boundaries)
        assert np.all(found.times_ms <= audio.duration_ms)


class TestHybridSegment:
    def test_keep_boundaries_stay(self, rng):
        audio, _ = synth_syllable_utterance(rng, num_syllables=3)
        syllables = [syllable(("a", PhoneClass.VOWEL), ("m", PhoneClass.NASAL)),
                     syllable(("a", PhoneClass.VOWEL), ("r", PhoneClass.SEMIVOWEL)),
                     syllable(("r", PhoneClass.SEMIVOWEL), ("a", PhoneClass.VOWEL))]
        bounds = hmm_set([200.0, 400.0], audio.duration_ms)
        out = hybrid_segment(audio, syllables, bounds, params())
        assert list(out.times_ms) == [200.0, 400.0]
        assert all(b.source is BoundarySource.HMM for b in out.boundaries)

    def test_count_mismatch(self, rng):
        audio, _ = synth_syllable_utterance(rng, num_syllables=3)
        with pytest.raises(ParameterError):
            hybrid_segment(audio, [syllable(("a", PhoneClass.VOWEL))] * 3, hmm_set([200.0], audio.duration_ms),
                           params())

    def test_three_syllables_displaced_late(self):
        audio, truth = synth_syllable_utterance(np.random.default_rng(5), num_syllables=3)
        syllables = [syllable((v, PhoneClass.VOWEL)) for v in ("a", "aa", "i")]
        out = hybrid_segment(audio, syllables, hmm_set([t + 40.0 for t in truth], audio.duration_ms),
                             params(wsf=4))
        assert len(out) == 2
        assert np.all(np.abs(out.times_ms - np.array(truth)) <= 20.0)
        assert all(b.source is BoundarySource.STE for b in out.boundaries)

    def test_recovers_displaced_boundaries(self):
        rng = np.random.default_rng(2024)
        p = params(wsf=4)
        reference, hypothesis = [], []
        for _ in range(50):
            audio, truth = synth_syllable_utterance(rng, num_syllables=6)
            syllables = [syllable((("a", "aa", "i")[i % 3], PhoneClass.VOWEL)) for i in range(6)]
            displaced = [t + 40.0 * rng.choice([-1.0, 1.0]) for t in truth]
            out = hybrid_segment(audio, syllables, hmm_set(displaced, audio.duration_ms), p)
            assert len(out) == len(truth)
            reference.extend(truth)
            hypothesis.extend(out.times_ms)
        errors = np.abs(np.array(hypothesis) - np.array(reference))
        assert np.mean(errors <= 20.0) >= 0.9


class TestAccuracy:
    def test_identical_sets(self):
        bounds = hmm_set([100.0, 250.0], 400.0)
        assert boundary_accuracy(bounds, bounds) == 100.0

    def test_tolerance(self):
        reference = hmm_set([100.0, 250.0, 330.0], 400.0)
        hypothesis = hmm_set([115.0, 265.0], 400.0)
        assert boundary_accuracy(reference, hypothesis, 20.0) == pytest.approx(200.0 / 3.0)
