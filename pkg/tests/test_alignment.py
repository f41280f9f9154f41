from itertools import combinations

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import logsumexp

from melhts.exceptions import AlignmentError, InsufficientDataError
from melhts.hmm.kernels import emission_log_densities, forward_backward_kernel
from melhts.hmm.model import HmmSet, HmmState, PhoneHmm
from melhts.hmm.training import viterbi_align


def two_phone_set(rng) -> HmmSet:
    phones = {}
    for name in ("a", "b"):
        states = [HmmState(mean=rng.normal(size=2), var=rng.uniform(0.5, 2.0, size=2)) for _ in range(2)]
        phones[name] = PhoneHmm(phone=name, states=states, self_loop=rng.uniform(0.3, 0.8, size=2),
                                dur_mean=[2.0, 2.0], dur_var=[1.0, 1.0])
    return HmmSet(phones=phones, num_states=2, variance_floor=[1e-3, 1e-3])


def all_paths(num_frames: int, num_states: int):
    """Every left-to-right path from state 0 to the last state."""
    for moves in combinations(range(1, num_frames), num_states - 1):
        path = np.zeros(num_frames, dtype=np.int64)
        for t in moves:
            path[t:] += 1
        yield path


def path_score(path, log_b, log_self, log_next):
    score = log_b[0, path[0]]
    for t in range(1, path.size):
        previous = path[t - 1]
        score += log_b[t, path[t]] + (log_next[previous] if path[t] != previous else log_self[previous])
    return score + log_next[path[-1]]


def path_of(alignment, num_frames):
    path = np.empty(num_frames, dtype=np.int64)
    state = 0
    for segment in alignment.segments:
        start = segment.start_frame
        for end in segment.state_ends:
            path[start:end] = state
            start, state = end, state + 1
    return path


class TestViterbi:
    @pytest.mark.parametrize("seed", range(200))
    def test_matches_exhaustive_search(self, seed):
        rng = np.random.default_rng(seed)
        model = two_phone_set(rng)
        units = ["a", "b"][:int(rng.integers(1, 3))]
        num_frames = int(rng.integers(2 * len(units), 11))
        features = rng.normal(size=(num_frames, 2))
        seq = model.state_sequence(units)
        log_b = emission_log_densities(features, seq.means, seq.variances)
        scores = [(path_score(p, log_b, seq.log_self, seq.log_next), tuple(p))
                  for p in all_paths(num_frames, len(seq.log_self))]
        best_score, best_path = max(scores)

        alignment = viterbi_align(model, features, units)
        assert alignment.log_likelihood == pytest.approx(best_score, abs=1e-9)
        assert tuple(path_of(alignment, num_frames)) == best_path
        assert alignment.acoustic_log_likelihood == pytest.approx(
            float(np.sum(log_b[np.arange(num_frames), list(best_path)])), abs=1e-9)

    def test_every_state_gets_a_frame(self, rng):
        model = two_phone_set(rng)
        alignment = viterbi_align(model, rng.normal(size=(4, 2)), ["a", "b"])
        assert [s.state_durations for s in alignment.segments] == [[1, 1], [1, 1]]

    def test_too_few_frames(self, rng):
        with pytest.raises(AlignmentError):
            viterbi_align(two_phone_set(rng), rng.normal(size=(3, 2)), ["a", "b"])

    def test_unknown_phone(self, rng):
        with pytest.raises(InsufficientDataError) as info:
            viterbi_align(two_phone_set(rng), rng.normal(size=(8, 2)), ["a", "zz"])
        assert info.value.phones == ["zz"]


class TestForwardBackward:
    def test_matches_exhaustive_sum(self, rng):
        model = two_phone_set(rng)
        features = rng.normal(size=(7, 2))
        seq = model.state_sequence(["a", "b"])
        log_b = emission_log_densities(features, seq.means, seq.variances)
        paths = list(all_paths(7, 4))
        scores = np.array([path_score(p, log_b, seq.log_self, seq.log_next) for p in paths])
        total = logsumexp(scores)
        weights = np.exp(scores - total)
        expected_gamma = np.zeros((7, 4))
        expected_stay = np.zeros(4)
        for weight, path in zip(weights, paths):
            expected_gamma[np.arange(7), path] += weight
            for t in range(1, 7):
                if path[t] == path[t - 1]:
                    expected_stay[path[t]] += weight

        gamma, stay, loglik = forward_backward_kernel(log_b, seq.log_self, seq.log_next)
        assert loglik == pytest.approx(total, abs=1e-9)
        assert_allclose(gamma, expected_gamma, atol=1e-10)
        assert_allclose(stay, expected_stay, atol=1e-10)
        assert_allclose(gamma.sum(axis=1), 1.0)

    def test_infeasible(self, rng):
        model = two_phone_set(rng)
        seq = model.state_sequence(["a", "b"])
        log_b = emission_log_densities(rng.normal(size=(3, 2)), seq.means, seq.variances)
        _, _, loglik = forward_backward_kernel(log_b, seq.log_self, seq.log_next)
        assert loglik == -np.inf
