import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from melhts.exceptions import DataError
from melhts.hmm.clustering import ContextStats, cluster_states, gaussian_log_likelihood
from melhts.hmm.model import build_questions
from melhts.models import ContextLabel, Phone, PhoneClass, SyllablePosition

from tests.conftest import label

PHONE_SET = [
    Phone(id="k", phone_class=PhoneClass.STOP),
    Phone(id="m", phone_class=PhoneClass.NASAL),
    Phone(id="a", phone_class=PhoneClass.VOWEL),
    Phone(id="sil", phone_class=PhoneClass.SILENCE),
]
FLOOR = np.full(2, 1e-3)


def stats_for(context, mean, occupancy=10.0, var=1.0) -> ContextStats:
    mean = np.asarray(mean, dtype=np.float64)
    return ContextStats(label=context, occupancy=occupancy, first=occupancy * mean,
                        second=occupancy * (var + mean * mean))


def question_map():
    return {q.name: q for q in build_questions(PHONE_SET)}


class TestClusterStates:
    def test_identical_contexts_stay_tied(self):
        stats = [stats_for(label("a", l=left, r=right), [1.0, 2.0])
                 for left, right in itertools.product(["k", "m", "sil"], ["k", "m"])]
        tree, leaves = cluster_states(stats, build_questions(PHONE_SET), 5.0, 1.0, FLOOR, phone="a")
        assert len(leaves) == 1
        assert len(tree.nodes) == 1
        assert_allclose(leaves[0].mean, [1.0, 2.0])
        assert_allclose(leaves[0].var, [1.0, 1.0])
        assert leaves[0].occupancy == pytest.approx(60.0)

    def test_separated_groups_split(self):
        after_stop = [stats_for(label("a", l="k", r=r), [10.0, 10.0]) for r in ("k", "m", "sil")]
        after_nasal = [stats_for(label("a", l="m", r=r), [-10.0, -10.0]) for r in ("k", "m", "sil")]
        tree, leaves = cluster_states(after_stop + after_nasal, build_questions(PHONE_SET), 5.0, 1.0, FLOOR,
                                      phone="a")
        assert len(leaves) == 2
        assert tree.nodes[0].question.startswith("l_")
        questions = question_map()
        high = tree.route(label("a", l="k", r="m"), questions)
        low = tree.route(label("a", l="m", r="k"), questions)
        assert_allclose(leaves[high].mean, [10.0, 10.0])
        assert_allclose(leaves[low].mean, [-10.0, -10.0])
        assert leaves[high].members == 3

    def test_min_occupancy_blocks_split(self):
        stats = [stats_for(label("a", l="k"), [10.0, 10.0]), stats_for(label("a", l="m"), [-10.0, -10.0])]
        _, leaves = cluster_states(stats, build_questions(PHONE_SET), 15.0, 1.0, FLOOR)
        assert len(leaves) == 1

    def test_min_gain_blocks_split(self):
        stats = [stats_for(label("a", l="k"), [0.1, 0.0]), stats_for(label("a", l="m"), [-0.1, 0.0])]
        _, leaves = cluster_states(stats, build_questions(PHONE_SET), 1.0, 1e6, FLOOR)
        assert len(leaves) == 1

    def test_routing_is_total(self, rng):
        stats = [stats_for(label("a", l=l, r=r, pos=pos), rng.normal(scale=5.0, size=2))
                 for l, r, pos in itertools.product(["k", "m"], ["a", "sil"], SyllablePosition)]
        tree, leaves = cluster_states(stats, build_questions(PHONE_SET), 5.0, 0.0, FLOOR)
        questions = question_map()
        unseen = [label("a"), label("a", l="sil", r="k", ll="m", rr="a"), label("a", l="a", r="a")]
        for context in unseen + [s.label for s in stats]:
            assert 0 <= tree.route(context, questions) < len(leaves)
        assert sorted(tree.leaves) == list(range(len(leaves)))

    def test_routing_is_total_on_random_labels(self, rng):
        phones = [p.id for p in PHONE_SET]
        stats = [stats_for(label("a", l=l, r=r, ll=ll, pos=pos), rng.normal(scale=5.0, size=2))
                 for l, r, ll, pos in itertools.product(phones, phones, ["k", "x"], SyllablePosition)]
        tree, leaves = cluster_states(stats, build_questions(PHONE_SET), 5.0, 0.0, FLOOR)
        assert len(leaves) > 1
        questions = question_map()
        symbols = phones + ["x", "unseen"]
        positions = list(SyllablePosition)
        for _ in range(10_000):
            ll, l, r, rr = (symbols[i] for i in rng.integers(len(symbols), size=4))
            context = ContextLabel(ll=ll, l=l, c="a", r=r, rr=rr,
                                   pos_in_syllable=positions[int(rng.integers(len(positions)))],
                                   syllable_index=int(rng.integers(0, 20)),
                                   is_word_boundary_left=bool(rng.integers(2)),
                                   is_word_boundary_right=bool(rng.integers(2)))
            assert 0 <= tree.route(context, questions) < len(leaves)

    def test_empty_stats(self):
        with pytest.raises(DataError):
            cluster_states([], build_questions(PHONE_SET), 1.0, 1.0, FLOOR)


class TestGaussianLogLikelihood:
    def test_zero_occupancy_scores_zero(self):
        assert gaussian_log_likelihood(0.0, np.zeros(2), np.zeros(2), FLOOR) == 0.0

    def test_unit_variance(self):
        occupancy = 4.0
        value = gaussian_log_likelihood(occupancy, np.zeros(1), np.full(1, occupancy), np.full(1, 1e-3))
        assert value == pytest.approx(-0.5 * occupancy * (np.log(2.0 * np.pi) + 1.0))
