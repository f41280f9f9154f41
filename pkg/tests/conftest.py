from pathlib import Path

import numpy as np
import pytest

from melhts.config import PipelineConfig
from melhts.hmm.model import AcousticModel, DecisionTree, ModelMetadata, TreeNode, build_questions
from melhts.models import ContextLabel, Phone, PhoneClass, SyllablePosition
from melhts.synthetic import toy_lexicon, write_toy_corpus
from melhts.textproc import Lexicon

# Vocabulary of the CLI corpus; every phone it uses appears in several utterances.
CLI_WORDS = ("ka", "mi", "sa", "tasa")

SMALL_SETTINGS = {
    "analysis": {"sample_rate_hz": 16000, "fft_size": 512, "num_filters": 20},
    "hmm": {"num_states": 3, "sentence_iterations": 1, "iterations": 2, "min_occupancy": 5.0, "min_gain": 1.0},
    "heq": {"bins": 16},
    "vocoder": {"griffin_lim_iterations": 4},
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def lexicon() -> Lexicon:
    words, classes = toy_lexicon()
    phone_set = {p: Phone(id=p, phone_class=c) for p, c in classes.items()}
    return Lexicon(entries=words, phone_set=phone_set)


@pytest.fixture
def small_config(tmp_path) -> PipelineConfig:
    settings = {key: dict(value) for key, value in SMALL_SETTINGS.items()}
    settings["paths"] = {"output_dir": tmp_path / "out"}
    return PipelineConfig.model_validate(settings)


def label(c: str, l: str = "x", r: str = "x", ll: str = "x", rr: str = "x",
          pos: SyllablePosition = SyllablePosition.NUCLEUS, syllable_index: int = 0) -> ContextLabel:
    return ContextLabel(ll=ll, l=l, c=c, r=r, rr=rr, pos_in_syllable=pos, syllable_index=syllable_index)


def make_acoustic_model(means: dict, dur_mean: dict, num_filters: int = 2, half_window: int = 1,
                        variance: float = 1.0) -> AcousticModel:
    """
    One tied state per (phone, state), no context splits.
    `means[phone]` is S x num_filters static means; deltas have mean 0.
    """
    phones = sorted(means)
    num_states = len(next(iter(means.values())))
    phone_set = [Phone(id=p, phone_class=PhoneClass.SILENCE if p == "sil" else PhoneClass.VOWEL) for p in phones]
    meta = ModelMetadata(num_states=num_states, num_filters=num_filters, delta_half_window=half_window,
                         frame_shift_ms=10.0, sample_rate_hz=16000, phone_set=phone_set)
    trees, leaf_means, leaf_durs = [], [], []
    for phone in phones:
        for state in range(num_states):
            trees.append(DecisionTree(phone=phone, state_index=state, nodes=[TreeNode(leaf=len(leaf_means))]))
            static = np.asarray(means[phone][state], dtype=np.float64)
            leaf_means.append(np.concatenate([static, np.zeros(2 * num_filters)]))
            leaf_durs.append(dur_mean[phone][state])
    count = len(leaf_means)
    return AcousticModel(
        meta=meta, questions=build_questions(phone_set), trees=trees, phones=phones,
        self_loop=np.full((len(phones), num_states), 0.6),
        means=np.array(leaf_means), variances=np.full((count, 3 * num_filters), variance),
        occupancy=np.full(count, 10.0), dur_mean=np.array(leaf_durs, dtype=np.float64),
        dur_var=np.ones(count),
    )


@pytest.fixture
def tiny_model() -> AcousticModel:
    means = {
        "a": [[1.0, -1.0], [2.0, 0.0]],
        "sil": [[-5.0, -5.0], [-4.0, -6.0]],
    }
    durations = {"a": [2.4, 3.5], "sil": [1.0, 0.2]}
    return make_acoustic_model(means, durations)


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    directory = tmp_path_factory.mktemp("toy")
    return write_toy_corpus(directory, num_utterances=12, seed=3, words=CLI_WORDS)


def write_config(path: Path, corpus, output_dir: Path, extra: str = "") -> Path:
    lines = [f"{section}.{key}={value}" for section, values in SMALL_SETTINGS.items()
             for key, value in values.items()]
    lines += [
        f"paths.corpus={corpus.manifest_path}",
        f"paths.lexicon={corpus.lexicon_path}",
        f"paths.phone_classes={corpus.phone_class_path}",
        f"paths.output_dir={output_dir}",
    ]
    path.write_text("\n".join(lines) + "\n" + extra, encoding="utf-8")
    return path
