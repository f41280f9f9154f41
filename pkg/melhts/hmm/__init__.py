from melhts.hmm.clustering import ContextStats, LeafGaussian, cluster_states
from melhts.hmm.generation import generate_parameters, mlpg, state_plan
from melhts.hmm.model import AcousticModel, DecisionTree, HmmSet, ModelMetadata, Question, build_questions
from melhts.hmm.training import (
    Chunk,
    TrainingSchedule,
    TrainingUtterance,
    align_chunks,
    embedded_reestimate,
    estimate_durations,
    flat_start_init,
    train_acoustic_model,
    viterbi_align,
)

__all__ = [
    "AcousticModel",
    "Chunk",
    "ContextStats",
    "DecisionTree",
    "HmmSet",
    "LeafGaussian",
    "ModelMetadata",
    "Question",
    "TrainingSchedule",
    "TrainingUtterance",
    "align_chunks",
    "build_questions",
    "cluster_states",
    "embedded_reestimate",
    "estimate_durations",
    "flat_start_init",
    "generate_parameters",
    "mlpg",
    "state_plan",
    "train_acoustic_model",
    "viterbi_align",
]
