# melhts/hmm/model.py

from typing import Dict, FrozenSet, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from melhts.config import PAD_PHONE
from melhts.exceptions import InsufficientDataError, InternalError
from melhts.models import ArrayRecord, ContextLabel, Phone, PhoneClass, SyllablePosition

# Self-loop probabilities stay strictly inside (0, 1) so both arcs keep a finite log.
MIN_TRANSITION = 1e-10


class StateSequence(NamedTuple):
    """Concatenated left-to-right states of a unit sequence."""
    means: np.ndarray          # N x D
    variances: np.ndarray      # N x D
    log_self: np.ndarray       # N
    log_next: np.ndarray       # N, the last entry is the exit arc
    unit_index: np.ndarray     # N, which input unit owns each state
    state_index: np.ndarray    # N, position of the state inside its unit
    phones: List[str]          # one per unit


def _transition_logs(self_loop: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return np.log(self_loop), np.log1p(-self_loop)


# ---------------------------
# MONOPHONE MODELS
# ---------------------------

class HmmState(ArrayRecord):
    """Diagonal Gaussian of one emitting state."""
    mean: np.ndarray
    var: np.ndarray
    occupancy: float = Field(0.0, ge=0)

    @field_validator("mean", "var", mode="before")
    @classmethod
    def to_array(cls, value):
        return np.asarray(value, dtype=np.float64)

    @model_validator(mode="after")
    def check_gaussian(self):
        if self.mean.ndim != 1 or self.mean.shape != self.var.shape:
            raise ValueError("mean and var must be vectors of equal length")
        if not np.all(np.isfinite(self.mean)):
            raise ValueError("state mean must be finite")
        if not np.all(self.var > 0) or not np.all(np.isfinite(self.var)):
            raise ValueError("state variances must be positive and finite")
        return self


class PhoneHmm(ArrayRecord):
    """
    S emitting states, left to right, no skips. State j stays with
    probability self_loop[j] and moves on otherwise.
    """
    phone: str
    states: List[HmmState] = Field(min_length=1)
    self_loop: np.ndarray
    dur_mean: np.ndarray
    dur_var: np.ndarray

    @field_validator("self_loop", "dur_mean", "dur_var", mode="before")
    @classmethod
    def to_array(cls, value):
        return np.asarray(value, dtype=np.float64)

    @model_validator(mode="after")
    def check_topology(self):
        count = len(self.states)
        for name in ("self_loop", "dur_mean", "dur_var"):
            if getattr(self, name).shape != (count,):
                raise ValueError(f"{name} needs one entry per state")
        if np.any(self.self_loop < MIN_TRANSITION) or np.any(self.self_loop > 1 - MIN_TRANSITION):
            raise ValueError("self-loop probabilities must lie strictly inside (0, 1)")
        if np.any(self.dur_mean <= 0) or np.any(self.dur_var <= 0):
            raise ValueError("duration means and variances must be positive")
        return self

    @property
    def forward(self) -> np.ndarray:
        return 1.0 - self.self_loop

    @property
    def num_states(self) -> int:
        return len(self.states)


class HmmSet(ArrayRecord):
    """Context-independent models, one PhoneHmm per phone."""
    phones: Dict[str, PhoneHmm]
    num_states: int = Field(ge=1)
    variance_floor: np.ndarray

    @field_validator("variance_floor", mode="before")
    @classmethod
    def to_array(cls, value):
        return np.asarray(value, dtype=np.float64)

    @model_validator(mode="after")
    def check_states(self):
        for phone, hmm in self.phones.items():
            if hmm.num_states != self.num_states:
                raise ValueError(f"phone '{phone}' has {hmm.num_states} states, expected {self.num_states}")
            if hmm.states[0].mean.shape != self.variance_floor.shape:
                raise ValueError(f"phone '{phone}' has the wrong feature dimension")
        return self

    @property
    def feature_dim(self) -> int:
        return int(self.variance_floor.size)

    def require(self, phones: Sequence[str]) -> None:
        missing = [p for p in phones if p not in self.phones]
        if missing:
            raise InsufficientDataError(f"no model for phones: {' '.join(sorted(set(missing)))}", missing)

    def state_sequence(self, units: Sequence[str]) -> StateSequence:
        units = list(units)
        self.require(units)
        means, variances, self_loops = [], [], []
        for phone in units:
            hmm = self.phones[phone]
            means.extend(state.mean for state in hmm.states)
            variances.extend(state.var for state in hmm.states)
            self_loops.append(hmm.self_loop)
        log_self, log_next = _transition_logs(np.concatenate(self_loops))
        count = self.num_states
        return StateSequence(
            means=np.array(means), variances=np.array(variances),
            log_self=log_self, log_next=log_next,
            unit_index=np.repeat(np.arange(len(units)), count),
            state_index=np.tile(np.arange(count), len(units)),
            phones=units,
        )


# ---------------------------
# DECISION TREES
# ---------------------------

QuestionField = Literal["ll", "l", "c", "r", "rr", "pos", "wbl", "wbr"]


class Question(BaseModel):
    """Membership test of one ContextLabel field against a value set."""
    model_config = ConfigDict(frozen=True)

    name: str
    field: QuestionField
    values: FrozenSet[str]

    def ask(self, label: ContextLabel) -> bool:
        if self.field == "pos":
            value = label.pos_in_syllable.value
        elif self.field == "wbl":
            value = str(int(label.is_word_boundary_left))
        elif self.field == "wbr":
            value = str(int(label.is_word_boundary_right))
        else:
            value = getattr(label, self.field)
        return value in self.values


def build_questions(phone_set: Sequence[Phone]) -> List[Question]:
    """
    Class and identity questions for the four neighbour slots, padding
    questions, syllable position and word-boundary flags.
    """
    by_class: Dict[PhoneClass, List[str]] = {}
    for phone in phone_set:
        by_class.setdefault(phone.phone_class, []).append(phone.id)

    questions = []
    for slot in ("ll", "l", "r", "rr"):
        questions.append(Question(name=f"{slot}_is_pad", field=slot, values=frozenset({PAD_PHONE})))
        for phone_class in PhoneClass:
            members = by_class.get(phone_class)
            if members:
                questions.append(Question(name=f"{slot}_class_{phone_class.value}", field=slot,
                                          values=frozenset(members)))
        for phone in sorted(p.id for p in phone_set):
            questions.append(Question(name=f"{slot}_phone_{phone}", field=slot, values=frozenset({phone})))
    for position in SyllablePosition:
        questions.append(Question(name=f"pos_is_{position.value}", field="pos", values=frozenset({position.value})))
    questions.append(Question(name="word_initial", field="wbl", values=frozenset({"1"})))
    questions.append(Question(name="word_final", field="wbr", values=frozenset({"1"})))
    return questions


class TreeNode(BaseModel):
    """Internal node (question, yes, no) or leaf (tied-state id)."""
    question: Optional[str] = None
    yes: Optional[int] = None
    no: Optional[int] = None
    leaf: Optional[int] = None

    @model_validator(mode="after")
    def check_kind(self):
        internal = self.question is not None and self.yes is not None and self.no is not None
        if internal == (self.leaf is not None):
            raise ValueError("a node is either a leaf or a question with two children")
        return self


class DecisionTree(BaseModel):
    """Clustering tree of one (phone, state) pair; node 0 is the root."""
    phone: str
    state_index: int = Field(ge=0)
    nodes: List[TreeNode] = Field(min_length=1)

    @model_validator(mode="after")
    def check_children(self):
        for node in self.nodes:
            if node.leaf is None and not (0 < node.yes < len(self.nodes) and 0 < node.no < len(self.nodes)):
                raise ValueError("child index out of range")
        return self

    def route(self, label: ContextLabel, questions: Dict[str, Question]) -> int:
        node = self.nodes[0]
        for _ in range(len(self.nodes)):
            if node.leaf is not None:
                return node.leaf
            question = questions.get(node.question)
            if question is None:
                raise InternalError(f"tree for {self.phone}[{self.state_index}] uses unknown question {node.question}")
            node = self.nodes[node.yes if question.ask(label) else node.no]
        raise InternalError(f"tree for {self.phone}[{self.state_index}] contains a cycle")

    @property
    def leaves(self) -> List[int]:
        return [node.leaf for node in self.nodes if node.leaf is not None]


# ---------------------------
# CLUSTERED ACOUSTIC MODEL
# ---------------------------

class ModelMetadata(BaseModel):
    num_states: int = Field(ge=1)
    num_filters: int = Field(ge=1)
    delta_half_window: int = Field(ge=1)
    frame_shift_ms: float = Field(gt=0)
    sample_rate_hz: int
    phone_set: List[Phone]

    @property
    def feature_dim(self) -> int:
        return 3 * self.num_filters


class AcousticModel(ArrayRecord):
    """
    Tree-tied pentaphone models. Tied state k has Gaussian
    (means[k], variances[k]) and duration Gaussian (dur_mean[k], dur_var[k]);
    transitions are shared per phone (row of `self_loop`, ordered as `phones`).
    """
    meta: ModelMetadata
    questions: List[Question]
    trees: List[DecisionTree]
    phones: List[str]
    self_loop: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    occupancy: np.ndarray
    dur_mean: np.ndarray
    dur_var: np.ndarray

    @field_validator("self_loop", "means", "variances", "occupancy", "dur_mean", "dur_var", mode="before")
    @classmethod
    def to_array(cls, value):
        return np.asarray(value, dtype=np.float64)

    @model_validator(mode="after")
    def check_consistency(self):
        leaves = self.means.shape[0]
        if self.means.shape != (leaves, self.meta.feature_dim) or self.variances.shape != self.means.shape:
            raise ValueError("tied means and variances must be leaves x 3*num_filters")
        for name in ("occupancy", "dur_mean", "dur_var"):
            if getattr(self, name).shape != (leaves,):
                raise ValueError(f"{name} needs one entry per tied state")
        if np.any(self.variances <= 0) or np.any(self.dur_mean <= 0) or np.any(self.dur_var <= 0):
            raise ValueError("variances and duration statistics must be positive")
        if self.self_loop.shape != (len(self.phones), self.meta.num_states):
            raise ValueError("self_loop must be phones x num_states")
        if np.any(self.self_loop < MIN_TRANSITION) or np.any(self.self_loop > 1 - MIN_TRANSITION):
            raise ValueError("self-loop probabilities must lie strictly inside (0, 1)")
        expected = {(p, s) for p in self.phones for s in range(self.meta.num_states)}
        if {(t.phone, t.state_index) for t in self.trees} != expected or len(self.trees) != len(expected):
            raise ValueError("exactly one tree per (phone, state) is required")
        known = {q.name for q in self.questions}
        for tree in self.trees:
            for node in tree.nodes:
                if node.leaf is not None and not 0 <= node.leaf < leaves:
                    raise ValueError("leaf id out of range")
                if node.question is not None and node.question not in known:
                    raise ValueError(f"unknown question {node.question}")
        return self

    _question_map: Dict[str, Question] = PrivateAttr(default_factory=dict)
    _tree_map: Dict[Tuple[str, int], DecisionTree] = PrivateAttr(default_factory=dict)
    _phone_row: Dict[str, int] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        self._question_map = {q.name: q for q in self.questions}
        self._tree_map = {(t.phone, t.state_index): t for t in self.trees}
        self._phone_row = {p: i for i, p in enumerate(self.phones)}

    @property
    def num_leaves(self) -> int:
        return int(self.means.shape[0])

    def require(self, phones: Sequence[str]) -> None:
        missing = [p for p in phones if p not in self._phone_row]
        if missing:
            raise InsufficientDataError(f"no model for phones: {' '.join(sorted(set(missing)))}", missing)

    def leaf_ids(self, label: ContextLabel) -> List[int]:
        """Tied-state id of every state of the label's centre phone."""
        self.require([label.c])
        return [self._tree_map[(label.c, s)].route(label, self._question_map)
                for s in range(self.meta.num_states)]

    def state_sequence(self, units: Sequence[ContextLabel]) -> StateSequence:
        units = list(units)
        self.require([label.c for label in units])
        leaves = np.array([leaf for label in units for leaf in self.leaf_ids(label)], dtype=np.int64)
        self_loop = np.concatenate([self.self_loop[self._phone_row[label.c]] for label in units])
        log_self, log_next = _transition_logs(self_loop)
        count = self.meta.num_states
        return StateSequence(
            means=self.means[leaves], variances=self.variances[leaves],
            log_self=log_self, log_next=log_next,
            unit_index=np.repeat(np.arange(len(units)), count),
            state_index=np.tile(np.arange(count), len(units)),
            phones=[label.c for label in units],
        )

    # --- serialization helpers used by melhts.storage ---

    def to_payload(self) -> Tuple[dict, Dict[str, np.ndarray]]:
        meta = {
            "meta": self.meta.model_dump(mode="json"),
            "questions": [{"name": q.name, "field": q.field, "values": sorted(q.values)} for q in self.questions],
            "trees": [t.model_dump(mode="json") for t in self.trees],
            "phones": list(self.phones),
        }
        arrays = {name: getattr(self, name)
                  for name in ("self_loop", "means", "variances", "occupancy", "dur_mean", "dur_var")}
        return meta, arrays

    @classmethod
    def from_payload(cls, meta: dict, arrays: Dict[str, np.ndarray]) -> "AcousticModel":
        return cls(
            meta=ModelMetadata.model_validate(meta["meta"]),
            questions=[Question(name=q["name"], field=q["field"], values=frozenset(q["values"]))
                       for q in meta["questions"]],
            trees=[DecisionTree.model_validate(t) for t in meta["trees"]],
            phones=meta["phones"],
            **arrays,
        )
