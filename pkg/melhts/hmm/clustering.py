# melhts/hmm/clustering.py

from collections import deque
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import field_validator

from melhts.config import logger
from melhts.exceptions import DataError
from melhts.hmm.model import DecisionTree, Question, TreeNode
from melhts.models import ArrayRecord, ContextLabel

LOG_2PI = float(np.log(2.0 * np.pi))


class ContextStats(ArrayRecord):
    """Zeroth, first and second order statistics of one context at one state position."""
    label: ContextLabel
    occupancy: float
    first: np.ndarray
    second: np.ndarray

    @field_validator("first", "second", mode="before")
    @classmethod
    def to_array(cls, value):
        return np.asarray(value, dtype=np.float64)


class LeafGaussian(ArrayRecord):
    mean: np.ndarray
    var: np.ndarray
    occupancy: float
    members: int


def gaussian_log_likelihood(occupancy, first, second, variance_floor) -> np.ndarray:
    """
    Log-likelihood of the data summarised by (occupancy, first, second)
    under its own ML diagonal Gaussian. Works on single nodes or on stacked
    candidate children (leading axis); zero occupancy scores 0.
    """
    occupancy = np.asarray(occupancy, dtype=np.float64)
    safe = np.where(occupancy > 0, occupancy, 1.0)[..., None]
    mean = first / safe
    var = np.maximum(second / safe - mean * mean, variance_floor)
    per_dim = np.sum(np.log(var) + LOG_2PI + 1.0, axis=-1)
    return np.where(occupancy > 0, -0.5 * occupancy * per_dim, 0.0)


def _best_split(answers: np.ndarray, occupancy: np.ndarray, first: np.ndarray, second: np.ndarray,
                variance_floor: np.ndarray, min_occupancy: float) -> Tuple[int, float]:
    """(question index, gain) of the best admissible question, or (-1, -inf)."""
    members = answers.shape[0]
    weights = answers.astype(np.float64)
    occ_yes = weights.T @ occupancy
    first_yes = weights.T @ first
    second_yes = weights.T @ second
    occ_total = occupancy.sum()
    first_total = first.sum(axis=0)
    second_total = second.sum(axis=0)
    occ_no = occ_total - occ_yes
    first_no = first_total - first_yes
    second_no = second_total - second_yes

    counts_yes = answers.sum(axis=0)
    admissible = ((counts_yes > 0) & (counts_yes < members)
                  & (occ_yes > 0) & (occ_no > 0)
                  & (occ_yes >= min_occupancy) & (occ_no >= min_occupancy))
    if not admissible.any():
        return -1, -np.inf

    parent = gaussian_log_likelihood(occ_total, first_total, second_total, variance_floor)
    gain = (gaussian_log_likelihood(occ_yes, first_yes, second_yes, variance_floor)
            + gaussian_log_likelihood(occ_no, first_no, second_no, variance_floor) - parent)
    gain = np.where(admissible, gain, -np.inf)
    best = int(np.argmax(gain))
    return best, float(gain[best])


def cluster_states(stats: Sequence[ContextStats], questions: Sequence[Question], min_occupancy: float,
                   min_gain: float, variance_floor: np.ndarray, phone: str = "",
                   state_index: int = 0) -> Tuple[DecisionTree, List[LeafGaussian]]:
    """
    Greedy top-down clustering of the contexts seen at one (phone, state).

    A node splits on the question with the largest likelihood gain among
    those leaving both children with at least `min_occupancy` frames; it
    stays a leaf when no gain reaches `min_gain`. Nodes are expanded
    breadth-first and leaf ids are local (0..L-1) in node order.
    The root is kept even when its own occupancy is below the minimum.
    """
    if not stats:
        raise DataError(f"no context statistics for {phone}[{state_index}]")
    occupancy = np.array([s.occupancy for s in stats], dtype=np.float64)
    first = np.stack([s.first for s in stats])
    second = np.stack([s.second for s in stats])
    answers = np.array([[q.ask(s.label) for q in questions] for s in stats], dtype=bool)
    answers = answers.reshape(len(stats), len(questions))
    variance_floor = np.asarray(variance_floor, dtype=np.float64)

    # each entry: [question, yes, no, members]
    nodes: List[list] = [[None, None, None, np.arange(len(stats))]]
    queue = deque([0])
    while queue:
        index = queue.popleft()
        members = nodes[index][3]
        if len(questions) == 0:
            break
        best, gain = _best_split(answers[members], occupancy[members], first[members], second[members],
                                 variance_floor, min_occupancy)
        if best < 0 or gain < min_gain:
            continue
        mask = answers[members, best]
        nodes[index][0] = questions[best].name
        nodes[index][1] = len(nodes)
        nodes.append([None, None, None, members[mask]])
        nodes[index][2] = len(nodes)
        nodes.append([None, None, None, members[~mask]])
        queue.extend((nodes[index][1], nodes[index][2]))

    tree_nodes: List[TreeNode] = []
    leaves: List[LeafGaussian] = []
    for question, yes, no, members in nodes:
        if question is not None:
            tree_nodes.append(TreeNode(question=question, yes=yes, no=no))
            continue
        occ = float(occupancy[members].sum())
        safe = occ if occ > 0 else 1.0
        mean = first[members].sum(axis=0) / safe
        var = np.maximum(second[members].sum(axis=0) / safe - mean * mean, variance_floor)
        tree_nodes.append(TreeNode(leaf=len(leaves)))
        leaves.append(LeafGaussian(mean=mean, var=var, occupancy=occ, members=len(members)))

    tree = DecisionTree(phone=phone, state_index=state_index, nodes=tree_nodes)
    logger.debug(f"event=tree_built phone={phone} state={state_index} contexts={len(stats)} "
                 f"leaves={len(leaves)} depth={tree_depth(tree)}")
    return tree, leaves


def tree_depth(tree: DecisionTree) -> int:
    def depth(index: int) -> int:
        node = tree.nodes[index]
        if node.leaf is not None:
            return 0
        return 1 + max(depth(node.yes), depth(node.no))
    return depth(0)

