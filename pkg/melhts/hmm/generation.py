# melhts/hmm/generation.py

from typing import Literal, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solveh_banded

from melhts.analysis import delta_window_matrix
from melhts.config import LOG_FLOOR, logger
from melhts.exceptions import ParameterError
from melhts.hmm.model import AcousticModel
from melhts.models import ContextLabel, MelSpectrogram

Smoothing = Literal["none", "mlpg"]


def state_plan(labels: Sequence[ContextLabel], model: AcousticModel,
               speaking_rate: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Tied-state id and frame count of every state, in utterance order.
    Durations are max(1, round-half-up(dur_mean * speaking_rate)).
    """
    if speaking_rate <= 0:
        raise ParameterError("speaking_rate", f"{speaking_rate} must be positive")
    if not labels:
        raise ParameterError("labels", "at least one context label is required")
    leaves = np.array([leaf for label in labels for leaf in model.leaf_ids(label)], dtype=np.int64)
    durations = np.maximum(1, np.floor(model.dur_mean[leaves] * speaking_rate + 0.5)).astype(np.int64)
    return leaves, durations


def mlpg(means: np.ndarray, variances: np.ndarray, half_window: int) -> np.ndarray:
    """
    Maximum-likelihood static trajectory for frame-level [static | delta |
    delta-delta] Gaussians.

    Each static dimension solves (W' P W) c = W' P mu, where W stacks the
    identity and the two regression windows and P holds the precisions;
    the system is banded with 4 * half_window sub-diagonals.
    """
    means = np.asarray(means, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    num_frames, width = means.shape
    if width % 3 or variances.shape != means.shape:
        raise ParameterError("means", "expected T x 3D means and variances")
    dim = width // 3
    precisions = 1.0 / variances

    first = delta_window_matrix(num_frames, half_window)
    second = (first @ first).tocsr()
    bandwidth = 4 * half_window
    out = np.empty((num_frames, dim))
    for d in range(dim):
        p0, p1, p2 = precisions[:, d], precisions[:, dim + d], precisions[:, 2 * dim + d]
        if not (np.any(p1) or np.any(p2)):
            out[:, d] = means[:, d]
            continue
        system = (sp.diags(p0) + first.T @ sp.diags(p1) @ first + second.T @ sp.diags(p2) @ second).tocsr()
        rhs = p0 * means[:, d] + first.T @ (p1 * means[:, dim + d]) + second.T @ (p2 * means[:, 2 * dim + d])
        bands = np.zeros((bandwidth + 1, num_frames))
        for k in range(min(bandwidth, num_frames - 1) + 1):
            bands[k, :num_frames - k] = system.diagonal(-k)
        out[:, d] = solveh_banded(bands, rhs, lower=True)
    return out


def generate_parameters(labels: Sequence[ContextLabel], model: AcousticModel, speaking_rate: float = 1.0,
                        smooth: Smoothing = "mlpg") -> MelSpectrogram:
    """
    Generates a mel-spectrogram for a context-label sequence.

    Raises:
        InsufficientDataError: If a label's centre phone has no model.
        InternalError: If a tree fails to route a label.
    """
    leaves, durations = state_plan(labels, model, speaking_rate)
    frame_leaves = np.repeat(leaves, durations)
    dim = model.meta.num_filters
    if smooth == "none":
        statics = model.means[frame_leaves, :dim]
    elif smooth == "mlpg":
        statics = mlpg(model.means[frame_leaves], model.variances[frame_leaves], model.meta.delta_half_window)
    else:
        raise ParameterError("smooth", f"unknown smoothing mode '{smooth}'")

    frames = np.maximum(statics, LOG_FLOOR)
    logger.debug(f"event=parameters_generated labels={len(labels)} states={leaves.size} "
                 f"frames={frames.shape[0]} smooth={smooth}")
    return MelSpectrogram(frames=frames, frame_shift_ms=model.meta.frame_shift_ms, num_filters=dim,
                          log_floor=LOG_FLOOR, sample_rate_hz=model.meta.sample_rate_hz)
