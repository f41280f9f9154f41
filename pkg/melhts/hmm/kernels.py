# melhts/hmm/kernels.py

import numpy as np

from melhts.config import logger

# --- Optional numba ---
# Without numba the kernels run as plain Python, much more slowly.
try:
    from numba import njit
    GOT_NUMBA = True
except ImportError:
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def _identity_decorator(fn):
            return fn
        return _identity_decorator
    GOT_NUMBA = False
    logger.warning("event=numba_missing detail=alignment kernels run in pure python")

NEG_INF = -np.inf


def emission_log_densities(features: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """T x N diagonal-Gaussian log densities of every frame under every state."""
    features = np.asarray(features, dtype=np.float64)
    log_norm = -0.5 * np.sum(np.log(2.0 * np.pi * variances), axis=1)
    out = np.empty((features.shape[0], means.shape[0]))
    for j in range(means.shape[0]):
        diff = features - means[j]
        out[:, j] = log_norm[j] - 0.5 * np.sum(diff * diff / variances[j], axis=1)
    return out


@njit(cache=True, nogil=True)
def _log_add(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@njit(cache=True, nogil=True)
def viterbi_kernel(log_b, log_self, log_next):
    """
    Best left-to-right path that starts in state 0 and leaves from state N-1.

    Returns (path, score): path[t] is the state at frame t, score includes
    the exit arc. score is -inf and path is all -1 when no path exists.
    """
    num_frames, num_states = log_b.shape
    delta = np.full((num_frames, num_states), NEG_INF)
    advanced = np.zeros((num_frames, num_states), dtype=np.bool_)
    delta[0, 0] = log_b[0, 0]
    for t in range(1, num_frames):
        top = min(num_states - 1, t)
        for j in range(top + 1):
            stay = delta[t - 1, j] + log_self[j]
            move = NEG_INF
            if j > 0:
                move = delta[t - 1, j - 1] + log_next[j - 1]
            if move > stay:
                delta[t, j] = move + log_b[t, j]
                advanced[t, j] = True
            else:
                delta[t, j] = stay + log_b[t, j]

    path = np.full(num_frames, -1, dtype=np.int64)
    score = delta[num_frames - 1, num_states - 1] + log_next[num_states - 1]
    if score == NEG_INF:
        return path, score
    state = num_states - 1
    for t in range(num_frames - 1, -1, -1):
        path[t] = state
        if t > 0 and advanced[t, state]:
            state -= 1
    return path, score


@njit(cache=True, nogil=True)
def forward_backward_kernel(log_b, log_self, log_next):
    """
    State posteriors of the same topology as viterbi_kernel.

    Returns (gamma, stay, total): gamma is T x N occupation probabilities,
    stay[j] the expected number of self-loop transitions taken in state j,
    total the log-likelihood of the frames (-inf when infeasible).
    """
    num_frames, num_states = log_b.shape
    alpha = np.full((num_frames, num_states), NEG_INF)
    beta = np.full((num_frames, num_states), NEG_INF)
    alpha[0, 0] = log_b[0, 0]
    for t in range(1, num_frames):
        for j in range(min(num_states - 1, t) + 1):
            acc = alpha[t - 1, j] + log_self[j]
            if j > 0:
                acc = _log_add(acc, alpha[t - 1, j - 1] + log_next[j - 1])
            alpha[t, j] = acc + log_b[t, j]

    beta[num_frames - 1, num_states - 1] = log_next[num_states - 1]
    for t in range(num_frames - 2, -1, -1):
        for j in range(num_states):
            acc = log_self[j] + log_b[t + 1, j] + beta[t + 1, j]
            if j < num_states - 1:
                acc = _log_add(acc, log_next[j] + log_b[t + 1, j + 1] + beta[t + 1, j + 1])
            beta[t, j] = acc

    total = alpha[num_frames - 1, num_states - 1] + log_next[num_states - 1]
    gamma = np.zeros((num_frames, num_states))
    stay = np.zeros(num_states)
    if total == NEG_INF:
        return gamma, stay, total
    for t in range(num_frames):
        for j in range(num_states):
            value = alpha[t, j] + beta[t, j]
            if value != NEG_INF:
                gamma[t, j] = np.exp(value - total)
    for t in range(num_frames - 1):
        for j in range(num_states):
            value = alpha[t, j] + log_self[j] + log_b[t + 1, j] + beta[t + 1, j]
            if value != NEG_INF:
                stay[j] += np.exp(value - total)
    return gamma, stay, total
