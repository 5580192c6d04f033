"""Numeric kernels for chain-structured sequence models.

Two implementations are provided for each kernel: a numba ``@njit`` loop
version and a vectorized pure-numpy fallback. Set ``REQCONFLICT_PURE_NUMPY=1``
to force the numpy path (or when numba is unavailable). ``benchmarks/`` holds
a script comparing both.

All kernels take a unary score matrix ``unary`` of shape (T, L) and a
transition score matrix ``trans`` of shape (L, L), both in log space.
"""

from __future__ import annotations

import math
import os

import numpy as np


def _forward_backward_loops(unary, trans):
    """logZ, node marginals (T, L) and edge marginals (T-1, L, L)."""
    t_len, n_lab = unary.shape
    alpha = np.empty((t_len, n_lab))
    beta = np.empty((t_len, n_lab))
    for j in range(n_lab):
        alpha[0, j] = unary[0, j]
        beta[t_len - 1, j] = 0.0
    for t in range(1, t_len):
        for j in range(n_lab):
            m = -np.inf
            for i in range(n_lab):
                s = alpha[t - 1, i] + trans[i, j]
                if s > m:
                    m = s
            acc = 0.0
            for i in range(n_lab):
                acc += math.exp(alpha[t - 1, i] + trans[i, j] - m)
            alpha[t, j] = unary[t, j] + m + math.log(acc)
    for t in range(t_len - 2, -1, -1):
        for i in range(n_lab):
            m = -np.inf
            for j in range(n_lab):
                s = trans[i, j] + unary[t + 1, j] + beta[t + 1, j]
                if s > m:
                    m = s
            acc = 0.0
            for j in range(n_lab):
                acc += math.exp(trans[i, j] + unary[t + 1, j] + beta[t + 1, j] - m)
            beta[t, i] = m + math.log(acc)
    m = -np.inf
    for j in range(n_lab):
        if alpha[t_len - 1, j] > m:
            m = alpha[t_len - 1, j]
    acc = 0.0
    for j in range(n_lab):
        acc += math.exp(alpha[t_len - 1, j] - m)
    log_z = m + math.log(acc)

    node = np.empty((t_len, n_lab))
    for t in range(t_len):
        for j in range(n_lab):
            node[t, j] = math.exp(alpha[t, j] + beta[t, j] - log_z)
    edge = np.empty((t_len - 1, n_lab, n_lab))
    for t in range(t_len - 1):
        for i in range(n_lab):
            for j in range(n_lab):
                edge[t, i, j] = math.exp(
                    alpha[t, i] + trans[i, j] + unary[t + 1, j] + beta[t + 1, j] - log_z
                )
    return log_z, node, edge


def _viterbi_loops(unary, trans):
    """Exact argmax path; ties resolve to the lowest label index."""
    t_len, n_lab = unary.shape
    delta = np.empty((t_len, n_lab))
    back = np.zeros((t_len, n_lab), dtype=np.int64)
    for j in range(n_lab):
        delta[0, j] = unary[0, j]
    for t in range(1, t_len):
        for j in range(n_lab):
            best = delta[t - 1, 0] + trans[0, j]
            arg = 0
            for i in range(1, n_lab):
                s = delta[t - 1, i] + trans[i, j]
                if s > best:
                    best = s
                    arg = i
            delta[t, j] = best + unary[t, j]
            back[t, j] = arg
    best = delta[t_len - 1, 0]
    arg = 0
    for j in range(1, n_lab):
        if delta[t_len - 1, j] > best:
            best = delta[t_len - 1, j]
            arg = j
    path = np.empty(t_len, dtype=np.int64)
    path[t_len - 1] = arg
    for t in range(t_len - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def _logsumexp_over_prev(x):
    # x: (L_prev, L_next); reduce over axis 0
    m = x.max(axis=0)
    return m + np.log(np.exp(x - m).sum(axis=0))


def _forward_backward_numpy(unary, trans):
    t_len, n_lab = unary.shape
    alpha = np.empty((t_len, n_lab))
    beta = np.empty((t_len, n_lab))
    alpha[0] = unary[0]
    for t in range(1, t_len):
        alpha[t] = unary[t] + _logsumexp_over_prev(alpha[t - 1][:, None] + trans)
    beta[-1] = 0.0
    for t in range(t_len - 2, -1, -1):
        scores = trans + (unary[t + 1] + beta[t + 1])[None, :]
        m = scores.max(axis=1)
        beta[t] = m + np.log(np.exp(scores - m[:, None]).sum(axis=1))
    m = alpha[-1].max()
    log_z = float(m + np.log(np.exp(alpha[-1] - m).sum()))
    node = np.exp(alpha + beta - log_z)
    edge = np.exp(
        alpha[:-1, :, None]
        + trans[None, :, :]
        + (unary[1:] + beta[1:])[:, None, :]
        - log_z
    )
    return log_z, node, edge


def _viterbi_numpy(unary, trans):
    t_len, n_lab = unary.shape
    delta = np.empty((t_len, n_lab))
    back = np.zeros((t_len, n_lab), dtype=np.int64)
    delta[0] = unary[0]
    for t in range(1, t_len):
        scores = delta[t - 1][:, None] + trans
        back[t] = scores.argmax(axis=0)  # first maximum on ties
        delta[t] = scores.max(axis=0) + unary[t]
    path = np.empty(t_len, dtype=np.int64)
    path[-1] = int(delta[-1].argmax())
    for t in range(t_len - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def _want_numba() -> bool:
    return os.environ.get("REQCONFLICT_PURE_NUMPY", "").lower() not in ("1", "true", "yes")


USING_NUMBA = False
if _want_numba():
    try:
        from numba import njit

        forward_backward = njit(cache=True)(_forward_backward_loops)
        viterbi_path = njit(cache=True)(_viterbi_loops)
        USING_NUMBA = True
    except ImportError:
        pass
if not USING_NUMBA:
    forward_backward = _forward_backward_numpy
    viterbi_path = _viterbi_numpy
