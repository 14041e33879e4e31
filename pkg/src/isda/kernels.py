"""Hot inner loops, each in a numba and a pure-numpy flavour.

The public names (``quadratic_table``, ``softmax_xent``, ``draw_cross_entropy``,
``scatter_moments``) dispatch to numba when it is available and not disabled
through ``ISDA_DISABLE_NUMBA``. Both flavours are importable directly for the
benchmark and the cross-backend tests.
"""
import math

import numpy as np
from scipy.special import logsumexp

from ._accel import HAVE_NUMBA, njit

# ---------------------------------------------------------------------------
# (w_j - w_y)^T S_y (w_j - w_y) for every class j and every label y present


def quadratic_table_numpy(W, covs, present):
    """Return ``(q, SD)`` with ``q[y, j]`` the quadratic term and
    ``SD[y, j] = S_y (w_j - w_y)``. Rows for labels not in ``present`` are zero.

    ``covs`` is ``(C, A, A)`` for full matrices or ``(C, A)`` for diagonals.
    """
    C, A = W.shape
    q = np.zeros((C, C))
    SD = np.zeros((C, C, A))
    diagonal = covs.ndim == 2
    for y in np.flatnonzero(present):
        D = W - W[y]
        if diagonal:
            sd = D * covs[y]
        else:
            sd = D @ covs[y]
        SD[y] = sd
        q[y] = np.einsum("ja,ja->j", D, sd)
        q[y, y] = 0.0
    return q, SD


@njit(cache=True)
def _quadratic_table_full(W, covs, present):
    C, A = W.shape
    q = np.zeros((C, C))
    SD = np.zeros((C, C, A))
    d = np.empty(A)
    for y in range(C):
        if not present[y]:
            continue
        S = covs[y]
        for j in range(C):
            if j == y:
                continue
            for k in range(A):
                d[k] = W[j, k] - W[y, k]
            acc = 0.0
            for k in range(A):
                s = 0.0
                for l in range(A):
                    s += S[k, l] * d[l]
                SD[y, j, k] = s
                acc += d[k] * s
            q[y, j] = acc
    return q, SD


@njit(cache=True)
def _quadratic_table_diag(W, covs, present):
    C, A = W.shape
    q = np.zeros((C, C))
    SD = np.zeros((C, C, A))
    for y in range(C):
        if not present[y]:
            continue
        for j in range(C):
            if j == y:
                continue
            acc = 0.0
            for k in range(A):
                d = W[j, k] - W[y, k]
                s = covs[y, k] * d
                SD[y, j, k] = s
                acc += d * s
            q[y, j] = acc
    return q, SD


def quadratic_table_numba(W, covs, present):
    W = np.ascontiguousarray(W, dtype=np.float64)
    covs = np.ascontiguousarray(covs, dtype=np.float64)
    present = np.ascontiguousarray(present, dtype=np.bool_)
    if covs.ndim == 2:
        return _quadratic_table_diag(W, covs, present)
    return _quadratic_table_full(W, covs, present)


# ---------------------------------------------------------------------------
# max-subtracted softmax cross-entropy, row-wise


def softmax_xent_numpy(logits, labels):
    """Per-row CE losses and softmax probabilities."""
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    s = e.sum(axis=1, keepdims=True)
    rows = np.arange(logits.shape[0])
    losses = np.log(s[:, 0]) + m[:, 0] - logits[rows, labels]
    return losses, e / s


@njit(cache=True)
def _softmax_xent(logits, labels):
    N, C = logits.shape
    losses = np.empty(N)
    probs = np.empty((N, C))
    for i in range(N):
        m = logits[i, 0]
        for j in range(1, C):
            if logits[i, j] > m:
                m = logits[i, j]
        s = 0.0
        for j in range(C):
            e = math.exp(logits[i, j] - m)
            probs[i, j] = e
            s += e
        for j in range(C):
            probs[i, j] /= s
        losses[i] = math.log(s) + m - logits[i, labels[i]]
    return losses, probs


def softmax_xent_numba(logits, labels):
    return _softmax_xent(
        np.ascontiguousarray(logits, dtype=np.float64),
        np.ascontiguousarray(labels, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# CE of many augmented copies of one sample (Monte-Carlo oracle only)


def draw_cross_entropy_numpy(draws, W, b, y):
    logits = draws @ W.T + b
    return logsumexp(logits, axis=1) - logits[:, y]


@njit(cache=True)
def _draw_cross_entropy(draws, W, b, y):
    M, A = draws.shape
    C = W.shape[0]
    out = np.empty(M)
    z = np.empty(C)
    for r in range(M):
        top = -np.inf
        for j in range(C):
            acc = b[j]
            for k in range(A):
                acc += W[j, k] * draws[r, k]
            z[j] = acc
            if acc > top:
                top = acc
        s = 0.0
        for j in range(C):
            s += math.exp(z[j] - top)
        out[r] = top + math.log(s) - z[y]
    return out


def draw_cross_entropy_numba(draws, W, b, y):
    return _draw_cross_entropy(
        np.ascontiguousarray(draws, dtype=np.float64),
        np.ascontiguousarray(W, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        int(y),
    )


# ---------------------------------------------------------------------------
# per-class population moments of one batch


def scatter_moments_numpy(X, labels, num_classes):
    N, A = X.shape
    counts = np.bincount(labels, minlength=num_classes).astype(np.int64)
    means = np.zeros((num_classes, A))
    covs = np.zeros((num_classes, A, A))
    for j in np.flatnonzero(counts):
        rows = X[labels == j]
        mu = rows.mean(axis=0)
        R = rows - mu
        cov = (R.T @ R) / counts[j]
        means[j] = mu
        covs[j] = 0.5 * (cov + cov.T)
    return counts, means, covs


@njit(cache=True)
def _scatter_moments(X, labels, num_classes):
    N, A = X.shape
    counts = np.zeros(num_classes, dtype=np.int64)
    means = np.zeros((num_classes, A))
    covs = np.zeros((num_classes, A, A))
    for i in range(N):
        j = labels[i]
        counts[j] += 1
        for k in range(A):
            means[j, k] += X[i, k]
    for j in range(num_classes):
        if counts[j] > 0:
            for k in range(A):
                means[j, k] /= counts[j]
    r = np.empty(A)
    for i in range(N):
        j = labels[i]
        for k in range(A):
            r[k] = X[i, k] - means[j, k]
        for k in range(A):
            for l in range(k, A):
                covs[j, k, l] += r[k] * r[l]
    for j in range(num_classes):
        if counts[j] == 0:
            continue
        for k in range(A):
            for l in range(k, A):
                v = covs[j, k, l] / counts[j]
                covs[j, k, l] = v
                covs[j, l, k] = v
    return counts, means, covs


def scatter_moments_numba(X, labels, num_classes):
    return _scatter_moments(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(labels, dtype=np.int64),
        int(num_classes),
    )


NUMPY_KERNELS = {
    "quadratic_table": quadratic_table_numpy,
    "softmax_xent": softmax_xent_numpy,
    "draw_cross_entropy": draw_cross_entropy_numpy,
    "scatter_moments": scatter_moments_numpy,
}

if HAVE_NUMBA:
    NUMBA_KERNELS = {
        "quadratic_table": quadratic_table_numba,
        "softmax_xent": softmax_xent_numba,
        "draw_cross_entropy": draw_cross_entropy_numba,
        "scatter_moments": scatter_moments_numba,
    }
    _active = NUMBA_KERNELS
else:
    NUMBA_KERNELS = {}
    _active = NUMPY_KERNELS

quadratic_table = _active["quadratic_table"]
softmax_xent = _active["softmax_xent"]
draw_cross_entropy = _active["draw_cross_entropy"]
scatter_moments = _active["scatter_moments"]
