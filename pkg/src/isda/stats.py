"""Online per-class feature means and covariances.

Moments use the population (divide-by-n) convention, which makes the
pairwise merge of two sets of moments exact.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import ContractViolation


class CovarianceMode(str, Enum):
    FULL = "full"
    DIAGONAL = "diagonal"
    IDENTITY = "identity"
    SINGLE_GLOBAL = "single_global"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ContractViolation(f"unknown covariance mode {value!r} (expected one of {names})") from None


@dataclass(frozen=True)
class ClassStatistics:
    class_id: int
    count: int
    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def empty(cls, class_id, dim):
        return cls(class_id, 0, np.zeros(dim), np.zeros((dim, dim)))


def batch_moments(features, labels, class_id):
    """Population moments of the rows of ``features`` labelled ``class_id``.

    Returns ``(m, mean, cov)``; an absent class gives ``m == 0`` and zeros.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    rows = X[np.asarray(labels) == class_id]
    m = rows.shape[0]
    A = X.shape[1]
    if m == 0:
        return 0, np.zeros(A), np.zeros((A, A))
    mean = rows.mean(axis=0)
    R = rows - mean
    cov = (R.T @ R) / m
    return m, mean, 0.5 * (cov + cov.T)


def _merge(n, mu, cov, m, mu_b, cov_b):
    total = n + m
    mean = (n * mu + m * mu_b) / total
    d = mu - mu_b
    merged = (n * cov + m * cov_b) / total + (n * m) * np.multiply.outer(d, d) / (total * total)
    return mean, merged


def merge_statistics(prior: ClassStatistics, m, batch_mean, batch_cov) -> ClassStatistics:
    if m < 0:
        raise ContractViolation(f"batch count must be non-negative, got {m}")
    batch_mean = np.asarray(batch_mean, dtype=np.float64).reshape(-1)
    batch_cov = np.asarray(batch_cov, dtype=np.float64).reshape(batch_mean.size, batch_mean.size)
    if batch_mean.shape != prior.mean.shape:
        raise ContractViolation(f"dimension mismatch: {batch_mean.shape} vs {prior.mean.shape}")
    if m == 0:
        return prior
    if prior.count == 0:
        return ClassStatistics(prior.class_id, int(m), batch_mean.copy(), batch_cov.copy())
    mean, cov = _merge(prior.count, prior.mean, prior.cov, m, batch_mean, batch_cov)
    return ClassStatistics(prior.class_id, prior.count + int(m), mean, cov)


def pooled_statistics(stats):
    """Merge every class into one set of moments (cross-mean terms included)."""
    stats = list(stats)
    pooled = ClassStatistics.empty(-1, stats[0].mean.size)
    for s in stats:
        pooled = merge_statistics(pooled, s.count, s.mean, s.cov)
    return pooled


def snapshot_covariance(stats, mode, class_id) -> np.ndarray:
    stats = list(stats)
    if not 0 <= class_id < len(stats):
        raise ContractViolation(f"class_id {class_id} out of range [0, {len(stats)})")
    mode = CovarianceMode.parse(mode)
    A = stats[class_id].mean.size
    if mode is CovarianceMode.IDENTITY:
        return np.eye(A)
    if mode is CovarianceMode.SINGLE_GLOBAL:
        return pooled_statistics(stats).cov.copy()
    cov = stats[class_id].cov
    if mode is CovarianceMode.DIAGONAL:
        return np.diag(np.diag(cov))
    return cov.copy()


def reset(stats):
    return [ClassStatistics.empty(s.class_id, s.mean.size) for s in stats]


class CovarianceEstimator:
    """Array-backed running statistics for all classes at once.

    ``counts`` is ``(C,)``, ``means`` is ``(C, A)``, ``covs`` is ``(C, A, A)``.
    """

    def __init__(self, num_classes, dim):
        self.num_classes = int(num_classes)
        self.dim = int(dim)
        self.reset()

    def reset(self):
        self.counts = np.zeros(self.num_classes, dtype=np.int64)
        self.means = np.zeros((self.num_classes, self.dim))
        self.covs = np.zeros((self.num_classes, self.dim, self.dim))
        return self

    def update(self, features, labels):
        counts, means, covs = kernels.scatter_moments(
            np.asarray(features, dtype=np.float64), np.asarray(labels, dtype=np.int64), self.num_classes
        )
        for j in np.flatnonzero(counts):
            n, m = self.counts[j], counts[j]
            if n == 0:
                self.means[j] = means[j]
                self.covs[j] = covs[j]
            else:
                self.means[j], self.covs[j] = _merge(n, self.means[j], self.covs[j], m, means[j], covs[j])
            self.counts[j] = n + m
        return self

    def class_statistics(self):
        return [
            ClassStatistics(j, int(self.counts[j]), self.means[j].copy(), self.covs[j].copy())
            for j in range(self.num_classes)
        ]

    @classmethod
    def from_statistics(cls, stats):
        stats = list(stats)
        est = cls(len(stats), stats[0].mean.size)
        for j, s in enumerate(stats):
            est.counts[j] = s.count
            est.means[j] = s.mean
            est.covs[j] = s.cov
        return est

    def snapshot(self, mode):
        """Covariances fed to the loss: ``(C, A, A)``, or ``(C, A)`` diagonals
        in diagonal mode."""
        mode = CovarianceMode.parse(mode)
        C, A = self.num_classes, self.dim
        if mode is CovarianceMode.FULL:
            return self.covs.copy()
        if mode is CovarianceMode.DIAGONAL:
            return np.einsum("cii->ci", self.covs).copy()
        if mode is CovarianceMode.IDENTITY:
            return np.broadcast_to(np.eye(A), (C, A, A)).copy()
        pooled = pooled_statistics(self.class_statistics()).cov
        return np.broadcast_to(pooled, (C, A, A)).copy()
