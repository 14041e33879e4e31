"""Brute-force checks for the closed-form loss.

The Monte-Carlo routines draw explicit augmented copies of every feature and
average the plain CE over them; they share only the Gaussian sampler with the
library. Each sample ``i`` uses its own random stream ``[seed, i]`` so the
result does not depend on evaluation order.
"""
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .errors import ContractViolation
from .linalg import mvn_sample
from .loss import ClassifierHead, LossResult, isda_loss_forward


@dataclass
class OracleReport:
    mc_estimate: float
    mc_standard_error: float
    closed_form: float
    sample_count: int
    seed: int

    def to_dict(self):
        return asdict(self)


def _class_cov(covariances, y):
    cov = np.asarray(covariances[y], dtype=np.float64)
    return np.diag(cov) if cov.ndim == 1 else cov


def _per_sample_draws(head, features, labels, lam, covariances, M, seed):
    """Yield the ``M`` per-draw CE values of every sample."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if M < 1:
        raise ContractViolation(f"M must be >= 1, got {M}")
    if features.ndim != 2 or features.shape[0] == 0:
        raise ContractViolation("empty feature batch")
    for i, (a, y) in enumerate(zip(features, labels)):
        draws = mvn_sample(a, _class_cov(covariances, y), lam, [seed, i], M)
        yield kernels.draw_cross_entropy(draws, head.W, head.b, int(y))


def naive_augmented_loss(head: ClassifierHead, features, labels, lam, covariances, M, seed) -> float:
    """The explicit M-copy augmented CE loss (mean over N*M terms)."""
    means = [ce.mean() for ce in _per_sample_draws(head, features, labels, lam, covariances, M, seed)]
    return float(np.mean(means))


def mc_expected_loss(head, features, labels, lam, covariances, M, seed) -> OracleReport:
    """Monte-Carlo estimate of the expected augmented CE, with its standard error.

    The batch standard error is the mean of the per-sample standard errors,
    which upper-bounds the independent-samples value ``sqrt(sum se_i^2) / N``.
    """
    if M < 100:
        raise ContractViolation(f"mc_expected_loss needs M >= 100, got {M}")
    means, ses = [], []
    for ce in _per_sample_draws(head, features, labels, lam, covariances, M, seed):
        means.append(ce.mean())
        ses.append(ce.std(ddof=1) / np.sqrt(M))
    closed = isda_loss_forward(head, features, labels, lam, covariances)
    return OracleReport(float(np.mean(means)), float(np.mean(ses)), closed, int(M), int(seed))


def jensen_gap(head, features, labels, lam, covariances, M, seed):
    """``closed_form - mc_estimate``; returns ``(gap, report)``."""
    report = mc_expected_loss(head, features, labels, lam, covariances, M, seed)
    return report.closed_form - report.mc_estimate, report


def finite_difference_gradients(head, features, labels, lam, covariances, h=1e-5) -> LossResult:
    """Central differences of the closed-form loss for every entry of W, b and the features."""
    if not h > 0:
        raise ContractViolation(f"step h must be positive, got {h}")
    features = np.array(features, dtype=np.float64)
    W = head.W.copy()
    b = head.b.copy()

    def f(Wx, bx, Fx):
        return isda_loss_forward(ClassifierHead(Wx, bx), Fx, labels, lam, covariances)

    def central(arr, evaluate):
        grad = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            up = evaluate()
            arr[idx] = orig - h
            down = evaluate()
            arr[idx] = orig
            grad[idx] = (up - down) / (2 * h)
        return grad

    evaluate = lambda: f(W, b, features)  # noqa: E731
    gW = central(W, evaluate)
    gb = central(b, evaluate)
    gF = central(features, evaluate)
    return LossResult(evaluate(), gW, gb, gF, np.empty((0, 0)))
