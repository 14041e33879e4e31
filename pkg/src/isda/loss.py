"""The ISDA surrogate loss and its gradients.

For a sample with feature ``a`` and label ``y`` the plain logits ``z_j = w_j.a + b_j``
are shifted to ``z_j + (lam/2) (w_j - w_y)^T S_y (w_j - w_y)`` and fed to the
usual softmax cross-entropy. The true-class logit never moves.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .errors import ContractViolation
from .stats import CovarianceMode


class Schedule(str, Enum):
    LINEAR_RAMP = "linear_ramp"
    CONSTANT = "constant"


@dataclass
class ClassifierHead:
    W: np.ndarray  # (C, A)
    b: np.ndarray  # (C,)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ContractViolation(f"head shapes inconsistent: W {self.W.shape}, b {self.b.shape}")
        if self.W.shape[0] < 2 or self.W.shape[1] < 1:
            raise ContractViolation(f"head needs C >= 2 and A >= 1, got W {self.W.shape}")

    @property
    def num_classes(self):
        return self.W.shape[0]

    @property
    def dim(self):
        return self.W.shape[1]

    @classmethod
    def init(cls, num_classes, dim, seed):
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal((num_classes, dim)) / np.sqrt(dim), np.zeros(num_classes))

    def copy(self):
        return ClassifierHead(self.W.copy(), self.b.copy())

    def logits(self, features):
        return features @ self.W.T + self.b


@dataclass
class IsdaConfig:
    lambda0: float = 0.5
    schedule: Schedule = Schedule.LINEAR_RAMP
    covariance_mode: CovarianceMode = CovarianceMode.FULL
    total_steps: int = 1

    def __post_init__(self):
        self.schedule = Schedule(self.schedule)
        self.covariance_mode = CovarianceMode.parse(self.covariance_mode)
        if not self.lambda0 >= 0:
            raise ContractViolation(f"lambda0 must be >= 0, got {self.lambda0}")
        if self.total_steps < 1:
            raise ContractViolation(f"total_steps must be >= 1, got {self.total_steps}")


@dataclass
class LossResult:
    loss: float
    grad_W: np.ndarray
    grad_b: np.ndarray
    grad_features: np.ndarray
    adjusted_logits: np.ndarray = field(repr=False)


def lambda_at(config: IsdaConfig, t) -> float:
    if not 0 <= t <= config.total_steps:
        raise ContractViolation(f"step {t} outside [0, {config.total_steps}]")
    if config.schedule is Schedule.CONSTANT:
        return float(config.lambda0)
    return (t / config.total_steps) * config.lambda0


def _check_batch(head, features, labels):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ContractViolation(f"expected a non-empty (N, A) feature batch, got shape {features.shape}")
    if features.shape[1] != head.dim:
        raise ContractViolation(f"feature dim {features.shape[1]} != head dim {head.dim}")
    if labels.shape != (features.shape[0],):
        raise ContractViolation(f"labels shape {labels.shape} does not match {features.shape[0]} samples")
    if labels.min() < 0 or labels.max() >= head.num_classes:
        raise ContractViolation(f"labels must lie in [0, {head.num_classes})")
    return features, labels


def _check_covs(head, covariances):
    covs = np.asarray(covariances, dtype=np.float64)
    C, A = head.W.shape
    if covs.shape not in ((C, A, A), (C, A)):
        raise ContractViolation(f"covariances must be (C, A, A) or diagonal (C, A); got {covs.shape}")
    return covs


def _isda_terms(head, features, labels, lam, covariances):
    covs = _check_covs(head, covariances)
    present = np.zeros(head.num_classes, dtype=bool)
    present[labels] = True
    q, SD = kernels.quadratic_table(head.W, covs, present)
    z = head.logits(features)
    return z + (0.5 * lam) * q[labels], SD


def adjusted_logits(head: ClassifierHead, a, y, lam, cov) -> np.ndarray:
    """Adjusted logits of one sample; ``cov`` is the covariance of class ``y``."""
    if lam < 0:
        raise ContractViolation(f"lambda must be >= 0, got {lam}")
    a = np.asarray(a, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    if a.shape != (head.dim,) or cov.shape not in ((head.dim, head.dim), (head.dim,)):
        raise ContractViolation(f"dimension mismatch: a {a.shape}, cov {cov.shape}, head dim {head.dim}")
    covs = np.zeros((head.num_classes,) + cov.shape)
    covs[y] = cov
    zt, _ = _isda_terms(head, a[None, :], np.array([y]), lam, covs)
    return zt[0]


def cross_entropy_forward(head, features, labels) -> float:
    """Plain softmax CE; the reference the ISDA loss reduces to at lambda 0."""
    features, labels = _check_batch(head, features, labels)
    losses, _ = kernels.softmax_xent(head.logits(features), labels)
    return float(losses.mean())


def cross_entropy_backward(head, features, labels) -> LossResult:
    features, labels = _check_batch(head, features, labels)
    z = head.logits(features)
    losses, probs = kernels.softmax_xent(z, labels)
    N = features.shape[0]
    g = probs
    g[np.arange(N), labels] -= 1.0
    g /= N
    return LossResult(float(losses.mean()), g.T @ features, g.sum(axis=0), g @ head.W, z)


def isda_loss_forward(head, features, labels, lam, covariances) -> float:
    if lam < 0:
        raise ContractViolation(f"lambda must be >= 0, got {lam}")
    features, labels = _check_batch(head, features, labels)
    zt, _ = _isda_terms(head, features, labels, lam, covariances)
    losses, _ = kernels.softmax_xent(zt, labels)
    return float(losses.mean())


def isda_loss_backward(head, features, labels, lam, covariances) -> LossResult:
    """Loss and exact gradients w.r.t. ``W``, ``b`` and the features.

    Covariances are constants. With ``g = softmax(z~) - onehot(y)``:
    the row ``w_j`` (j != y) receives ``g_j (a + lam S_y (w_j - w_y))`` and the
    true-class row receives ``g_y a - lam sum_{n != y} g_n S_y (w_n - w_y)``.
    """
    if lam < 0:
        raise ContractViolation(f"lambda must be >= 0, got {lam}")
    features, labels = _check_batch(head, features, labels)
    zt, SD = _isda_terms(head, features, labels, lam, covariances)
    losses, probs = kernels.softmax_xent(zt, labels)
    N, C = zt.shape
    g = probs
    g[np.arange(N), labels] -= 1.0
    g /= N

    # per-label sums of g; the covariance term only depends on the label
    gsum = np.zeros((C, C))
    np.add.at(gsum, labels, g)
    # extra[j] = sum_y gsum[y, j] * SD[y, j]   (SD[y, y] == 0)
    extra = np.einsum("yj,yja->ja", gsum, SD)
    # true-class rows: -sum_n gsum[y, n] * SD[y, n]
    extra -= np.einsum("yn,yna->ya", gsum, SD)
    grad_W = g.T @ features + lam * extra
    return LossResult(float(losses.mean()), grad_W, g.sum(axis=0), g @ head.W, zt)
