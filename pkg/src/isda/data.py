"""Datasets: synthetic Gaussian classes, CSV I/O, stratified splits."""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, ParseError
from .linalg import mvn_sample, psd_factor


@dataclass
class Dataset:
    inputs: np.ndarray  # (N, d_in)
    labels: np.ndarray  # (N,) int64
    num_classes: int
    name: str = "dataset"
    seed: int = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.labels.shape != (self.inputs.shape[0],):
            raise ContractViolation(f"inputs {self.inputs.shape} and labels {self.labels.shape} disagree")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ContractViolation(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, idx, name=None):
        return Dataset(self.inputs[idx], self.labels[idx], self.num_classes, name or self.name, self.seed)


@dataclass
class SyntheticSpec:
    means: np.ndarray  # (C, d_in)
    covariances: np.ndarray  # (C, d_in, d_in)
    train_per_class: int
    test_per_class: int
    name: str = field(default="synthetic")

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.covariances = np.asarray(self.covariances, dtype=np.float64)
        C, d = self.means.shape
        if self.covariances.shape != (C, d, d):
            raise ContractViolation(f"covariances must be ({C}, {d}, {d}), got {self.covariances.shape}")
        if not np.all(np.isfinite(self.means)):
            raise ContractViolation("means must be finite")

    @property
    def num_classes(self):
        return self.means.shape[0]


def generate_synthetic(spec: SyntheticSpec, seed):
    """Draw ``(train, test)``; class ``j`` uses streams ``[seed, j, 0]`` and ``[seed, j, 1]``."""
    parts = {0: ([], []), 1: ([], [])}
    sizes = {0: spec.train_per_class, 1: spec.test_per_class}
    for j in range(spec.num_classes):
        for which in (0, 1):
            x = mvn_sample(spec.means[j], spec.covariances[j], 1.0, [seed, j, which], sizes[which])
            parts[which][0].append(x)
            parts[which][1].append(np.full(sizes[which], j, dtype=np.int64))
    out = []
    for which, tag in ((0, "train"), (1, "test")):
        xs, ys = parts[which]
        out.append(Dataset(np.concatenate(xs), np.concatenate(ys), spec.num_classes, f"{spec.name}-{tag}", seed))
    return tuple(out)


def anisotropic_spec(num_classes=4, dim=16, train_per_class=50, test_per_class=1000,
                     separation=2.0, base_std=0.5, spread_std=3.0, rank=3, cross_aligned=False, seed=0):
    """Gaussian classes whose noise is concentrated along a few class-specific directions.

    Means sit at ``separation`` along distinct axes; each class covariance is
    ``base_std^2 I`` plus ``spread_std^2`` along ``rank`` orthonormal directions
    drawn for that class. With ``cross_aligned`` the first direction of class
    ``j`` is the mean axis of class ``j + 1`` (mod C), so a direction that is
    nuisance for one class is discriminative for another.
    """
    if num_classes > dim:
        raise ContractViolation("need dim >= num_classes to place class means on distinct axes")
    if not 1 <= rank <= dim:
        raise ContractViolation(f"rank must lie in [1, {dim}], got {rank}")
    rng = np.random.default_rng(seed)
    means = np.zeros((num_classes, dim))
    means[np.arange(num_classes), np.arange(num_classes)] = separation
    covs = np.empty((num_classes, dim, dim))
    for j in range(num_classes):
        G = rng.standard_normal((dim, rank))
        if cross_aligned:
            G[:, 0] = 0.0
            G[(j + 1) % num_classes, 0] = 1.0
        U = np.linalg.qr(G)[0]
        cov = base_std**2 * np.eye(dim) + spread_std**2 * (U @ U.T)
        covs[j] = 0.5 * (cov + cov.T)
    return SyntheticSpec(means, covs, train_per_class, test_per_class, name="anisotropic")


def validate_spec(spec: SyntheticSpec):
    for cov in spec.covariances:
        psd_factor(cov)


def save_csv(dataset: Dataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"feature_{k}" for k in range(dataset.dim)] + ["label"])
        for x, y in zip(dataset.inputs, dataset.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def load_csv(path, name=None) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ContractViolation(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    expected = [f"feature_{k}" for k in range(d)] + ["label"]
    if d < 1 or header != expected:
        raise ParseError(f"bad header {rows[0]!r}; expected feature_0,...,feature_{{d-1}},label", line=1)
    inputs = []
    labels = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 1:
            raise ParseError(f"expected {d + 1} fields, got {len(row)}", line=lineno)
        try:
            inputs.append([float(v) for v in row[:d]])
        except ValueError as exc:
            raise ParseError(f"non-numeric feature ({exc})", line=lineno) from None
        try:
            y = int(row[d])
        except ValueError:
            raise ParseError(f"label {row[d]!r} is not an integer", line=lineno) from None
        if y < 0:
            raise ParseError(f"negative label {y}", line=lineno)
        labels.append(y)
    if not labels:
        raise ContractViolation(f"{path}: no data rows")
    X = np.array(inputs, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ParseError("non-finite feature value")
    y = np.array(labels, dtype=np.int64)
    return Dataset(X, y, int(y.max()) + 1, name or str(path))


def split(dataset: Dataset, validation_fraction, seed):
    """Stratified ``(train, validation)`` split; each class contributes
    ``round(fraction * n_class)`` samples to validation."""
    if not 0 < validation_fraction < 1:
        raise ContractViolation(f"validation_fraction must be in (0, 1), got {validation_fraction}")
    rng = np.random.default_rng(seed)
    val_idx = []
    for j in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == j)
        k = int(round(validation_fraction * idx.size))
        if idx.size and (k == 0 or k == idx.size):
            raise ContractViolation(
                f"fraction {validation_fraction} leaves class {j} ({idx.size} samples) empty on one side"
            )
        val_idx.append(rng.permutation(idx)[:k])
    mask = np.zeros(len(dataset), dtype=bool)
    mask[np.concatenate(val_idx)] = True
    return (
        dataset.subset(np.flatnonzero(~mask), f"{dataset.name}-train"),
        dataset.subset(np.flatnonzero(mask), f"{dataset.name}-val"),
    )
