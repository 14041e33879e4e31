"""Mini-batch SGD training with the ISDA loss, evaluation, and lambda0 sweeps."""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractViolation, DivergenceError
from .loss import ClassifierHead, IsdaConfig, cross_entropy_backward, cross_entropy_forward, isda_loss_backward, lambda_at
from .model import MlpNetwork, backward, forward, init_network
from .stats import CovarianceEstimator

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (0.1, 0.25, 0.5, 0.75, 1.0)


@dataclass
class OptimizerConfig:
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    nesterov: bool = True
    lr_drops: list = field(default_factory=list)  # [(epoch, multiplier), ...]
    epochs: int = 10
    batch_size: int = 32
    shuffle_seed: int = 0

    def __post_init__(self):
        self.lr_drops = [(int(e), float(m)) for e, m in self.lr_drops]
        if not self.learning_rate >= 0:
            raise ContractViolation(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ContractViolation(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ContractViolation(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractViolation("epochs and batch_size must be positive")
        epochs = [e for e, _ in self.lr_drops]
        if epochs != sorted(epochs):
            raise ContractViolation(f"lr_drops must be sorted by epoch, got {self.lr_drops}")
        if any(not 0 < m <= 1 for _, m in self.lr_drops):
            raise ContractViolation("lr_drops multipliers must lie in (0, 1]")

    def lr_for_epoch(self, epoch):
        lr = self.learning_rate
        for e, m in self.lr_drops:
            if epoch >= e:
                lr *= m
        return lr


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_acc: float
    val_err: float
    lam: float
    seconds: float
    test_err: float = float("nan")


@dataclass
class TrainingMetrics:
    records: list = field(default_factory=list)

    def last_k_test_error(self, k=10):
        """Mean test error over the last ``k`` epochs."""
        vals = [r.test_err for r in self.records[-k:]]
        return float(np.mean(vals)) if vals else float("nan")

    def csv_rows(self):
        return [(r.epoch, r.loss, r.train_acc, r.val_err, r.lam, r.seconds) for r in self.records]


CSV_HEADER = ("epoch", "loss", "train_acc", "val_err", "lambda", "seconds")


def evaluate(net: MlpNetwork, head: ClassifierHead, dataset):
    """``(error_rate, mean_ce)`` using plain logits; argmax ties go to the lowest class."""
    if len(dataset) == 0:
        raise ContractViolation("cannot evaluate on an empty dataset")
    feats, _ = forward(net, dataset.inputs)
    pred = np.argmax(head.logits(feats), axis=1)
    err = float(np.mean(pred != dataset.labels))
    return err, cross_entropy_forward(head, feats, dataset.labels)


def _sgd_step(params, grads, velocity, lr, opt):
    for p, g, v in zip(params, grads, velocity):
        d = g + opt.weight_decay * p
        v *= opt.momentum
        v -= lr * d
        if opt.nesterov:
            p += opt.momentum * v - lr * d
        else:
            p += v


# overflow surfaces as a non-finite loss and is reported by the divergence guard
@np.errstate(over="ignore", invalid="ignore")
def train(net: MlpNetwork, head: ClassifierHead, train_set, optimizer: OptimizerConfig, isda: IsdaConfig,
          seed=0, val_set=None, test_set=None, ce_only=False, schedule_unit="step", on_epoch=None):
    """Run the ISDA training loop in place on copies of ``net`` and ``head``.

    Returns ``(net, head, estimator, metrics)``. Covariance statistics are
    merged before the loss of each step is computed. ``ce_only`` swaps in the
    plain CE loss. ``schedule_unit`` is ``"step"`` (t counts optimizer steps)
    or ``"epoch"``.
    """
    if len(train_set) == 0:
        raise ContractViolation("empty training set")
    if np.any(train_set.class_counts() == 0):
        raise ContractViolation("every class needs at least one training sample")
    net = net.copy()
    head = head.copy()
    N = len(train_set)
    B = optimizer.batch_size
    steps_per_epoch = math.ceil(N / B)
    if schedule_unit == "step":
        T = optimizer.epochs * steps_per_epoch
    elif schedule_unit == "epoch":
        T = optimizer.epochs
    else:
        raise ContractViolation(f"schedule_unit must be 'step' or 'epoch', got {schedule_unit!r}")
    cfg = replace(isda, total_steps=T)

    est = CovarianceEstimator(train_set.num_classes, head.dim)
    params = net.params + [head.W, head.b]
    velocity = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng([optimizer.shuffle_seed, seed])
    metrics = TrainingMetrics()
    start = time.perf_counter()
    step = 0
    lam = 0.0
    for epoch in range(optimizer.epochs):
        lr = optimizer.lr_for_epoch(epoch)
        order = rng.permutation(N)
        loss_sum = 0.0
        correct = 0
        for s in range(steps_per_epoch):
            idx = order[s * B:(s + 1) * B]
            x, y = train_set.inputs[idx], train_set.labels[idx]
            feats, trace = forward(net, x)
            est.update(feats, y)
            t = step + 1 if schedule_unit == "step" else epoch + 1
            lam = lambda_at(cfg, t)
            if ce_only:
                res = cross_entropy_backward(head, feats, y)
            else:
                res = isda_loss_backward(head, feats, y, lam, est.snapshot(cfg.covariance_mode))
            if not math.isfinite(res.loss):
                raise DivergenceError(step, res.loss)
            gw, gb = backward(net, trace, res.grad_features)
            grads = []
            for a, b_ in zip(gw, gb):
                grads += [a, b_]
            grads += [res.grad_W, res.grad_b]
            # accuracy from the plain logits seen by this step
            correct += int(np.sum(np.argmax(head.logits(feats), axis=1) == y))
            loss_sum += res.loss * len(idx)
            _sgd_step(params, grads, velocity, lr, optimizer)
            step += 1
        val_err = evaluate(net, head, val_set)[0] if val_set is not None and len(val_set) else float("nan")
        test_err = evaluate(net, head, test_set)[0] if test_set is not None and len(test_set) else float("nan")
        rec = EpochRecord(epoch, loss_sum / N, correct / N, val_err if val_set is not None else test_err,
                          lam, time.perf_counter() - start, test_err)
        metrics.records.append(rec)
        log.debug("epoch %d loss %.6f acc %.4f val_err %.4f lambda %.4f", epoch, rec.loss, rec.train_acc,
                  rec.val_err, lam)
        if on_epoch is not None:
            on_epoch(rec, net, head, est)
    return net, head, est, metrics


def run_once(train_set, sizes, optimizer, isda, seed, val_set=None, test_set=None, **kw):
    """Fresh initialization from ``seed`` followed by ``train``."""
    net = init_network(sizes, [seed, 0])
    head = ClassifierHead.init(train_set.num_classes, sizes[-1], [seed, 1])
    return train(net, head, train_set, optimizer, isda, seed=seed, val_set=val_set, test_set=test_set, **kw)


@dataclass
class SweepRow:
    lambda0: float
    mean_val_err: float
    std: float
    runs: int


def _sweep_job(args):
    train_set, val_set, sizes, optimizer, isda, lam0, seed, kw = args
    net, head, _, _ = run_once(train_set, sizes, optimizer, replace(isda, lambda0=lam0), seed, **kw)
    return evaluate(net, head, val_set)[0]


def sweep_lambda(train_set, val_set, sizes, optimizer, isda, lambdas, seeds, workers=1, **kw):
    """Train one run per ``(lambda0, seed)`` and score on ``val_set``.

    Returns ``(rows, selected)``; the selection is the smallest mean error,
    ties going to the smaller lambda0.
    """
    lambdas = [float(x) for x in lambdas]
    seeds = list(seeds)
    if not lambdas or not seeds:
        raise ContractViolation("sweep needs at least one lambda0 and one seed")
    jobs = [(train_set, val_set, sizes, optimizer, isda, lam0, s, kw) for lam0 in lambdas for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errs = list(pool.map(_sweep_job, jobs))
    else:
        errs = [_sweep_job(j) for j in jobs]
    rows = []
    for i, lam0 in enumerate(lambdas):
        e = np.array(errs[i * len(seeds):(i + 1) * len(seeds)])
        std = float(e.std(ddof=1)) if e.size > 1 else 0.0
        rows.append(SweepRow(lam0, float(e.mean()), std, int(e.size)))
    best = min(rows, key=lambda r: (r.mean_val_err, r.lambda0))
    return rows, best.lambda0
