"""Randomized property suites behind ``isda verify``.

Each trial ``i`` of a suite run with base seed ``s`` draws its instance from
``numpy.random.default_rng(s + i)`` and reports that integer as its seed.
"""
import numpy as np

from .loss import ClassifierHead, isda_loss_backward, isda_loss_forward
from .model import backward, forward, init_network
from .oracle import finite_difference_gradients, mc_expected_loss
from .stats import CovarianceEstimator

BOUND_LAMBDAS = (0.1, 0.5, 1.0, 5.0)
GRADIENT_TOL = 1e-6
COVARIANCE_TOL = 1e-10
# entries smaller than this are compared on an absolute scale of GRAD_FLOOR * GRADIENT_TOL
GRAD_FLOOR = 1e-3


def random_psd(rng, dim, rank=None):
    rank = dim if rank is None else rank
    F = rng.standard_normal((dim, rank)) * rng.uniform(0.2, 1.5)
    S = F @ F.T / max(rank, 1)
    return 0.5 * (S + S.T)


def random_instance(rng, max_dim, max_classes, max_batch=6, diagonal=None):
    """A random head, feature batch and per-class covariances."""
    A = int(rng.integers(1, max_dim + 1))
    C = int(rng.integers(2, max_classes + 1))
    N = int(rng.integers(1, max_batch + 1))
    head = ClassifierHead(rng.standard_normal((C, A)) / np.sqrt(A) * 1.5, rng.standard_normal(C) * 0.5)
    feats = rng.standard_normal((N, A)) * 1.5
    labels = rng.integers(0, C, N)
    if diagonal is None:
        diagonal = rng.random() < 0.25
    if diagonal:
        covs = rng.uniform(0.0, 1.5, (C, A))
    else:
        covs = np.stack([random_psd(rng, A, int(rng.integers(1, A + 1))) for _ in range(C)])
    return head, feats, labels, covs


def relative_error(analytic, numeric, floor=GRAD_FLOOR):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def bound_trial(seed, M=100_000, lam=None):
    rng = np.random.default_rng(seed)
    head, feats, labels, covs = random_instance(rng, 8, 5, max_batch=4, diagonal=False)
    if lam is None:
        lam = BOUND_LAMBDAS[seed % len(BOUND_LAMBDAS)]
    rep = mc_expected_loss(head, feats, labels, lam, covs, M, seed)
    gap = rep.closed_form - rep.mc_estimate
    return {
        "seed": int(seed),
        "lambda": lam,
        "closed_form": rep.closed_form,
        "mc_estimate": rep.mc_estimate,
        "standard_error": rep.mc_standard_error,
        "gap": gap,
        "passed": bool(gap >= -3.0 * rep.mc_standard_error),
    }


def end_to_end_gradients(net, head, X, y, lam, covs, h=1e-5):
    """Analytic and central-difference gradients of the loss w.r.t. every
    network and head parameter, as two flat arrays."""
    feats, trace = forward(net, X)
    res = isda_loss_backward(head, feats, y, lam, covs)
    gw, gb = backward(net, trace, res.grad_features)
    analytic = []
    for a, b in zip(gw, gb):
        analytic += [a.ravel(), b.ravel()]
    analytic += [res.grad_W.ravel(), res.grad_b.ravel()]

    def value():
        return isda_loss_forward(head, forward(net, X)[0], y, lam, covs)

    numeric = []
    for p in net.params + [head.W, head.b]:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = value()
            p[idx] = orig - h
            down = value()
            p[idx] = orig
            g[idx] = (up - down) / (2 * h)
        numeric.append(g.ravel())
    return np.concatenate(analytic), np.concatenate(numeric)


def gradient_trial(seed, h=1e-5, end_to_end=None):
    rng = np.random.default_rng(seed)
    lam = float(rng.choice([0.0, 0.1, 0.5, 1.0, 2.0]))
    head, feats, labels, covs = random_instance(rng, 16, 8)
    res = isda_loss_backward(head, feats, labels, lam, covs)
    fd = finite_difference_gradients(head, feats, labels, lam, covs, h)
    errs = {
        "grad_W": relative_error(res.grad_W, fd.grad_W),
        "grad_b": relative_error(res.grad_b, fd.grad_b),
        "grad_features": relative_error(res.grad_features, fd.grad_features),
    }
    if end_to_end is None:
        end_to_end = seed % 5 == 0
    if end_to_end:
        C = int(rng.integers(2, 4))
        net = init_network([2, 4, 3], rng.integers(1 << 31))
        head2 = ClassifierHead(rng.standard_normal((C, 3)), rng.standard_normal(C) * 0.5)
        X = rng.standard_normal((5, 2))
        y = rng.integers(0, C, 5)
        covs2 = np.stack([random_psd(rng, 3) for _ in range(C)])
        a, n = end_to_end_gradients(net, head2, X, y, lam, covs2, h)
        errs["end_to_end"] = relative_error(a, n)
    worst = max(errs.values())
    return {"seed": int(seed), "lambda": lam, "errors": errs, "max_rel_error": worst,
            "passed": bool(worst <= GRADIENT_TOL)}


def _rel_frobenius(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def covariance_trial(seed, max_dim=32, max_samples=10_000):
    rng = np.random.default_rng(seed)
    A = int(rng.integers(1, max_dim + 1))
    C = int(rng.integers(1, 6))
    total = int(rng.integers(C, max_samples + 1))
    shift = rng.standard_normal((C, A)) * rng.uniform(0, 5)
    mix = rng.standard_normal((C, A, A)) / np.sqrt(A)
    labels = rng.integers(0, C, total)
    X = np.einsum("nk,nak->na", rng.standard_normal((total, A)), mix[labels]) + shift[labels]
    est = CovarianceEstimator(C, A)
    pos = 0
    while pos < total:
        step = int(rng.integers(1, 257))
        est.update(X[pos:pos + step], labels[pos:pos + step])
        pos += step
    worst = 0.0
    counts_ok = True
    for j in range(C):
        rows = X[labels == j]
        if rows.shape[0] != est.counts[j]:
            counts_ok = False
        if rows.shape[0] == 0:
            continue
        mu = rows.mean(axis=0)
        R = rows - mu
        cov = R.T @ R / rows.shape[0]
        worst = max(worst, _rel_frobenius(est.means[j], mu), _rel_frobenius(est.covs[j], cov))
    return {"seed": int(seed), "dim": A, "classes": C, "samples": total, "max_frobenius_error": worst,
            "counts_ok": counts_ok, "passed": bool(counts_ok and worst <= COVARIANCE_TOL)}


SUITES = {
    "bound": (bound_trial, 50),
    "gradients": (gradient_trial, 100),
    "covariance": (covariance_trial, 20),
}


def run_suite(name, trials=None, seed=0):
    fn, default = SUITES[name]
    n = default if trials is None else trials
    rows = [fn(seed + i) for i in range(n)]
    summary = {"trials": rows, "passed": all(r["passed"] for r in rows)}
    if name == "bound":
        summary["min_gap"] = min((r["gap"] for r in rows), default=None)
    elif name == "gradients":
        summary["max_rel_error"] = max((r["max_rel_error"] for r in rows), default=None)
    else:
        summary["max_frobenius_error"] = max((r["max_frobenius_error"] for r in rows), default=None)
    return summary
