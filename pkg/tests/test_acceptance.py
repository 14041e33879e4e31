"""Acceptance gate: seven end-to-end criteria, each reporting one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (the lines are also
shown in the terminal summary) or ``python3 tests/test_acceptance.py``.
"""
import csv
import time

import numpy as np
import pytest

from isda import checkpoint
from isda.ablation import FewShotSetup, ordering_holds, run_ablation
from isda.cli import main
from isda.data import anisotropic_spec, generate_synthetic
from isda.loss import IsdaConfig, cross_entropy_backward, cross_entropy_forward, isda_loss_backward, isda_loss_forward
from isda.verify import bound_trial, covariance_trial, gradient_trial, random_instance
from isda.trainer import OptimizerConfig, run_once

from conftest import ROOT

REPORT = []


def report(number, ok, detail, seconds, limit=None):
    within = limit is None or seconds < limit
    status = "PASS" if ok and within else "FAIL"
    budget = f" (limit {limit:.0f}s)" if limit else ""
    line = f"[{status}] criterion {number}: {detail}; {seconds:.1f}s{budget}"
    REPORT.append(line)
    print(line)
    assert ok, line
    assert within, line


def test_1_bound_holds_statistically():
    t = time.perf_counter()
    rows = [bound_trial(seed) for seed in range(50)]
    secs = time.perf_counter() - t
    worst = min(r["gap"] / r["standard_error"] for r in rows)
    passed = sum(r["passed"] for r in rows)
    report(1, passed == 50,
           f"closed form >= MC - 3 SE in {passed}/50 trials (M=1e5), worst gap {worst:+.2f} SE", secs, 120)


def test_2_zero_lambda_reduces_to_ce():
    t = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        head, F, y, covs = random_instance(rng, 16, 8)
        a, b = isda_loss_forward(head, F, y, 0.0, covs), cross_entropy_forward(head, F, y)
        worst = max(worst, abs(a - b) / abs(b))
        ga, gb = isda_loss_backward(head, F, y, 0.0, covs), cross_entropy_backward(head, F, y)
        for name in ("grad_W", "grad_b", "grad_features"):
            x, z = getattr(ga, name), getattr(gb, name)
            worst = max(worst, float(np.max(np.abs(x - z) / np.maximum(np.abs(z), 1e-300))))
    spec = anisotropic_spec(3, 8, 20, 20, rank=2)
    train_set, _ = generate_synthetic(spec, 0)
    opt = OptimizerConfig(learning_rate=0.05, epochs=5, batch_size=16)
    n1, h1, _, m1 = run_once(train_set, [8, 6, 4], opt, IsdaConfig(lambda0=0.0), 0)
    n2, h2, _, m2 = run_once(train_set, [8, 6, 4], opt, IsdaConfig(lambda0=0.0), 0, ce_only=True)
    params_equal = all(np.array_equal(p, q) for p, q in zip(n1.params + [h1.W, h1.b], n2.params + [h2.W, h2.b]))
    losses_equal = [r.loss for r in m1.records] == [r.loss for r in m2.records]
    secs = time.perf_counter() - t
    ok = worst <= 1e-12 and params_equal and losses_equal
    report(2, ok, f"max relative diff {worst:.1e} (tol 1e-12), training run identical={params_equal and losses_equal}",
           secs, 60)


def test_3_gradients_match_finite_differences():
    t = time.perf_counter()
    rows = [gradient_trial(seed) for seed in range(100)]
    secs = time.perf_counter() - t
    worst = max(r["max_rel_error"] for r in rows)
    e2e = sum("end_to_end" in r["errors"] for r in rows)
    ok = all(r["passed"] for r in rows) and e2e > 0
    report(3, ok, f"100 instances ({e2e} end-to-end), max relative error {worst:.1e} (tol 1e-6)", secs, 120)


def test_4_streaming_covariance_matches_batch():
    t = time.perf_counter()
    rows = [covariance_trial(seed) for seed in range(20)]
    secs = time.perf_counter() - t
    worst = max(r["max_frobenius_error"] for r in rows)
    report(4, all(r["passed"] for r in rows),
           f"20 batch sequences, max relative Frobenius error {worst:.1e} (tol 1e-10)", secs, 60)


def test_5_monotone_in_lambda_and_dominates_ce():
    t = time.perf_counter()
    rng = np.random.default_rng(5)
    lams = [0.0, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0]
    bad = 0
    for _ in range(200):
        head, F, y, covs = random_instance(rng, 8, 6)
        vals = [isda_loss_forward(head, F, y, lam, covs) for lam in lams]
        ce = cross_entropy_forward(head, F, y)
        if any(b < a for a, b in zip(vals, vals[1:])) or min(vals) < ce:
            bad += 1
    secs = time.perf_counter() - t
    report(5, bad == 0, f"200 instances x {len(lams)} lambdas, {bad} violations", secs)


@pytest.mark.slow
def test_6_full_covariance_ablation_ordering():
    t = time.perf_counter()
    results = run_ablation(FewShotSetup())
    secs = time.perf_counter() - t
    parts = ", ".join(f"{m} {r.median:.4f} (lambda0={r.lambda0:g})" for m, r in results.items())
    report(6, ordering_holds(results), f"median test error over 10 seeds: {parts}", secs, 600)


def _metrics(path):
    with open(path, newline="") as fh:
        return [row[:-1] for row in csv.reader(fh)]  # drop the wall-time column


def test_7_cli_determinism_and_checkpoint_roundtrip(tmp_path):
    t = time.perf_counter()
    cfg = ROOT / "configs" / "minimal.json"
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [main(["train", str(cfg), "--seed", "7", "--out", str(d)]) for d in (a, b)]
    same_csv = _metrics(a / "metrics.csv") == _metrics(b / "metrics.csv")
    same_ckpt = (a / "final.ckpt").read_bytes() == (b / "final.ckpt").read_bytes()
    blob = (a / "final.ckpt").read_bytes()
    roundtrip = checkpoint.to_bytes(checkpoint.from_bytes(blob)) == blob
    secs = time.perf_counter() - t
    ok = codes == [0, 0] and same_csv and same_ckpt and roundtrip
    report(7, ok, f"metrics identical={same_csv}, checkpoints identical={same_ckpt}, round-trip byte-exact={roundtrip}",
           secs)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-s"]))
