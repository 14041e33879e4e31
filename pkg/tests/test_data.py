import numpy as np
import pytest
from scipy.stats import norm

from isda.data import Dataset, SyntheticSpec, anisotropic_spec, generate_synthetic, load_csv, save_csv, split
from isda.errors import ContractViolation, DegenerateCovarianceError, ParseError
from isda.loss import IsdaConfig
from isda.trainer import OptimizerConfig, evaluate, run_once


def two_gaussians(n=1000):
    return SyntheticSpec(np.array([[3.0, 0.0], [-3.0, 0.0]]), np.stack([np.eye(2)] * 2), n, n)


def test_zero_covariance_samples_equal_means():
    spec = SyntheticSpec(np.array([[1.0, 2.0], [-1.0, 0.5]]), np.zeros((2, 2, 2)), 5, 3)
    train, test = generate_synthetic(spec, 0)
    for ds in (train, test):
        assert np.array_equal(ds.inputs, spec.means[ds.labels])


def test_generation_deterministic_and_disjoint():
    spec = anisotropic_spec(3, 5, 10, 20, seed=1)
    a, b = generate_synthetic(spec, 4), generate_synthetic(spec, 4)
    assert all(np.array_equal(x.inputs, y.inputs) for x, y in zip(a, b))
    assert not np.isin(a[0].inputs[:, 0], a[1].inputs[:, 0]).any()
    assert np.array_equal(a[0].class_counts(), [10, 10, 10])
    assert np.array_equal(a[1].class_counts(), [20, 20, 20])


def test_generation_rejects_indefinite():
    spec = SyntheticSpec(np.zeros((2, 2)), np.stack([np.eye(2), -np.eye(2)]), 3, 3)
    with pytest.raises(DegenerateCovarianceError):
        generate_synthetic(spec, 0)


def test_separated_gaussians_linear_model_beats_99_percent():
    # Bayes error: the classes differ only in the first coordinate, 3 sigma from the midpoint
    bayes = norm.cdf(-3.0)
    assert bayes == pytest.approx(0.00135, abs=1e-5)
    train, test = generate_synthetic(two_gaussians(), 0)
    opt = OptimizerConfig(learning_rate=0.05, epochs=5, batch_size=64)
    net, head, _, _ = run_once(train, [2, 2], opt, IsdaConfig(lambda0=0.0), seed=0)
    err, _ = evaluate(net, head, test)
    assert err < 0.01


def test_csv_round_trip_bit_exact(tmp_path):
    train, _ = generate_synthetic(anisotropic_spec(3, 4, 7, 1, seed=2), 9)
    p = tmp_path / "d.csv"
    save_csv(train, p)
    back = load_csv(p)
    assert back.inputs.tobytes() == train.inputs.tobytes()
    assert np.array_equal(back.labels, train.labels)
    assert back.num_classes == 3
    save_csv(back, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_bytes() == p.read_bytes()


def test_csv_small_file(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("feature_0,feature_1,label\n1.5,2,0\n-3,4e-2,1\n")
    ds = load_csv(p)
    assert len(ds) == 2 and ds.dim == 2
    assert np.array_equal(ds.inputs, [[1.5, 2.0], [-3.0, 0.04]])


@pytest.mark.parametrize("body, line", [
    ("feature_0,feature_1,label\n1,2,0\n3,1\n", 3),
    ("feature_0,label\nx,0\n", 2),
    ("feature_0,label\n1,0.5\n", 2),
    ("f0,label\n1,0\n", 1),
])
def test_csv_errors_name_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(ParseError) as exc:
        load_csv(p)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_csv_empty(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(ContractViolation):
        load_csv(p)


def _ten_class_dataset(per_class=23):
    y = np.repeat(np.arange(10), per_class)
    return Dataset(np.arange(y.size, dtype=float)[:, None], y, 10)


def test_split_stratified_exhaustive():
    ds = _ten_class_dataset()
    tr, va = split(ds, 0.2, 0)
    counts = va.class_counts()
    assert np.all(np.abs(counts - 0.2 * 23) <= 1)
    merged = np.sort(np.concatenate([tr.inputs[:, 0], va.inputs[:, 0]]))
    assert np.array_equal(merged, ds.inputs[:, 0])


def test_split_seeds_differ_counts_equal():
    ds = _ten_class_dataset()
    _, a = split(ds, 0.3, 1)
    _, b = split(ds, 0.3, 2)
    assert np.array_equal(a.class_counts(), b.class_counts())
    assert not np.array_equal(a.inputs, b.inputs)
    _, c = split(ds, 0.3, 1)
    assert np.array_equal(a.inputs, c.inputs)


def test_split_errors():
    ds = _ten_class_dataset(2)
    with pytest.raises(ContractViolation):
        split(ds, 0.1, 0)
    with pytest.raises(ContractViolation):
        split(ds, 1.0, 0)
