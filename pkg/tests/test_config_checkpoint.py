import json

import numpy as np
import pytest

from isda import checkpoint
from isda.config import load_config, parse_config
from isda.errors import ConfigError, ContractViolation
from isda.loss import ClassifierHead
from isda.model import init_network
from isda.stats import CovarianceEstimator

BASE = {
    "data": {"synthetic": {"num_classes": 2, "dim": 3, "train_per_class": 5, "test_per_class": 5}, "seed": 1},
    "model": {"feature_dim": 2},
}


def with_(path, value):
    cfg = json.loads(json.dumps(BASE))
    node = cfg
    for k in path[:-1]:
        node = node.setdefault(k, {})
    node[path[-1]] = value
    return cfg


def test_minimal_config_parses():
    cfg = parse_config(BASE)
    train, val, test = cfg.load_datasets()
    assert len(train) == 10 and val is None and len(test) == 10
    assert cfg.sizes(3) == [3, 2]
    assert cfg.optimizer.momentum == 0.9


@pytest.mark.parametrize("path", [("bogus",), ("model", "depth"), ("optimizer", "lr"), ("isda", "lambda"),
                                  ("output", "dir"), ("data", "synthetic", "noise")])
def test_unknown_keys_rejected(path):
    with pytest.raises(ConfigError):
        parse_config(with_(path, 1))


def test_invalid_values_rejected(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(with_(("isda", "lambda0"), -1.0))
    with pytest.raises(ConfigError):
        parse_config(with_(("isda", "covariance_mode"), "banana"))
    with pytest.raises(ConfigError):
        parse_config({"data": {"csv": {"train": "nope.csv"}}, "model": {"feature_dim": 2}}, tmp_path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")


def test_csv_config(tmp_path):
    (tmp_path / "tr.csv").write_text("feature_0,label\n0.0,0\n1.0,1\n0.1,0\n0.9,1\n")
    cfg = parse_config({"data": {"csv": {"train": "tr.csv"}}, "model": {"feature_dim": 2}}, tmp_path)
    train, val, test = cfg.load_datasets()
    assert len(train) == 4 and val is None and test is None


def make_checkpoint():
    rng = np.random.default_rng(0)
    net = init_network([3, 5, 4], 2)
    head = ClassifierHead.init(3, 4, 3)
    est = CovarianceEstimator(3, 4).update(rng.standard_normal((20, 4)), rng.integers(0, 3, 20))
    return checkpoint.Checkpoint(net, head, est.class_statistics(), 17, "abc")


def test_checkpoint_round_trip_bit_exact(tmp_path):
    ck = make_checkpoint()
    checkpoint.save(ck, tmp_path / "a.ckpt")
    back = checkpoint.load(tmp_path / "a.ckpt")
    for x, y in zip(ck.net.params + [ck.head.W, ck.head.b], back.net.params + [back.head.W, back.head.b]):
        assert x.tobytes() == y.tobytes()
    for s, t in zip(ck.stats, back.stats):
        assert s.count == t.count and s.mean.tobytes() == t.mean.tobytes() and s.cov.tobytes() == t.cov.tobytes()
    assert (back.step, back.config_hash) == (17, "abc")
    checkpoint.save(back, tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_checkpoint_layout_is_little_endian_float64():
    blob = checkpoint.to_bytes(make_checkpoint())
    assert blob[:8] == b"ISDACKPT"
    hlen = int.from_bytes(blob[8:16], "little")
    header = json.loads(blob[16:16 + hlen])
    assert header["fields"][0] == ["layer0.weight", [3, 5]]
    first = np.frombuffer(blob[16 + hlen:16 + hlen + 8], dtype="<f8")[0]
    assert first == make_checkpoint().net.weights[0][0, 0]


def test_checkpoint_corruption_detected():
    blob = checkpoint.to_bytes(make_checkpoint())
    with pytest.raises(ContractViolation):
        checkpoint.from_bytes(b"XXXXXXXX" + blob[8:])
    with pytest.raises(ContractViolation):
        checkpoint.from_bytes(blob[:-8])
