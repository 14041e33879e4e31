"""Binary checkpoints: JSON header plus a flat little-endian float64 payload.

Layout::

    b"ISDACKPT"                      8 bytes magic
    header length                    uint64, little-endian
    header                           UTF-8 JSON, sorted keys, compact separators
    payload                          float64, little-endian

Payload field order (every matrix row-major):

    for each MLP layer l:  layer{l}.weight (fan_in x fan_out), layer{l}.bias
    head.W (C x A), head.b (C)
    for each class j:      stats{j}.mean (A), stats{j}.cov (A x A)

Class counts are integers and live in the header (``class_counts``).
"""
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .loss import ClassifierHead
from .model import MlpNetwork
from .stats import ClassStatistics

MAGIC = b"ISDACKPT"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    net: MlpNetwork
    head: ClassifierHead
    stats: list
    step: int = 0
    config_hash: str = ""


def _fields(ck: Checkpoint):
    out = []
    for l, (w, b) in enumerate(zip(ck.net.weights, ck.net.biases)):
        out += [(f"layer{l}.weight", w), (f"layer{l}.bias", b)]
    out += [("head.W", ck.head.W), ("head.b", ck.head.b)]
    for s in ck.stats:
        out += [(f"stats{s.class_id}.mean", s.mean), (f"stats{s.class_id}.cov", s.cov)]
    return out


def to_bytes(ck: Checkpoint) -> bytes:
    fields = _fields(ck)
    header = {
        "format": "isda-checkpoint",
        "version": FORMAT_VERSION,
        "config_hash": ck.config_hash,
        "step": int(ck.step),
        "sizes": [int(s) for s in ck.net.sizes],
        "num_classes": int(ck.head.num_classes),
        "feature_dim": int(ck.head.dim),
        "class_counts": [int(s.count) for s in ck.stats],
        "fields": [[name, list(arr.shape)] for name, arr in fields],
    }
    head_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes() for _, arr in fields)
    return MAGIC + struct.pack("<Q", len(head_bytes)) + head_bytes + payload


def from_bytes(blob: bytes) -> Checkpoint:
    if blob[:8] != MAGIC:
        raise ContractViolation("not an ISDA checkpoint (bad magic)")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    if header.get("version") != FORMAT_VERSION:
        raise ContractViolation(f"unsupported checkpoint version {header.get('version')}")
    flat = np.frombuffer(blob[16 + hlen:], dtype="<f8").astype(np.float64)
    arrays = {}
    pos = 0
    for name, shape in header["fields"]:
        n = int(np.prod(shape)) if shape else 1
        if pos + n > flat.size:
            raise ContractViolation("truncated checkpoint payload")
        arrays[name] = flat[pos:pos + n].reshape(shape).copy()
        pos += n
    if pos != flat.size:
        raise ContractViolation("checkpoint payload has trailing data")
    sizes = header["sizes"]
    L = len(sizes) - 1
    net = MlpNetwork(sizes, [arrays[f"layer{l}.weight"] for l in range(L)], [arrays[f"layer{l}.bias"] for l in range(L)])
    head = ClassifierHead(arrays["head.W"], arrays["head.b"])
    stats = [
        ClassStatistics(j, int(n), arrays[f"stats{j}.mean"], arrays[f"stats{j}.cov"])
        for j, n in enumerate(header["class_counts"])
    ]
    return Checkpoint(net, head, stats, int(header["step"]), header["config_hash"])


def save(ck: Checkpoint, path):
    with open(path, "wb") as fh:
        fh.write(to_bytes(ck))


def load(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
