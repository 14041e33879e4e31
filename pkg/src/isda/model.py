"""A small ReLU MLP that maps raw inputs to deep features."""
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation


@dataclass
class MlpNetwork:
    sizes: list
    weights: list  # weights[l] has shape (sizes[l], sizes[l + 1])
    biases: list

    def copy(self):
        return MlpNetwork(list(self.sizes), [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    pre: list  # pre-activations per layer
    post: list  # activations per layer (post[-1] are the features)


def init_network(sizes, seed) -> MlpNetwork:
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise ContractViolation(f"need at least input and feature sizes, got {sizes}")
    if any(s <= 0 for s in sizes):
        raise ContractViolation(f"layer sizes must be positive, got {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    return MlpNetwork(sizes, weights, biases)


def forward(net: MlpNetwork, inputs):
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.sizes[0]:
        raise ContractViolation(f"expected inputs of shape (N, {net.sizes[0]}), got {x.shape}")
    pre, post = [], []
    h = x
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = z if l == last else np.maximum(z, 0.0)
        pre.append(z)
        post.append(h)
    return h, ForwardTrace(x, pre, post)


def backward(net: MlpNetwork, trace: ForwardTrace, grad_features):
    """Gradients ``(grad_weights, grad_biases)`` given dLoss/dfeatures."""
    g = np.asarray(grad_features, dtype=np.float64)
    if len(trace.pre) != len(net.weights) or g.shape != trace.post[-1].shape:
        raise ContractViolation("trace does not match this network or gradient shape")
    L = len(net.weights)
    gw = [None] * L
    gb = [None] * L
    for l in range(L - 1, -1, -1):
        if l != L - 1:
            g = g * (trace.pre[l] > 0)
        below = trace.inputs if l == 0 else trace.post[l - 1]
        gw[l] = below.T @ g
        gb[l] = g.sum(axis=0)
        if l > 0:
            g = g @ net.weights[l].T
    return gw, gb
