"""Minimal fully-connected Q-network with hand-rolled reverse mode.

Two hidden ReLU layers of 64 units, linear 15-way output.  Weights start
uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases at zero.  No external
learning framework: gradients are accumulated by explicit backpropagation so
the classical baseline carries no extra dependencies.
"""

import json

import numpy as np

from .errors import CheckpointError

DEFAULT_SIZES = (5, 64, 64, 15)


class Mlp:
    def __init__(self, sizes=DEFAULT_SIZES, rng=None):
        if rng is None:
            rng = np.random.default_rng()
        self.sizes = tuple(int(s) for s in sizes)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    def _forward(self, x: np.ndarray):
        """Returns (activations per layer, pre-activations per layer)."""
        acts = [x]
        pres = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            pres.append(z)
            h = z if i == last else np.maximum(z, 0.0)
            acts.append(h)
        return acts, pres

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self._forward(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0][-1]

    def backward(self, x: np.ndarray, out_grad: np.ndarray):
        """Gradients of sum(out_grad * output) w.r.t. weights and biases."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        acts, pres = self._forward(x)
        w_grads = [None] * len(self.weights)
        b_grads = [None] * len(self.biases)
        delta = np.atleast_2d(out_grad)
        for i in range(len(self.weights) - 1, -1, -1):
            w_grads[i] = delta.T @ acts[i]
            b_grads[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i]) * (pres[i - 1] > 0.0)
        return w_grads, b_grads

    def get_params(self) -> dict:
        params = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            params[f"w{i}"] = w.copy()
            params[f"b{i}"] = b.copy()
        return params

    def set_params(self, params: dict) -> None:
        for i in range(len(self.weights)):
            w = np.asarray(params[f"w{i}"], dtype=np.float64)
            b = np.asarray(params[f"b{i}"], dtype=np.float64)
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ValueError(f"layer {i} shape mismatch")
            self.weights[i] = w.copy()
            self.biases[i] = b.copy()


def save_mlp(net: Mlp, path) -> None:
    doc = {
        "sizes": list(net.sizes),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_mlp(path) -> Mlp:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != {"sizes", "weights", "biases"}:
        raise CheckpointError(
            f"checkpoint {path} does not look like a network checkpoint"
        )
    sizes = tuple(doc["sizes"])
    if sizes != DEFAULT_SIZES:
        raise CheckpointError(
            f"architecture mismatch: checkpoint sizes {sizes}, expected {DEFAULT_SIZES}"
        )
    net = Mlp(sizes, rng=np.random.default_rng(0))
    try:
        net.weights = [np.array(w, dtype=np.float64) for w in doc["weights"]]
        net.biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
    except ValueError as exc:
        raise CheckpointError(f"invalid checkpoint contents: {exc}") from exc
    for i, (fan_out, fan_in) in enumerate(zip(sizes[1:], sizes[:-1])):
        if net.weights[i].shape != (fan_out, fan_in) or net.biases[i].shape != (fan_out,):
            raise CheckpointError(f"layer {i} has inconsistent shapes")
    return net
