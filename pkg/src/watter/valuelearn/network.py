"""Dense ReLU value network with hand-written backpropagation and Adam."""
from __future__ import annotations

import numpy as np


class MLP:
    """``x -> relu(W1 x + b1) -> relu(W2 h + b2) -> W3 h + b3`` (scalar).

    ``input_scale`` multiplies inputs element-wise before the first layer and
    is not trained.
    """

    def __init__(self, n_in: int, hidden=(128, 128), seed: int = 0, input_scale=None):
        self.sizes = [n_in, *hidden, 1]
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.params: list[np.ndarray] = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            self.params.append(rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)))
            self.params.append(np.zeros(b))
        self.input_scale = np.ones(n_in) if input_scale is None else np.asarray(input_scale, dtype=float)

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    def forward(self, X, keep: bool = False):
        h = np.asarray(X, dtype=float) * self.input_scale
        acts = [h]
        n_layers = len(self.params) // 2
        for li in range(n_layers):
            W, b = self.params[2 * li], self.params[2 * li + 1]
            z = h @ W + b
            h = np.maximum(z, 0.0) if li < n_layers - 1 else z
            acts.append(h)
        out = h[:, 0]
        return (out, acts) if keep else out

    __call__ = forward

    def backward(self, acts, d_out) -> list[np.ndarray]:
        """Parameter gradients given ``dLoss/d_output`` per row."""
        grads = [None] * len(self.params)
        g = np.asarray(d_out, dtype=float)[:, None]
        n_layers = len(self.params) // 2
        for li in reversed(range(n_layers)):
            h_in = acts[li]
            grads[2 * li] = h_in.T @ g
            grads[2 * li + 1] = g.sum(axis=0)
            if li > 0:
                g = (g @ self.params[2 * li].T) * (acts[li] > 0)
        return grads

    def copy(self) -> "MLP":
        other = MLP.__new__(MLP)
        other.sizes = list(self.sizes)
        other.seed = self.seed
        other.params = [p.copy() for p in self.params]
        other.input_scale = self.input_scale.copy()
        return other

    def load_params(self, other: "MLP") -> None:
        for p, q in zip(self.params, other.params):
            p[...] = q

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat_params(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        i = 0
        for p in self.params:
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size
        if i != flat.size:
            raise ValueError(f"expected {i} parameters, got {flat.size}")


class Adam:
    def __init__(self, params, lr: float = 1e-3, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
