"""Minimal dense-network kernels: ReLU MLP forward/backward and Adam.

Reverse-mode gradients are specialized to the fixed graphs used by the Koopman
model (MLP chains composed with latent matrix products); there is no general
tape. All arrays are float64; batches are row-major (n, dim).
"""

from dataclasses import dataclass, field

import numpy as np


def relu(z):
    return np.maximum(z, 0.0)


def relu_grad(z):
    # Subgradient at exactly 0 is taken as 0.
    return (z > 0.0).astype(float)


@dataclass
class MlpCache:
    net: "Mlp"
    x: np.ndarray
    pre: list            # pre-activations per hidden layer
    acts: list           # layer inputs (x, hidden activations)
    single: bool


class Mlp:
    """Fully connected net: ReLU on hidden layers, linear output."""

    def __init__(self, sizes, rng=None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.weights = []
        self.biases = []
        rng = rng if rng is not None else np.random.default_rng(0)
        for nin, nout in zip(self.sizes[:-1], self.sizes[1:]):
            limit = np.sqrt(6.0 / nin)
            self.weights.append(rng.uniform(-limit, limit, size=(nin, nout)))
            self.biases.append(np.zeros(nout))

    @property
    def dim_in(self):
        return self.sizes[0]

    @property
    def dim_out(self):
        return self.sizes[-1]

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_params(self, arrays):
        it = iter(arrays)
        for i in range(len(self.weights)):
            self.weights[i] = np.asarray(next(it), dtype=float)
            self.biases[i] = np.asarray(next(it), dtype=float)

    def forward(self, x):
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        a = x[None, :] if single else x
        if a.shape[1] != self.dim_in:
            raise ValueError(f"input width {a.shape[1]} != expected {self.dim_in}")
        pre, acts = [], [a]
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            if i < n_layers - 1:
                pre.append(z)
                a = relu(z)
                acts.append(a)
            else:
                a = z
        y = a[0] if single else a
        return y, MlpCache(net=self, x=x, pre=pre, acts=acts, single=single)

    def backward(self, cache: MlpCache, gy):
        """Gradients of a scalar loss given d(loss)/d(output).

        Returns (param_grads, input_grad) with param_grads ordered like
        params(): [dW0, db0, dW1, db1, ...].
        """
        if cache.net is not self:
            raise ValueError("stale cache: not produced by this network's forward")
        gy = np.asarray(gy, dtype=float)
        g = gy[None, :] if cache.single else gy
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            a_in = cache.acts[i]
            grads_w[i] = a_in.T @ g
            grads_b[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                g = g * relu_grad(cache.pre[i - 1])
        gx = g[0] if cache.single else g
        out = []
        for gw, gb in zip(grads_w, grads_b):
            out.append(gw)
            out.append(gb)
        return out, gx


def mlp_forward(net: Mlp, x):
    return net.forward_cached(x)


def mlp_backward(net: Mlp, cache: MlpCache, gy):
    return net.backward(cache, gy)


@dataclass
class Adam:
    """Bias-corrected adaptive-moment optimizer over a flat list of arrays."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def update(self, params, grads):
        """In-place Adam step; moment shapes are created lazily on first call."""
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if len(params) != len(self.m):
            raise ValueError("parameter list shape changed between updates")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def adam_update(params, grads, state: Adam):
    state.update(params, grads)
    return params, state
