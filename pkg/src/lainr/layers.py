"""Differentiable layers with explicit forward and backward passes.

Every layer follows the same contract:

* ``params`` and ``grads`` are dicts of float64 arrays with matching shapes;
* ``forward(x)`` caches what ``backward`` needs;
* ``backward(grad_out)`` accumulates parameter gradients, returns the input
  gradient and clears the cache, so a second ``backward`` without a fresh
  ``forward`` raises :class:`UsageError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lainr.errors import ConfigError, ShapeError, UsageError
from lainr.numerics import Rng, as_matrix, check_finite, matmul


class Layer:
    kind = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def _add_param(self, name, value):
        self.params[name] = np.ascontiguousarray(value, dtype=np.float64)
        self.grads[name] = np.zeros_like(self.params[name])

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def num_params(self):
        return sum(p.size for p in self.params.values())

    def _pop_cache(self):
        if self._cache is None:
            raise UsageError(f"{self.kind}.backward called without a matching forward")
        cache, self._cache = self._cache, None
        return cache

    def _check_width(self, x, width):
        if x.ndim != 2 or x.shape[1] != width:
            raise ShapeError(f"{self.kind} expects {width} input columns, got shape {x.shape}")

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    __call__ = forward


class Linear(Layer):
    """``y = x W^T + b`` with ``W`` of shape (out, in).

    Weights and biases default to uniform(-1/sqrt(in), 1/sqrt(in)).
    """

    kind = "linear"

    def __init__(self, in_features, out_features, rng=None, w_bound=None, b_bound=None):
        super().__init__()
        if in_features < 1 or out_features < 1:
            raise ConfigError("linear layer dimensions must be positive")
        self.in_features, self.out_features = in_features, out_features
        rng = rng or Rng(0)
        default = 1.0 / math.sqrt(in_features)
        wb = default if w_bound is None else w_bound
        bb = default if b_bound is None else b_bound
        self._add_param("W", rng.uniform(-wb, wb, (out_features, in_features)))
        self._add_param("b", rng.uniform(-bb, bb, (1, out_features)))

    def forward(self, x):
        self._check_width(x, self.in_features)
        self._cache = x
        return matmul(x, self.params["W"].T) + self.params["b"]

    def backward(self, grad_out):
        x = self._pop_cache()
        self.grads["W"] += matmul(grad_out.T, x)
        self.grads["b"] += grad_out.sum(axis=0, keepdims=True)
        return matmul(grad_out, self.params["W"])


class LowRankLinear(Layer):
    """``y = x (U V)^T + b`` evaluated as two thin products.

    ``U`` is (out, rank) and ``V`` is (rank, in). With ``strict`` set, a rank
    above ``min(in, out)`` is rejected; the over-complete case is still a
    valid (if redundant) factorization and is allowed when ``strict=False``.
    """

    kind = "lowrank"

    def __init__(self, in_features, out_features, rank, rng=None, strict=True):
        super().__init__()
        if rank < 1:
            raise ConfigError("rank must be positive", fields=["rank"])
        if strict and rank > min(in_features, out_features):
            raise ConfigError(
                f"rank {rank} exceeds min({in_features}, {out_features})", fields=["rank"]
            )
        self.in_features, self.out_features, self.rank = in_features, out_features, rank
        rng = rng or Rng(0)
        # product U V then has the same entry variance as a 1/sqrt(in) uniform dense layer
        v_bound = 1.0 / math.sqrt(in_features)
        u_bound = math.sqrt(3.0 / rank)
        self._add_param("U", rng.uniform(-u_bound, u_bound, (out_features, rank)))
        self._add_param("V", rng.uniform(-v_bound, v_bound, (rank, in_features)))
        self._add_param("b", rng.uniform(-v_bound, v_bound, (1, out_features)))

    def dense_weight(self):
        return matmul(self.params["U"], self.params["V"])

    def forward(self, x):
        self._check_width(x, self.in_features)
        h = matmul(x, self.params["V"].T)
        self._cache = (x, h)
        return matmul(h, self.params["U"].T) + self.params["b"]

    def backward(self, grad_out):
        x, h = self._pop_cache()
        self.grads["U"] += matmul(grad_out.T, h)
        self.grads["b"] += grad_out.sum(axis=0, keepdims=True)
        gh = matmul(grad_out, self.params["U"])
        self.grads["V"] += matmul(gh.T, x)
        return matmul(gh, self.params["V"])


class Activation(Layer):
    """Parameter-free pointwise nonlinearity: relu, tanh, sine or gaussian.

    ``sine`` computes ``sin(omega0 * x)``; ``gaussian`` computes ``exp(-(s x)^2)``.
    """

    kind = "activation"
    KINDS = ("relu", "tanh", "sine", "gaussian")

    def __init__(self, fn, param=None):
        super().__init__()
        if fn not in self.KINDS:
            raise ConfigError(f"unknown activation {fn!r}", fields=["activation"])
        self.fn = fn
        if param is None:
            param = {"sine": 30.0, "gaussian": 10.0}.get(fn)
        self.param = param

    def forward(self, x):
        fn, p = self.fn, self.param
        if fn == "relu":
            y = np.maximum(x, 0.0)
            self._cache = x > 0.0
        elif fn == "tanh":
            y = np.tanh(x)
            self._cache = y
        elif fn == "sine":
            y = np.sin(p * x)
            self._cache = x
        else:
            y = np.exp(-((p * x) ** 2))
            self._cache = (x, y)
        return check_finite(y, fn)

    def backward(self, grad_out):
        cache = self._pop_cache()
        fn, p = self.fn, self.param
        if fn == "relu":
            return grad_out * cache
        if fn == "tanh":
            return grad_out * (1.0 - cache * cache)
        if fn == "sine":
            return grad_out * (p * np.cos(p * cache))
        x, y = cache
        return grad_out * (-2.0 * p * p * x * y)


class LayerNorm(Layer):
    """Per-row standardization over features followed by a learnable affine map."""

    kind = "layernorm"

    def __init__(self, width, eps=1e-5):
        super().__init__()
        self.width, self.eps = width, eps
        self._add_param("gain", np.ones((1, width)))
        self._add_param("shift", np.zeros((1, width)))

    def forward(self, x):
        self._check_width(x, self.width)
        mu = x.mean(axis=1, keepdims=True)
        xc = x - mu
        inv_std = 1.0 / np.sqrt((xc * xc).mean(axis=1, keepdims=True) + self.eps)
        xhat = xc * inv_std
        self._cache = (xhat, inv_std)
        return xhat * self.params["gain"] + self.params["shift"]

    def backward(self, grad_out):
        xhat, inv_std = self._pop_cache()
        self.grads["gain"] += (grad_out * xhat).sum(axis=0, keepdims=True)
        self.grads["shift"] += grad_out.sum(axis=0, keepdims=True)
        g = grad_out * self.params["gain"]
        return inv_std * (
            g - g.mean(axis=1, keepdims=True) - xhat * (g * xhat).mean(axis=1, keepdims=True)
        )


@dataclass(frozen=True)
class FourierEncodingSpec:
    num_frequencies: int = 10
    base: float = 2.0
    include_input: bool = True

    def output_dim(self, input_dim):
        return input_dim * (2 * self.num_frequencies + (1 if self.include_input else 0))


class FourierEncoding(Layer):
    """Fixed sinusoidal lifting of coordinates.

    Column order: raw input (if included), then for k = 0..K-1 the block
    ``sin(base^k pi x)`` over all input dims followed by ``cos(base^k pi x)``.
    """

    kind = "fourier"

    def __init__(self, input_dim, spec=None):
        super().__init__()
        self.input_dim = input_dim
        self.spec = spec or FourierEncodingSpec()
        self.scales = math.pi * self.spec.base ** np.arange(self.spec.num_frequencies, dtype=np.float64)

    @property
    def output_dim(self):
        return self.spec.output_dim(self.input_dim)

    def forward(self, x):
        self._check_width(x, self.input_dim)
        self._cache = x
        return fourier_encode(self.spec, x)

    def backward(self, grad_out):
        x = self._pop_cache()
        n = self.input_dim
        grad_in = np.zeros_like(x)
        col = 0
        if self.spec.include_input:
            grad_in += grad_out[:, :n]
            col = n
        for c in self.scales:
            cx = c * x
            grad_in += grad_out[:, col : col + n] * (c * np.cos(cx))
            grad_in -= grad_out[:, col + n : col + 2 * n] * (c * np.sin(cx))
            col += 2 * n
        return grad_in


def fourier_encode(spec, x):
    x = as_matrix(x)
    parts = [x] if spec.include_input else []
    for k in range(spec.num_frequencies):
        cx = (math.pi * spec.base**k) * x
        parts.append(np.sin(cx))
        parts.append(np.cos(cx))
    return np.concatenate(parts, axis=1)
