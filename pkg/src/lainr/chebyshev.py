"""Chebyshev basis evaluation and the learnable-activation block built on it."""

from __future__ import annotations

import math

import numpy as np

from lainr.errors import ConfigError, DomainError, ShapeError
from lainr.layers import Layer
from lainr.numerics import Rng, check_finite, matmul

DOMAIN_SLACK = 1e-12


def _check_domain(x):
    if x.size and np.max(np.abs(x)) > 1.0 + DOMAIN_SLACK:
        raise DomainError(
            f"Chebyshev input outside [-1, 1] (max |x| = {np.max(np.abs(x)):.6g})"
        )


def chebyshev_eval(x, degree):
    """Return ``T_1(x) .. T_degree(x)`` stacked on a new trailing axis.

    Uses ``T_{d+1} = 2x T_d - T_{d-1}`` with ``T_0 = 1``, ``T_1 = x``.
    """
    x = np.asarray(x, dtype=np.float64)
    if degree < 1:
        raise ConfigError("degree must be at least 1", fields=["degree"])
    _check_domain(x)
    flat = x.reshape(-1)
    t = np.empty((degree, flat.size))
    t[0] = flat
    if degree > 1:
        two_x = 2.0 * flat
        t[1] = two_x * flat - 1.0
        for d in range(2, degree):
            np.multiply(two_x, t[d - 1], out=t[d])
            t[d] -= t[d - 2]
    return np.ascontiguousarray(t.T).reshape(*x.shape, degree)


def chebyshev_derivative(x, degree):
    """Return ``dT_d/dx = d * U_{d-1}(x)`` for d = 1..degree.

    ``U`` (second kind) follows the same recurrence with ``U_0 = 1``, ``U_1 = 2x``.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_domain(x)
    flat = x.reshape(-1)
    u = np.empty((degree, flat.size))
    u[0] = 1.0
    if degree > 1:
        two_x = 2.0 * flat
        u[1] = two_x
        for k in range(2, degree):
            np.multiply(two_x, u[k - 1], out=u[k])
            u[k] -= u[k - 2]
    u *= np.arange(1, degree + 1, dtype=np.float64)[:, None]
    return np.ascontiguousarray(u.T).reshape(*x.shape, degree)


def la_param_count(n, m, degree):
    return n * m * degree


class LearnableActivation(Layer):
    """Grid of per-edge one-dimensional functions, one per (output j, input i) pair.

    Output ``j`` is ``sum_i sum_{d=1..D} coeffs[j, i, d-1] * T_d(x_i)``. There is
    no constant term and no bias. Coefficients start as independent normals
    with standard deviation ``1/sqrt(n*D)`` so the output variance stays O(1)
    at any degree.

    Set ``needs_input_grad = False`` when the input is a fixed coordinate
    batch; ``backward`` then skips the second-kind recurrence and returns None.
    """

    kind = "chebyshev_la"

    def __init__(self, in_features, out_features, degree, rng=None):
        super().__init__()
        if min(in_features, out_features, degree) < 1:
            raise ConfigError("LA block dimensions and degree must be positive")
        self.in_features, self.out_features, self.degree = in_features, out_features, degree
        self.needs_input_grad = True
        rng = rng or Rng(0)
        std = 1.0 / math.sqrt(in_features * degree)
        self._add_param("coeffs", rng.normal(0.0, std, (out_features, in_features, degree)))

    def basis(self, x):
        """Basis values flattened to (rows, n*D), matching the coefficient layout."""
        return chebyshev_eval(x, self.degree).reshape(x.shape[0], -1)

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"LA block expects {self.in_features} input columns, got {x.shape}")
        b = self.basis(x)
        self._cache = (x, b)
        a = self.params["coeffs"].reshape(self.out_features, -1)
        return matmul(b, a.T)

    def backward(self, grad_out):
        x, b = self._pop_cache()
        m, n, d = self.params["coeffs"].shape
        self.grads["coeffs"] += matmul(grad_out.T, b).reshape(m, n, d)
        if not self.needs_input_grad:
            return None
        gb = matmul(grad_out, self.params["coeffs"].reshape(m, -1)).reshape(-1, n, d)
        return check_finite(np.einsum("rnd,rnd->rn", gb, chebyshev_derivative(x, d)), "LA input gradient")
