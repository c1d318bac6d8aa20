"""Dense float64 matrix helpers, a reproducible RNG and a finite-difference gradient checker.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. The helpers
here add the shape and finiteness checks the rest of the package relies on.

Random numbers come from the Philox-4x64 counter-based generator (10 rounds)
keyed directly by the 64-bit seed, counter starting at zero. Only the raw
64-bit output of Philox is taken from numpy; every derived distribution
(uniform, normal, permutation, Bernoulli) is computed here so the stream does
not depend on numpy's distribution code:

* uniform: ``(raw >> 11) * 2**-53`` in ``[0, 1)``
* normal: Box-Muller on pairs of uniforms, cosine branch then sine branch
* permutation: stable argsort of raw draws
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lainr.errors import ConfigError, NumericalError, ShapeError

_TWO_POW_M53 = 2.0**-53


def as_matrix(x, name="matrix"):
    """Return ``x`` as a C-contiguous 2-D float64 array."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def check_finite(a, what="value"):
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"non-finite entries in {what}")
    return a


def identity(n):
    return np.eye(n, dtype=np.float64)


def matmul(a, b):
    """Matrix product with a shape check and a finiteness check on the result."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    return check_finite(out, "matmul result")


def hadamard(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"hadamard shape mismatch: {a.shape} vs {b.shape}")
    return check_finite(a * b, "hadamard result")


def round_half_away(x):
    """Round to the nearest integer, ties away from zero (numpy rounds ties to even)."""
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def elementwise(tag, a, param=None):
    """Apply a named scalar function entrywise.

    ``tag`` is one of ``relu``, ``tanh``, ``sine``, ``gaussian``, ``round``.
    ``param`` is the frequency for ``sine`` (default 1) and the spread for
    ``gaussian`` (default 1).
    """
    a = np.asarray(a, dtype=np.float64)
    if tag == "relu":
        out = np.maximum(a, 0.0)
    elif tag == "tanh":
        out = np.tanh(a)
    elif tag == "sine":
        out = np.sin((1.0 if param is None else param) * a)
    elif tag == "gaussian":
        s = 1.0 if param is None else param
        out = np.exp(-((s * a) ** 2))
    elif tag == "round":
        out = round_half_away(a)
    else:
        raise ConfigError(f"unknown elementwise op {tag!r}", fields=["op"])
    return check_finite(out, f"{tag} result")


class Rng:
    """Deterministic generator built on Philox-4x64 raw output."""

    def __init__(self, seed=0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._bitgen = np.random.Philox(key=self.seed, counter=0)

    def raw(self, n):
        return self._bitgen.random_raw(int(n))

    def uniform(self, low=0.0, high=1.0, size=1):
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53
        return (low + (high - low) * u).reshape(shape)

    def normal(self, mean=0.0, std=1.0, size=1):
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape))
        half = (n + 1) // 2
        u = self.uniform(size=2 * half)
        r = np.sqrt(-2.0 * np.log1p(-u[:half]))  # 1 - u lies in (0, 1]
        theta = 2.0 * np.pi * u[half:]
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return (mean + std * z).reshape(shape)

    def permutation(self, n):
        return np.argsort(self.raw(n), kind="stable")

    def bernoulli(self, p, size=1):
        return self.uniform(size=size) < p

    def spawn(self, offset):
        """Independent child generator keyed from this seed and ``offset``."""
        return Rng((self.seed * 0x9E3779B97F4A7C15 + int(offset) + 1) & 0xFFFFFFFFFFFFFFFF)


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    per_tensor: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance


def _rel_error(analytic, numeric):
    na = float(np.linalg.norm(analytic))
    nn = float(np.linalg.norm(numeric))
    diff = float(np.linalg.norm(analytic - numeric))
    scale = max(na, nn)
    if scale == 0.0:
        return 0.0
    return diff / max(scale, 1e-300)


def gradient_check(layer, x, step=1e-5, tolerance=1e-4, seed=0, check_input=True):
    """Compare analytic gradients of ``layer`` with central differences.

    The probe loss is ``sum(layer.forward(x) * R)`` for a fixed random ``R``, so
    its gradient with respect to the output is exactly ``R``. The error for
    each tensor is ``|g_a - g_n| / max(|g_a|, |g_n|)`` in the Frobenius norm;
    the report holds the worst one.
    """
    if step <= 0:
        raise ConfigError("gradient_check step must be positive", fields=["step"])
    x = as_matrix(x, "input").copy()
    out = layer.forward(x)
    probe = Rng(seed).normal(size=out.shape)

    layer.zero_grad()
    layer.forward(x)
    grad_in = layer.backward(probe)
    analytic = {name: g.copy() for name, g in layer.grads.items()}
    for name, g in analytic.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite analytic gradient for {name!r}")

    def loss():
        return float(np.sum(layer.forward(x) * probe))

    per_tensor = {}
    for name, p in layer.params.items():
        numeric = np.zeros_like(p)
        flat, nflat = p.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss()
            flat[i] = orig - step
            down = loss()
            flat[i] = orig
            nflat[i] = (up - down) / (2.0 * step)
        per_tensor[name] = _rel_error(analytic[name], numeric)

    if check_input:
        if grad_in is None:
            raise NumericalError("layer returned no input gradient")
        if not np.all(np.isfinite(grad_in)):
            raise NumericalError("non-finite analytic input gradient")
        numeric = np.zeros_like(x)
        flat, nflat = x.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss()
            flat[i] = orig - step
            down = loss()
            flat[i] = orig
            nflat[i] = (up - down) / (2.0 * step)
        per_tensor["input"] = _rel_error(grad_in, numeric)

    layer.zero_grad()
    worst = max(per_tensor.values()) if per_tensor else 0.0
    return GradCheckReport(max_rel_error=worst, tolerance=tolerance, per_tensor=per_tensor)
