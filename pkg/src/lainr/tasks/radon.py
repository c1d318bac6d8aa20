"""Parallel-beam Radon transform with bilinear sampling, as a linear operator.

Geometry, in pixel units with the origin at the image centre: pixel ``(r, c)``
sits at ``x = c - (side-1)/2``, ``y = r - (side-1)/2``. For angle ``theta`` and
detector offset ``t`` the ray is ``t (cos, sin) + s (-sin, cos)``; the
line integral is the sum of bilinear samples (zero outside the grid) at
``s = k * step`` for integer ``k`` covering the grid diagonal, times ``step``.
Detector bins sit at unit spacing centred on the origin.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse

from lainr.errors import ConfigError, ShapeError


class RadonOperator:
    pointwise = False
    tag = "radon"

    def __init__(self, side, num_angles, num_bins=None, step=0.5):
        if side < 1 or num_angles < 1:
            raise ConfigError("radon side and num_angles must be positive")
        if not 0 < step <= 0.5:
            raise ConfigError("radon sampling step must lie in (0, 0.5] pixels", fields=["step"])
        self.side = side
        self.num_angles = num_angles
        self.num_bins = side if num_bins is None else num_bins
        self.step = step
        self.angles = np.arange(num_angles) * (math.pi / num_angles)
        self.matrix = self._assemble()

    @property
    def sinogram_shape(self):
        return (self.num_angles, self.num_bins)

    def _assemble(self):
        side, nb, h = self.side, self.num_bins, self.step
        half = (side - 1) / 2.0
        t = np.arange(nb) - (nb - 1) / 2.0
        reach = math.sqrt(2.0) * side / 2.0 + 1.0
        k = math.ceil(reach / h)
        s = np.arange(-k, k + 1) * h
        blocks = []
        for theta in self.angles:
            ct, st = math.cos(theta), math.sin(theta)
            # continuous (row, col) positions, shape (bins, samples)
            px = t[:, None] * ct - s[None, :] * st + half
            py = t[:, None] * st + s[None, :] * ct + half
            c0 = np.floor(px)
            r0 = np.floor(py)
            fc, fr = px - c0, py - r0
            c0 = c0.astype(np.int64)
            r0 = r0.astype(np.int64)
            rows_out = np.broadcast_to(np.arange(nb)[:, None], px.shape)
            ri, ci, wi, oi = [], [], [], []
            for dr, dc, w in ((0, 0, (1 - fr) * (1 - fc)), (0, 1, (1 - fr) * fc),
                              (1, 0, fr * (1 - fc)), (1, 1, fr * fc)):
                rr, cc = r0 + dr, c0 + dc
                ok = (rr >= 0) & (rr < side) & (cc >= 0) & (cc < side) & (w > 0)
                ri.append(rr[ok])
                ci.append(cc[ok])
                wi.append(w[ok])
                oi.append(rows_out[ok])
            cols = np.concatenate(ri) * side + np.concatenate(ci)
            block = sparse.coo_matrix(
                (np.concatenate(wi) * h, (np.concatenate(oi), cols)), shape=(nb, side * side)
            ).tocsr()
            blocks.append(block)
        return sparse.vstack(blocks, format="csr")

    def forward(self, pixels):
        """Project row-major pixel values ``(side*side, C)`` to ``(angles*bins, C)``."""
        if pixels.shape[0] != self.side * self.side:
            raise ShapeError(f"radon expects {self.side * self.side} pixel rows, got {pixels.shape[0]}")
        return np.asarray(self.matrix @ pixels)

    def backward(self, grad_meas):
        """Adjoint: scatter sinogram-space values back onto pixels."""
        if grad_meas.shape[0] != self.matrix.shape[0]:
            raise ShapeError(f"radon adjoint expects {self.matrix.shape[0]} rows, got {grad_meas.shape[0]}")
        return np.asarray(self.matrix.T @ grad_meas)

    adjoint = backward


def radon_forward(op, image):
    """Sinogram ``(num_angles, num_bins)`` of a square ``(side, side)`` image."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (op.side, op.side):
        raise ShapeError(f"image shape {image.shape} does not match radon grid side {op.side}")
    return op.forward(image.reshape(-1, 1)).reshape(op.sinogram_shape)
