"""Pixel/voxel-center coordinate grids normalized to [-1, 1] per axis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AxisMap:
    """Affine map between pixel index ``i`` and coordinate ``scale * i + offset``.

    For ``size`` pixels the centers land at ``-1 + (2i + 1) / size``.
    """

    size: int

    @property
    def scale(self):
        return 2.0 / self.size

    @property
    def offset(self):
        return -1.0 + 1.0 / self.size

    def normalize(self, index):
        return np.asarray(index, dtype=np.float64) * self.scale + self.offset

    def denormalize(self, coord):
        return (np.asarray(coord, dtype=np.float64) - self.offset) / self.scale


def axis_coords(size):
    return AxisMap(size).normalize(np.arange(size))


def grid_coords(shape, indices=None):
    """Row-major coordinates for a grid of the given shape.

    Column ``k`` holds the normalized index along axis ``k`` (row, then column,
    then depth). ``indices`` optionally gives per-axis index subsets, still
    normalized with the full-grid map so sub-grids align exactly.
    """
    maps = [AxisMap(s) for s in shape]
    if indices is None:
        indices = [np.arange(s) for s in shape]
    axes = [m.normalize(ix) for m, ix in zip(maps, indices)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)
