"""Built-in test signals: structured images, a CT phantom and binary volumes."""

from __future__ import annotations

import numpy as np

from lainr.errors import ConfigError
from lainr.tasks.grid import axis_coords


def _xy(size):
    a = axis_coords(size)
    return np.meshgrid(a, a, indexing="ij")  # (row, col)


def structured_image(size=64):
    """Checkerboard, smooth gradient and fine stripes mixed per channel, values in [0, 1]."""
    r, c = _xy(size)
    rows, cols = np.indices((size, size))
    checker = ((rows // 8 + cols // 8) % 2).astype(np.float64)
    gradient = 0.5 * (r + c) * 0.5 + 0.5
    stripes = 0.5 + 0.5 * np.sin(2.0 * np.pi * cols / 4.0 + np.pi / 4.0) * (rows >= size // 2)
    red = 0.6 * checker + 0.4 * gradient
    green = 0.5 * gradient + 0.5 * stripes
    blue = np.where(rows < size // 2, checker, stripes) * 0.7 + 0.3 * (1.0 - gradient)
    return np.clip(np.stack([red, green, blue], axis=-1), 0.0, 1.0)


def rings_image(size=64):
    """Zone plate with rising radial frequency plus a colour tint."""
    r, c = _xy(size)
    rad2 = r * r + c * c
    zone = 0.5 + 0.5 * np.cos(0.5 * np.pi * size * rad2 / 2.0)
    return np.clip(np.stack([zone, 0.5 * zone + 0.5 * (r + 1) / 2, 1.0 - zone * 0.8], axis=-1), 0.0, 1.0)


def shapes_image(size=64):
    """Flat-coloured disc, square and triangle on a soft background (sharp edges)."""
    r, c = _xy(size)
    img = np.empty((size, size, 3))
    img[...] = np.stack([0.2 + 0.1 * c, 0.3 + 0.1 * r, np.full_like(r, 0.4)], axis=-1)
    disc = (r + 0.35) ** 2 + (c + 0.35) ** 2 < 0.3**2
    square = (np.abs(r - 0.35) < 0.25) & (np.abs(c + 0.3) < 0.25)
    tri = (r > -0.6) & (c > 0.1) & (r + 0.5 * (c - 0.1) < 0.1) & (c < 0.9)
    img[disc] = (0.9, 0.2, 0.1)
    img[square] = (0.1, 0.8, 0.3)
    img[tri] = (0.95, 0.95, 0.2)
    return np.clip(img, 0.0, 1.0)


def checkerboard(size=64, square=8):
    rows, cols = np.indices((size, size))
    return ((rows // square + cols // square) % 2).astype(np.float64)


def gradient_image(size=64):
    r, c = _xy(size)
    return 0.25 * (r + c) + 0.5


# (value, semi-axis a, semi-axis b, center x, center y, angle in degrees)
_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def shepp_logan(size=64):
    """Modified Shepp-Logan head phantom (higher-contrast variant), values in [0, 1]."""
    a = axis_coords(size)
    y, x = np.meshgrid(-a, a, indexing="ij")  # y points up
    img = np.zeros((size, size))
    for val, ea, eb, cx, cy, deg in _SHEPP_LOGAN:
        t = np.deg2rad(deg)
        xr = (x - cx) * np.cos(t) + (y - cy) * np.sin(t)
        yr = -(x - cx) * np.sin(t) + (y - cy) * np.cos(t)
        img[(xr / ea) ** 2 + (yr / eb) ** 2 <= 1.0] += val
    return np.clip(img, 0.0, 1.0)


def gaussian_phantom(size=64, sigma=0.2):
    """Isotropic Gaussian blob centred in the grid; ``sigma`` in normalized units."""
    r, c = _xy(size)
    return np.exp(-(r * r + c * c) / (2.0 * sigma * sigma))


def sphere_volume(size=64, radius=0.5):
    a = axis_coords(size)
    x, y, z = np.meshgrid(a, a, a, indexing="ij")
    return (x * x + y * y + z * z <= radius * radius).astype(np.float64)


def torus_volume(size=64, major=0.5, minor=0.2):
    a = axis_coords(size)
    x, y, z = np.meshgrid(a, a, a, indexing="ij")
    q = np.sqrt(x * x + y * y) - major
    return (q * q + z * z <= minor * minor).astype(np.float64)


IMAGES = {
    "structured": structured_image,
    "rings": rings_image,
    "shapes": shapes_image,
    "checkerboard": checkerboard,
    "gradient": gradient_image,
}
PHANTOMS = {"shepp-logan": shepp_logan, "gaussian": gaussian_phantom}
VOLUMES = {"sphere": sphere_volume, "torus": torus_volume}


def builtin(kind, name, size):
    table = {"image": IMAGES, "phantom": PHANTOMS, "volume": VOLUMES}[kind]
    if name not in table:
        raise ConfigError(f"unknown built-in {kind} {name!r}; choose from {sorted(table)}", fields=[kind])
    return table[name](size)
