"""File formats: Netpbm images (PGM/PPM) and a small binary grid container.

Images load as float64 arrays scaled to [0, 1], shape (H, W) for graymaps and
(H, W, 3) for pixmaps. Binary (P5/P6) and ASCII (P2/P3) variants are read;
saving writes binary with maxval 255 (8-bit) or 65535 (16-bit, big-endian).

Grid files (``.grid``) hold an N-d array::

    LAINR-GRID 1 <dtype> <d0> <d1> ... <dk>\\n
    <raw little-endian row-major data>

``dtype`` is one of ``float64``, ``float32``, ``uint8``.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from lainr.errors import ConfigError, ParseError

_PNM_MAGIC = {b"P2": (1, False), b"P3": (3, False), b"P5": (1, True), b"P6": (3, True)}
GRID_MAGIC = "LAINR-GRID"
GRID_VERSION = 1
_GRID_DTYPES = {"float64": "<f8", "float32": "<f4", "uint8": "u1"}


def _pnm_tokens(data, count, pos):
    """Read ``count`` whitespace-separated header integers, skipping comments."""
    values = []
    n = len(data)
    while len(values) < count:
        while pos < n and (data[pos : pos + 1].isspace() or data[pos : pos + 1] == b"#"):
            if data[pos : pos + 1] == b"#":
                while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ParseError("expected an unsigned integer in header", offset=start)
        values.append(int(data[start:pos]))
    return values, pos


def decode_pnm(data):
    if len(data) < 2 or data[:2] not in _PNM_MAGIC:
        raise ParseError(f"bad magic number {data[:2]!r}, expected P2/P3/P5/P6", offset=0)
    channels, binary = _PNM_MAGIC[data[:2]]
    (width, height, maxval), pos = _pnm_tokens(data, 3, 2)
    if width < 1 or height < 1:
        raise ParseError("image dimensions must be positive", offset=2)
    if not 0 < maxval < 65536:
        raise ParseError(f"maxval {maxval} out of range", offset=pos)
    count = width * height * channels
    if binary:
        if pos >= len(data) or not data[pos : pos + 1].isspace():
            raise ParseError("missing whitespace after header", offset=pos)
        pos += 1
        dtype = ">u2" if maxval > 255 else "u1"
        nbytes = count * np.dtype(dtype).itemsize
        if len(data) - pos < nbytes:
            raise ParseError(f"truncated raster: need {nbytes} bytes, have {len(data) - pos}", offset=pos)
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.float64)
    else:
        body = data[pos:]
        tokens = body.split()
        if len(tokens) < count:
            raise ParseError(f"truncated raster: need {count} samples, have {len(tokens)}", offset=len(data))
        try:
            raw = np.array([int(t) for t in tokens[:count]], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"non-integer sample ({exc})", offset=pos) from exc
    if raw.max(initial=0) > maxval:
        raise ParseError(f"sample exceeds maxval {maxval}", offset=pos)
    img = raw / maxval
    return img.reshape(height, width) if channels == 1 else img.reshape(height, width, 3)


def load_image(path):
    return decode_pnm(Path(path).read_bytes())


def encode_pnm(image, bit_depth=16):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ConfigError(f"cannot encode image of shape {img.shape}")
    if bit_depth not in (8, 16):
        raise ConfigError("bit_depth must be 8 or 16", fields=["bit_depth"])
    maxval = 255 if bit_depth == 8 else 65535
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    raster = q.astype(">u2" if bit_depth == 16 else "u1").tobytes()
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n{maxval}\n".encode("ascii") + raster


def save_image(image, path, bit_depth=16):
    path = Path(path)
    path.write_bytes(encode_pnm(image, bit_depth))
    return path


def save_grid(array, path, dtype="float64"):
    if dtype not in _GRID_DTYPES:
        raise ConfigError(f"unsupported grid dtype {dtype!r}", fields=["dtype"])
    a = np.asarray(array)
    header = f"{GRID_MAGIC} {GRID_VERSION} {dtype} {' '.join(str(d) for d in a.shape)}\n"
    path = Path(path)
    path.write_bytes(header.encode("ascii") + a.astype(_GRID_DTYPES[dtype]).tobytes())
    return path


_GRID_HEADER = re.compile(rb"^(\S+) (\d+) (\S+)((?: \d+)+)\n")


def load_grid(path):
    data = Path(path).read_bytes()
    m = _GRID_HEADER.match(data[:4096])
    if not m or m.group(1).decode() != GRID_MAGIC:
        raise ParseError("not a grid file (bad header)", offset=0)
    if int(m.group(2)) != GRID_VERSION:
        raise ParseError(f"unsupported grid version {int(m.group(2))}", offset=m.start(2))
    dtype = m.group(3).decode()
    if dtype not in _GRID_DTYPES:
        raise ParseError(f"unsupported dtype {dtype!r}", offset=m.start(3))
    dims = tuple(int(d) for d in m.group(4).split())
    dt = np.dtype(_GRID_DTYPES[dtype])
    pos = m.end()
    need = int(np.prod(dims)) * dt.itemsize
    if len(data) - pos != need:
        raise ParseError(f"payload is {len(data) - pos} bytes, header implies {need}", offset=pos)
    return np.frombuffer(data, dtype=dt, offset=pos).reshape(dims).astype(np.float64)
