"""Task instances: coordinates, targets, a measurement operator and an evaluation metric."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from lainr.errors import ConfigError, ShapeError
from lainr.metrics import iou, psnr, ssim
from lainr.numerics import Rng
from lainr.tasks.grid import AxisMap, grid_coords
from lainr.tasks.radon import RadonOperator
from lainr.tasks.spectral import PROBE_SAMPLES, frequency_error, probe_grid, spectral_probe_signal

log = logging.getLogger(__name__)

HIGHER_IS_BETTER = {"psnr": True, "ssim": True, "iou": True, "spectral": False}


class IdentityOperator:
    pointwise = True
    tag = "identity"

    def forward(self, pred):
        return pred

    def backward(self, grad):
        return grad


class MaskOperator:
    """Keeps the rows listed in ``kept`` (row-major pixel indices)."""

    pointwise = False
    tag = "mask"

    def __init__(self, kept, num_rows):
        self.kept = np.asarray(kept, dtype=np.int64)
        self.num_rows = num_rows

    def forward(self, pred):
        if pred.shape[0] != self.num_rows:
            raise ShapeError(f"mask expects {self.num_rows} rows, got {pred.shape[0]}")
        return pred[self.kept]

    def backward(self, grad):
        full = np.zeros((self.num_rows, grad.shape[1]))
        full[self.kept] = grad
        return full


@dataclass
class TaskInstance:
    name: str
    train_coords: np.ndarray
    train_targets: np.ndarray
    eval_coords: np.ndarray
    eval_targets: np.ndarray
    grid_shape: tuple
    metric: str = "psnr"
    operator: object = field(default_factory=IdentityOperator)
    axis_maps: tuple = ()
    data: dict = field(default_factory=dict)

    @property
    def higher_is_better(self):
        return HIGHER_IS_BETTER[self.metric]

    @property
    def input_dim(self):
        return self.train_coords.shape[1]

    @property
    def output_dim(self):
        return self.eval_targets.shape[1]

    def render(self, net):
        return net.predict(self.eval_coords).reshape(self.grid_shape)

    def reference(self):
        return self.eval_targets.reshape(self.grid_shape)

    def evaluate(self, net):
        pred = self.render(net)
        ref = self.reference()
        if self.metric == "psnr":
            return psnr(np.clip(pred, 0.0, 1.0), ref)
        if self.metric == "iou":
            return iou(pred, ref, threshold=0.5)
        if self.metric == "spectral":
            return float(np.mean(frequency_error(pred, ref)))
        raise ConfigError(f"unknown metric {self.metric!r}")

    def extras(self, net):
        """Secondary metrics for the run summary."""
        out = {}
        if self.metric != "psnr":
            return out
        pred = np.clip(self.render(net), 0.0, 1.0)
        ref = self.reference()
        if min(ref.shape[:2]) >= 11:
            out["ssim"] = ssim(pred, ref)
        held = self.data.get("held_out")
        if held is not None and held.size:
            flat_p = pred.reshape(-1, self.output_dim)
            out["psnr_held_out"] = psnr(flat_p[held], self.eval_targets[held])
        return out


def _as_image(image):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    if img.ndim != 3 or img.size == 0:
        raise ShapeError(f"image must be non-empty (H, W) or (H, W, C), got shape {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ConfigError("image values must lie in [0, 1]")
    return img


def make_image_task(image):
    img = _as_image(image)
    h, w, c = img.shape
    coords = grid_coords((h, w))
    targets = img.reshape(-1, c)
    return TaskInstance(
        "image", coords, targets, coords, targets, img.shape,
        axis_maps=(AxisMap(h), AxisMap(w)),
    )


def box_weights(size, factor):
    """(size/factor, size) matrix of a width-``factor`` box centred on pixel ``factor*j + factor//2``.

    Odd factors average ``factor`` whole pixels; even factors take the
    ``factor - 1`` inner pixels at full weight and the two boundary pixels at
    half weight. Out-of-range taps are clamped to the edge.
    """
    n = size // factor
    w = np.zeros((n, size))
    for j in range(n):
        centre = factor * j + factor // 2
        if factor % 2:
            taps = [(centre + k, 1.0) for k in range(-(factor // 2), factor // 2 + 1)]
        else:
            half = factor // 2
            taps = [(centre + k, 1.0) for k in range(-half + 1, half)]
            taps += [(centre - half, 0.5), (centre + half, 0.5)]
        for p, wt in taps:
            w[j, min(max(p, 0), size - 1)] += wt / factor
    return w


def downsample(image, factor):
    img = _as_image(image)
    h, w, _ = img.shape
    if factor < 1 or h % factor or w % factor:
        raise ConfigError(f"factor {factor} must divide image dimensions {h}x{w}", fields=["factor"])
    wr, wc = box_weights(h, factor), box_weights(w, factor)
    return np.einsum("ih,hwc,jw->ijc", wr, img, wc)


def make_superres_task(image, factor):
    """Train on the box-downsampled image, evaluate on the full grid.

    Low-res pixel ``j`` is placed at the full-grid coordinate of pixel
    ``factor*j + factor//2``, so training coordinates are an exact subset of
    the evaluation coordinates.
    """
    img = _as_image(image)
    h, w, c = img.shape
    low = downsample(img, factor)
    sub = [factor * np.arange(s // factor) + factor // 2 for s in (h, w)]
    train = grid_coords((h, w), indices=sub)
    coords = grid_coords((h, w))
    return TaskInstance(
        "superres", train, low.reshape(-1, c), coords, img.reshape(-1, c), img.shape,
        axis_maps=(AxisMap(h), AxisMap(w)),
        data={"factor": factor, "low_res": low},
    )


def make_inpainting_task(image, keep_fraction, rng=None, max_tries=100):
    """Independent Bernoulli(keep_fraction) pixel mask; train on kept pixels only."""
    img = _as_image(image)
    if not 0.0 < keep_fraction <= 1.0:
        raise ConfigError("keep_fraction must lie in (0, 1]", fields=["keep_fraction"])
    h, w, c = img.shape
    rng = rng or Rng(0)
    for attempt in range(max_tries):
        mask = rng.bernoulli(keep_fraction, h * w)
        if mask.any():
            break
        log.warning("inpainting mask dropped every pixel (attempt %d); resampling", attempt + 1)
    else:
        raise ConfigError("could not draw a non-empty inpainting mask", fields=["keep_fraction"])
    kept = np.flatnonzero(mask)
    held = np.flatnonzero(~mask)
    coords = grid_coords((h, w))
    targets = img.reshape(-1, c)
    return TaskInstance(
        "inpaint", coords, targets[kept], coords, targets, img.shape,
        operator=MaskOperator(kept, h * w),
        axis_maps=(AxisMap(h), AxisMap(w)),
        data={"kept": kept, "held_out": held, "mask": mask.reshape(h, w)},
    )


def make_ct_task(phantom, num_angles, step=0.5):
    """Fit the image through its sinogram; PSNR is measured against the phantom."""
    ph = np.asarray(phantom, dtype=np.float64)
    if ph.ndim != 2 or ph.shape[0] != ph.shape[1]:
        raise ShapeError(f"phantom must be square 2-D, got {ph.shape}")
    side = ph.shape[0]
    op = RadonOperator(side, num_angles, step=step)
    sino = op.forward(ph.reshape(-1, 1))
    coords = grid_coords((side, side))
    return TaskInstance(
        "ct", coords, sino, coords, ph.reshape(-1, 1), (side, side),
        operator=op,
        axis_maps=(AxisMap(side), AxisMap(side)),
        data={"sinogram": sino.reshape(op.sinogram_shape)},
    )


def make_occupancy_task(volume):
    vol = np.asarray(volume, dtype=np.float64)
    if vol.ndim != 3:
        raise ShapeError(f"volume must be 3-D, got {vol.shape}")
    if not np.all((vol == 0.0) | (vol == 1.0)):
        raise ConfigError("occupancy volume must be binary (0/1)")
    coords = grid_coords(vol.shape)
    targets = vol.reshape(-1, 1)
    return TaskInstance(
        "occupancy", coords, targets, coords, targets, vol.shape, metric="iou",
        axis_maps=tuple(AxisMap(s) for s in vol.shape),
    )


def make_spectral_task(samples=PROBE_SAMPLES):
    x = probe_grid(samples).reshape(-1, 1)
    y = spectral_probe_signal(x)
    return TaskInstance("spectral", x, y, x, y, (samples,), metric="spectral")
