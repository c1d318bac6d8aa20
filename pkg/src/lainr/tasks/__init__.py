"""Task builders, measurement operators and the spectral-bias probe."""

from lainr.tasks.builders import (
    IdentityOperator,
    MaskOperator,
    TaskInstance,
    downsample,
    make_ct_task,
    make_image_task,
    make_inpainting_task,
    make_occupancy_task,
    make_spectral_task,
    make_superres_task,
)
from lainr.tasks.grid import AxisMap, axis_coords, grid_coords
from lainr.tasks.radon import RadonOperator, radon_forward
from lainr.tasks.spectral import (
    MAJOR_FREQUENCIES,
    SpectralTable,
    dft,
    frequency_error,
    probe_grid,
    run_spectral_experiment,
    spectral_probe_signal,
)

__all__ = [
    "AxisMap",
    "IdentityOperator",
    "MAJOR_FREQUENCIES",
    "MaskOperator",
    "RadonOperator",
    "SpectralTable",
    "TaskInstance",
    "axis_coords",
    "dft",
    "downsample",
    "frequency_error",
    "grid_coords",
    "make_ct_task",
    "make_image_task",
    "make_inpainting_task",
    "make_occupancy_task",
    "make_spectral_task",
    "make_superres_task",
    "probe_grid",
    "radon_forward",
    "run_spectral_experiment",
    "spectral_probe_signal",
]
