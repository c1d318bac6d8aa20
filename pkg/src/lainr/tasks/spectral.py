"""Rounded multi-tone probe signal and frequency-resolved error tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lainr.errors import DomainError, NumericalError, ShapeError
from lainr.numerics import round_half_away

MAJOR_FREQUENCIES = (3 * math.pi, 5 * math.pi, 7 * math.pi, 9 * math.pi)
PROBE_SAMPLES = 300


def spectral_probe_signal(x):
    """``2 * round((sin 3πx + sin 5πx + sin 7πx + sin 9πx) / 2)``, ties rounded away from zero."""
    x = np.asarray(x, dtype=np.float64)
    total = sum(np.sin(w * x) for w in MAJOR_FREQUENCIES)
    return 2.0 * round_half_away(total / 2.0)


def probe_grid(samples=PROBE_SAMPLES):
    return np.linspace(-1.0, 1.0, samples)


def dft(signal):
    """One-sided DFT ``F[k] = sum_n x[n] exp(-2πi kn/N)`` for k = 0..N//2."""
    return np.fft.rfft(np.asarray(signal, dtype=np.float64))


def frequency_bins(frequencies, n, spacing):
    """Nearest DFT bin for each angular frequency (rad per unit) given the sample spacing."""
    return [int(round(w / (2.0 * math.pi) * n * spacing)) for w in frequencies]


def frequency_error(pred, ref, frequencies=MAJOR_FREQUENCIES, spacing=None):
    """Relative DFT error ``|F[pred](k) - F[ref](k)| / |F[ref](k)|`` at each probed bin.

    ``spacing`` defaults to that of the standard probe grid for the signal length.
    """
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    ref = np.asarray(ref, dtype=np.float64).reshape(-1)
    if pred.shape != ref.shape:
        raise ShapeError(f"frequency_error length mismatch: {pred.size} vs {ref.size}")
    n = ref.size
    if spacing is None:
        spacing = 2.0 / (n - 1)
    fp, fr = dft(pred), dft(ref)
    errs = []
    for k in frequency_bins(frequencies, n, spacing):
        denom = abs(fr[k])
        if denom < 1e-12:
            raise DomainError(f"reference spectrum vanishes at bin {k}")
        errs.append(abs(fp[k] - fr[k]) / denom)
    return np.array(errs)


@dataclass
class SpectralTable:
    """Steps x frequencies relative-error matrix for one model."""

    name: str
    steps: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    frequencies: tuple = MAJOR_FREQUENCIES
    report: object = None

    @property
    def matrix(self):
        return np.array(self.errors).reshape(len(self.steps), len(self.frequencies))

    def ratio(self, hi=-1, lo=0):
        """Per-step ratio of the error at frequency index ``hi`` to that at ``lo``."""
        m = self.matrix
        return m[:, hi] / m[:, lo]


def run_spectral_experiment(specs, cfg, samples=PROBE_SAMPLES):
    """Train each model spec on the probe signal, logging per-frequency errors.

    ``specs`` maps a label to a ModelSpec; ``cfg`` is a TrainConfig whose
    ``log_every`` sets the step cadence (full batch: one step per epoch).
    Returns ``{label: SpectralTable}``; each table keeps its TrainReport.
    """
    from lainr.models import build
    from lainr.tasks.builders import make_spectral_task
    from lainr.training import fit

    task = make_spectral_task(samples)
    ref = task.train_targets[:, 0]
    tables = {}
    for label, spec in specs.items():
        table = SpectralTable(name=label)

        def log(record, net, table=table):
            pred = net.predict(task.train_coords)[:, 0]
            table.steps.append(record.epoch)
            table.errors.append(frequency_error(pred, ref))

        try:
            table.report = fit(build(spec), task, cfg, progress=log)
        except NumericalError as exc:
            raise NumericalError(f"spectral run {label!r} diverged: {exc}") from exc
        tables[label] = table
    return tables
