"""Experiment orchestration: build task and model, train, write artifacts."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from lainr import plotting
from lainr.config import RunConfig, build_config
from lainr.errors import ConfigError
from lainr.io import load_grid, load_image, save_grid, save_image
from lainr.models import build, count_params, save_checkpoint
from lainr.numerics import Rng
from lainr.tasks import (
    MAJOR_FREQUENCIES,
    make_ct_task,
    make_image_task,
    make_inpainting_task,
    make_occupancy_task,
    make_superres_task,
    run_spectral_experiment,
)
from lainr.tasks.synthetic import IMAGES, PHANTOMS, VOLUMES
from lainr.training import BATCH_GRID, LR_GRID, fit, grid_search

log = logging.getLogger(__name__)


def _load_image_source(name, size, grayscale=False):
    if name in IMAGES:
        img = IMAGES[name](size)
    elif name in PHANTOMS:
        img = PHANTOMS[name](size)
    elif Path(name).suffix == ".grid":
        img = load_grid(name)
    else:
        if not Path(name).exists():
            raise ConfigError(f"no built-in or file named {name!r}", fields=["task.image"])
        img = load_image(name)
    if grayscale and img.ndim == 3:
        img = img.mean(axis=2)
    return img


def _image_channels(cfg):
    if cfg.task.kind not in ("fit-image", "superres", "inpaint"):
        return None
    img = _load_image_source(cfg.task.image, cfg.task.size)
    return 1 if img.ndim == 2 else img.shape[2]


def resolve_config(data=None, overrides=None):
    """Build a RunConfig, matching the model output width to the input image."""
    cfg = build_config(data, overrides)
    explicit = "output_dim" in ((data or {}).get("model") or {}) or "model.output_dim" in (overrides or {})
    channels = _image_channels(cfg)
    if channels is not None and not explicit and channels != cfg.model.output_dim:
        cfg = replace(cfg, model=replace(cfg.model, output_dim=channels))
    return cfg


def load_task(cfg):
    t = cfg.task
    if t.kind in ("fit-image", "superres", "inpaint"):
        img = _load_image_source(t.image, t.size)
        if t.kind == "fit-image":
            return make_image_task(img)
        if t.kind == "superres":
            return make_superres_task(img, t.factor)
        return make_inpainting_task(img, t.keep_fraction, Rng(cfg.seed).spawn(101))
    if t.kind == "ct":
        return make_ct_task(_load_image_source(t.phantom, t.size, grayscale=True), t.num_angles)
    if t.kind == "occupancy":
        if t.volume in VOLUMES:
            vol = VOLUMES[t.volume](t.size)
        else:
            vol = load_grid(t.volume)
        return make_occupancy_task(vol)
    raise ConfigError(f"task {t.kind!r} has no single-model task instance", fields=["task.kind"])


def prepare_output_dir(cfg):
    out = cfg.resolved_output_dir()
    if out.exists() and any(out.iterdir()) and not cfg.overwrite:
        raise ConfigError(f"output directory {out} is not empty; pass --overwrite to replace it",
                          fields=["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _save_reconstruction(task, recon, out):
    paths = []
    if task.name == "occupancy":
        paths.append(save_grid(recon, out / "reconstruction.grid"))
        paths.append(save_grid(task.reference(), out / "reference.grid", dtype="uint8"))
        return paths
    img = np.clip(recon, 0.0, 1.0)
    if img.ndim == 3 and img.shape[2] not in (1, 3):
        return paths
    suffix = ".ppm" if img.ndim == 3 and img.shape[2] == 3 else ".pgm"
    paths.append(save_image(img, out / f"reconstruction{suffix}"))
    paths.append(plotting.save_preview(img, out / "reconstruction.png"))
    return paths


def run(cfg: RunConfig):
    """Run one experiment; returns (output directory, summary dict)."""
    out = prepare_output_dir(cfg)
    (out / "config.yaml").write_text(cfg.to_yaml())
    if cfg.task.kind == "spectral":
        return out, _run_spectral(cfg, out)

    task = load_task(cfg)
    if task.input_dim != cfg.model.input_dim or task.output_dim != cfg.model.output_dim:
        raise ConfigError(
            f"model dims ({cfg.model.input_dim}->{cfg.model.output_dim}) do not match task "
            f"({task.input_dim}->{task.output_dim})", fields=["model.input_dim", "model.output_dim"])
    net = build(cfg.model)
    report = fit(net, task, cfg.train)
    (out / "report.csv").write_text(report.to_csv(include_time=cfg.record_time))

    if report.best_state is not None:
        net.load_state_dict(report.best_state)
    recon = task.render(net)
    _save_reconstruction(task, recon, out)
    save_checkpoint(net, out / "checkpoint.npz")
    curve = report.metric_curve()
    plotting.save_convergence({cfg.model.architecture: (curve[:, 0], curve[:, 1])},
                              out / "convergence.png", ylabel=task.metric)
    summary = {
        "task": cfg.task.kind,
        "architecture": cfg.model.architecture,
        "param_count": count_params(net),
        "seed": cfg.seed,
        **report.summary(),
        "extras": task.extras(net),
    }
    _write_json(out / "summary.json", summary)
    return out, summary


def error_matrix_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step"] + [f"{f / np.pi:g}pi" for f in table.frequencies])
    for step, row in zip(table.steps, table.matrix):
        w.writerow([step] + [repr(float(v)) for v in row])
    return buf.getvalue()


def _run_spectral(cfg, out):
    specs = {tag: replace(cfg.model, architecture=tag) for tag in cfg.task.models}
    tables = run_spectral_experiment(specs, cfg.train)
    vmax = max(float(t.matrix.max()) for t in tables.values())
    summary = {"task": "spectral", "seed": cfg.seed, "frequencies": [f / np.pi for f in MAJOR_FREQUENCIES],
               "models": {}}
    for tag, table in tables.items():
        (out / f"report_{tag}.csv").write_text(table.report.to_csv(include_time=cfg.record_time))
        (out / f"errors_{tag}.csv").write_text(error_matrix_csv(table))
        plotting.save_heatmap(table.matrix, table.steps, table.frequencies, out / f"heatmap_{tag}.png",
                              title=tag, vmin=0.0, vmax=vmax)
        summary["models"][tag] = {
            "param_count": count_params(build(specs[tag])),
            **table.report.summary(),
            "final_errors": [float(v) for v in table.matrix[-1]],
        }
    _write_json(out / "summary.json", summary)
    return summary


def run_grid_search(cfg, lrs=LR_GRID, batch_sizes=BATCH_GRID):
    out = prepare_output_dir(cfg)
    (out / "config.yaml").write_text(cfg.to_yaml())
    task = load_task(cfg)
    rows = grid_search(lambda: build(cfg.model), task, cfg.train, lrs, batch_sizes)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    (out / "grid.csv").write_text(buf.getvalue())
    return out, rows


def read_report_csv(path):
    """Return (epochs, losses, metrics) arrays from a report CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) < {"epoch", "loss", "metric"}:
        raise ConfigError(f"{path}: not a training report CSV")
    return (np.array([int(r["epoch"]) for r in rows]),
            np.array([float(r["loss"]) for r in rows]),
            np.array([float(r["metric"]) for r in rows]))


def _metric_info(csv_path):
    summary = Path(csv_path).parent / "summary.json"
    if not summary.exists():
        return None, True
    d = json.loads(summary.read_text())
    if "metric" in d:
        return d["metric"], d.get("higher_is_better", True)
    return None, True


def compare(report_paths, labels=None):
    """Align per-epoch metrics of several reports and rank them by best metric.

    Returns ``(table_rows, ranking_rows)``. Reports whose sibling
    ``summary.json`` names different metrics cannot be compared.
    """
    paths = [Path(p) / "report.csv" if Path(p).is_dir() else Path(p) for p in report_paths]
    if len(paths) < 2:
        raise ConfigError("compare needs at least two reports")
    labels = list(labels) if labels else [p.parent.name or p.stem for p in paths]
    if len(labels) != len(paths) or len(set(labels)) != len(labels):
        raise ConfigError("compare labels must be unique and one per report", fields=["labels"])
    infos = [_metric_info(p) for p in paths]
    names = {m for m, _ in infos if m is not None}
    if len(names) > 1:
        raise ConfigError(f"reports use different metrics: {sorted(names)}", fields=["metric"])
    higher = infos[0][1]
    data = {lab: read_report_csv(p) for lab, p in zip(labels, paths)}
    epochs = sorted(set().union(*(set(d[0].tolist()) for d in data.values())))
    table = []
    for e in epochs:
        row = {"epoch": e}
        for lab, (ep, _, met) in data.items():
            hit = np.flatnonzero(ep == e)
            row[lab] = float(met[hit[0]]) if hit.size else float("nan")
        table.append(row)
    best = []
    for lab, (ep, _, met) in data.items():
        i = int(np.argmax(met) if higher else np.argmin(met))
        best.append({"label": lab, "best_metric": float(met[i]), "best_epoch": int(ep[i])})
    best.sort(key=lambda r: -r["best_metric"] if higher else r["best_metric"])
    for rank, r in enumerate(best, 1):
        r["rank"] = rank
    return table, best


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()
