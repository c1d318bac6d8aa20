"""Run configuration: one YAML file with ``task``, ``model`` and ``train`` sections.

Every field has a default; the model defaults also depend on the task (input
and output dimensions, Chebyshev degree). Resolution order, last wins:
built-in defaults, task defaults, config file, command-line overrides.
"""

from __future__ import annotations

import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from lainr.errors import ConfigError
from lainr.models import ModelSpec
from lainr.training import TrainConfig

TASKS = ("fit-image", "superres", "inpaint", "ct", "occupancy", "spectral")
OUTPUT_ROOT_ENV = "LAINR_OUTPUT_ROOT"

TASK_DEGREE = {"fit-image": 512, "superres": 200, "inpaint": 512, "ct": 128, "occupancy": 512, "spectral": 64}

_FLOAT_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class TaskParams:
    kind: str = "fit-image"
    image: str = "structured"  # built-in name or path to a .pgm/.ppm file
    size: int = 64
    factor: int = 4
    keep_fraction: float = 0.7
    phantom: str = "shepp-logan"  # built-in name, image path or .grid file
    num_angles: int = 60
    volume: str = "sphere"  # built-in name or .grid file
    models: tuple = ("sl2a", "siren")  # spectral runs only

    def validate(self):
        bad = []
        if self.kind not in TASKS:
            bad.append("task.kind")
        if not isinstance(self.size, int) or self.size < 1:
            bad.append("task.size")
        if not isinstance(self.factor, int) or self.factor < 1:
            bad.append("task.factor")
        if not 0.0 < float(self.keep_fraction) <= 1.0:
            bad.append("task.keep_fraction")
        if not isinstance(self.num_angles, int) or self.num_angles < 1:
            bad.append("task.num_angles")
        if bad:
            raise ConfigError(f"invalid task fields: {', '.join(bad)}", fields=bad)
        return self


@dataclass(frozen=True)
class RunConfig:
    task: TaskParams = field(default_factory=TaskParams)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = ""
    seed: int = 0
    overwrite: bool = False
    record_time: bool = False  # wall-clock column in report.csv (breaks byte-reproducibility)

    def to_dict(self):
        d = asdict(self)
        d["task"]["models"] = list(self.task.models)
        return d

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def resolved_output_dir(self):
        out = Path(self.output_dir or f"runs/{self.task.kind}")
        if not out.is_absolute() and os.environ.get(OUTPUT_ROOT_ENV):
            out = Path(os.environ[OUTPUT_ROOT_ENV]) / out
        return out


def _coerce(value):
    if isinstance(value, str) and value.lower() in ("null", "none", "~"):
        return None
    if isinstance(value, str) and _FLOAT_RE.match(value):
        return float(value) if any(ch in value for ch in ".eE") else int(value)
    if isinstance(value, dict):
        return {k: _coerce(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_coerce(v) for v in value]
    return value


def _check_keys(section, data, cls):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    return [f"{section}.{k}" if section else k for k in unknown]


def _float_fields(cls):
    return {f.name for f in fields(cls) if str(f.type).startswith("float")}


def _normalize_types(data, cls):
    out = dict(data)
    for k in _float_fields(cls) & set(out):
        if isinstance(out[k], int) and not isinstance(out[k], bool):
            out[k] = float(out[k])
    return out


def task_model_defaults(task, image_channels=3):
    kind = task.kind
    if kind in ("fit-image", "superres", "inpaint"):
        return {"input_dim": 2, "output_dim": image_channels, "degree": TASK_DEGREE[kind]}
    if kind == "ct":
        return {"input_dim": 2, "output_dim": 1, "degree": TASK_DEGREE[kind]}
    if kind == "occupancy":
        return {"input_dim": 3, "output_dim": 1, "degree": TASK_DEGREE[kind]}
    return {"input_dim": 1, "output_dim": 1, "degree": 64, "hidden_width": 128, "num_hidden_layers": 3}


def build_config(data=None, overrides=None, image_channels=None):
    """Resolve a RunConfig from a parsed mapping plus ``section.key -> value`` overrides.

    ``image_channels`` lets the caller set the model output width once the
    input image is known; by default image tasks assume 3 channels.
    """
    data = _coerce(dict(data or {}))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, _, name = key.rpartition(".")
        target = data.setdefault(section, {}) if section else data
        if not isinstance(target, dict):
            raise ConfigError(f"cannot override {key}: {section} is not a section", fields=[key])
        target[name] = _coerce(value)

    bad = _check_keys("", data, RunConfig)
    task_d = dict(data.get("task") or {})
    model_d = dict(data.get("model") or {})
    train_d = dict(data.get("train") or {})
    bad += _check_keys("task", task_d, TaskParams)
    bad += _check_keys("model", model_d, ModelSpec)
    bad += _check_keys("train", train_d, TrainConfig)
    if bad:
        raise ConfigError(f"unknown config fields: {', '.join(bad)}", fields=bad)

    if "models" in task_d:
        task_d["models"] = tuple(task_d["models"])
    task = TaskParams(**_normalize_types(task_d, TaskParams)).validate()

    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer", fields=["seed"])
    defaults = task_model_defaults(task, image_channels or 3)
    model_fields = {**defaults, "seed": seed, **model_d}
    train_fields = {"seed": seed, **train_d}
    try:
        model = ModelSpec(**_normalize_types(model_fields, ModelSpec)).validate()
        train = TrainConfig(**_normalize_types(train_fields, TrainConfig)).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

    top = {k: v for k, v in data.items() if k not in ("task", "model", "train")}
    for k, typ in (("output_dir", str), ("overwrite", bool), ("record_time", bool)):
        if k in top and not isinstance(top[k], typ):
            bad.append(k)
    if bad:
        raise ConfigError(f"invalid config fields: {', '.join(bad)}", fields=bad)
    return RunConfig(task=task, model=model, train=train, **top)


def load_config(path, overrides=None, image_channels=None):
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return build_config(data, overrides, image_channels)
