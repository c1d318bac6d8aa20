"""MSE objective, Adam, and the training loop."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from lainr.errors import ConfigError, NumericalError, ShapeError
from lainr.numerics import Rng

LR_GRID = (1e-4, 1e-3, 1e-2)
BATCH_GRID = (32 * 32, 64 * 64, 128 * 128, 256 * 256)


def mse_loss(pred, target):
    """Mean over rows of the squared error summed over output channels.

    Returns ``(loss, grad)`` with ``grad = 2 (pred - target) / N``.
    """
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    n = pred.shape[0]
    if n < 1:
        raise ShapeError("mse_loss needs at least one row")
    diff = pred - target
    return float(np.sum(diff * diff)) / n, (2.0 / n) * diff


class Adam:
    """Adam with bias correction; zeroes the gradients it consumed."""

    def __init__(self, params, grads, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params, self.grads = params, grads
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, p in self.params.items():
            g = self.grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= (lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
            g.fill(0.0)


def adam_step(opt, net=None, lr=None):
    opt.step(lr)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int | None = None  # None -> full batch
    epochs: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    log_every: int = 1
    schedule: str | None = None  # None or "cosine"
    min_lr_ratio: float = 0.01
    target_metric: float | None = None  # stop once the logged metric reaches this

    def validate(self):
        bad = []
        if not self.lr > 0:
            bad.append("lr")
        if self.batch_size is not None and (not isinstance(self.batch_size, int) or self.batch_size < 1):
            bad.append("batch_size")
        if not isinstance(self.epochs, int) or self.epochs < 1:
            bad.append("epochs")
        if not isinstance(self.log_every, int) or self.log_every < 1:
            bad.append("log_every")
        if self.schedule not in (None, "cosine"):
            bad.append("schedule")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            bad.append("beta")
        if bad:
            raise ConfigError(f"invalid training config fields: {', '.join(bad)}", fields=bad)
        return self

    def lr_at(self, epoch):
        """Learning rate for a 1-based epoch."""
        if self.schedule is None:
            return self.lr
        frac = (epoch - 1) / max(self.epochs - 1, 1)
        lo = self.lr * self.min_lr_ratio
        return lo + 0.5 * (self.lr - lo) * (1.0 + math.cos(math.pi * frac))

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown training fields: {', '.join(unknown)}", fields=unknown)
        return cls(**d).validate()


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    metric: float
    seconds: float


@dataclass
class TrainReport:
    records: list = field(default_factory=list)
    metric_name: str = "metric"
    higher_is_better: bool = True
    best_epoch: int | None = None
    best_metric: float | None = None
    best_state: dict | None = None
    final_state: dict | None = None
    total_seconds: float = 0.0

    def improves(self, value):
        if self.best_metric is None:
            return True
        return value > self.best_metric if self.higher_is_better else value < self.best_metric

    def metric_curve(self):
        return np.array([[r.epoch, r.metric] for r in self.records])

    def to_csv(self, include_time=True):
        """CSV with header ``epoch,loss,metric,seconds``; ``seconds`` is blank when timing is off."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss", "metric", "seconds"])
        for r in self.records:
            w.writerow([r.epoch, repr(r.loss), repr(r.metric), f"{r.seconds:.6f}" if include_time else ""])
        return buf.getvalue()

    def summary(self):
        last = self.records[-1] if self.records else None
        return {
            "metric": self.metric_name,
            "higher_is_better": self.higher_is_better,
            "best_epoch": self.best_epoch,
            "best_metric": self.best_metric,
            "final_epoch": last.epoch if last else None,
            "final_loss": last.loss if last else None,
            "final_metric": last.metric if last else None,
            "wall_clock_seconds": self.total_seconds,
        }


def _reached(value, target, higher_is_better):
    return value >= target if higher_is_better else value <= target


def _grad_norms(net):
    return {k: float(np.linalg.norm(g)) for k, g in net.grads.items()}


def fit(net, task, cfg, progress=None):
    """Train ``net`` on ``task`` with Adam on the MSE of the measured output.

    Each step: forward -> task operator -> mse_loss -> backward through the
    operator and the network -> Adam. Pointwise operators (identity) train on
    shuffled row batches without replacement; other operators render the full
    coordinate set each step. The task metric is logged every
    ``cfg.log_every`` epochs and the best-metric parameters are kept.
    """
    cfg = cfg.validate()
    rng = Rng(cfg.seed)
    opt = Adam(net.params, net.grads, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    net.zero_grad()
    op = task.operator
    coords, targets = task.train_coords, task.train_targets
    n_rows = coords.shape[0]
    batch = n_rows if (cfg.batch_size is None or not op.pointwise) else min(cfg.batch_size, n_rows)
    report = TrainReport(metric_name=task.metric, higher_is_better=task.higher_is_better)
    start = time.perf_counter()

    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.lr_at(epoch)
        order = rng.permutation(n_rows) if batch < n_rows else None
        total, seen = 0.0, 0
        for s in range(0, n_rows, batch):
            if order is None:
                xb, yb = coords, targets
            else:
                idx = order[s : s + batch]
                xb, yb = coords[idx], targets[idx]
            pred = net.forward(xb)
            meas = op.forward(pred)
            loss, g_meas = mse_loss(meas, yb)
            if not math.isfinite(loss):
                net._clear_caches()
                raise NumericalError(
                    f"non-finite loss at epoch {epoch} (lr={lr:g}); grad norms: {_grad_norms(net)}"
                )
            net.backward(op.backward(g_meas))
            opt.step(lr)
            rows = xb.shape[0]
            total += loss * rows
            seen += rows
        if epoch % cfg.log_every == 0 or epoch == cfg.epochs:
            metric = float(task.evaluate(net))
            report.records.append(EpochRecord(epoch, total / seen, metric, time.perf_counter() - start))
            if report.improves(metric):
                report.best_epoch, report.best_metric = epoch, metric
                report.best_state = net.state_dict()
            if progress is not None:
                progress(report.records[-1], net)
            if cfg.target_metric is not None and _reached(metric, cfg.target_metric, report.higher_is_better):
                break
    report.final_state = net.state_dict()
    report.total_seconds = time.perf_counter() - start
    return report


def grid_search(make_net, task, base_cfg, lrs=LR_GRID, batch_sizes=BATCH_GRID):
    """Train one fresh network per (lr, batch size) pair; return summary rows."""
    rows = []
    for lr in lrs:
        for bs in batch_sizes:
            cfg = replace(base_cfg, lr=lr, batch_size=bs)
            net = make_net()
            try:
                rep = fit(net, task, cfg)
                status = "ok"
            except NumericalError:
                rep, status = None, "diverged"
            rows.append({
                "lr": lr,
                "batch_size": bs,
                "status": status,
                "best_metric": rep.best_metric if rep else float("nan"),
                "best_epoch": rep.best_epoch if rep else -1,
                "final_loss": rep.records[-1].loss if rep else float("nan"),
            })
    return rows


def report_to_json(report, extra=None):
    d = report.summary()
    if extra:
        d.update(extra)
    return json.dumps(d, indent=2, sort_keys=True)


def config_dict(cfg):
    return asdict(cfg)
