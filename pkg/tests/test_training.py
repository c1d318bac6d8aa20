import math

import numpy as np
import pytest

from lainr.errors import ConfigError, NumericalError, ShapeError
from lainr.models import ARCHITECTURES, ModelSpec, build
from lainr.numerics import Rng
from lainr.tasks import make_image_task, make_spectral_task
from lainr.training import Adam, TrainConfig, fit, grid_search, mse_loss


def small(arch, **kw):
    base = dict(architecture=arch, input_dim=2, output_dim=1, hidden_width=16, num_hidden_layers=2,
                degree=8, num_frequencies=3, omega0=3.0, gauss_scale=2.0)
    base.update(kw)
    return ModelSpec(**base)


def test_mse_cases():
    p = Rng(0).normal(size=(6, 3))
    assert mse_loss(p, p)[0] == 0.0
    loss, _ = mse_loss(np.full((10, 1), 0.1), np.zeros((10, 1)))
    assert loss == pytest.approx(0.01, abs=1e-15)
    with pytest.raises(ShapeError):
        mse_loss(np.zeros((2, 1)), np.zeros((2, 2)))


def test_mse_gradient_matches_finite_differences():
    rng = Rng(1)
    p, t = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    _, grad = mse_loss(p, t)
    h = 1e-6
    for i in range(4):
        for j in range(3):
            up, down = p.copy(), p.copy()
            up[i, j] += h
            down[i, j] -= h
            fd = (mse_loss(up, t)[0] - mse_loss(down, t)[0]) / (2 * h)
            assert grad[i, j] == pytest.approx(fd, abs=1e-8)


def test_adam_zero_gradient_leaves_params():
    p = {"w": np.array([1.0, -2.0])}
    g = {"w": np.zeros(2)}
    opt = Adam(p, g, lr=0.1)
    for _ in range(3):
        opt.step()
    assert p["w"].tolist() == [1.0, -2.0]


@pytest.mark.parametrize("g0", [3.0, -0.02, 1e3])
def test_adam_first_step_is_lr(g0):
    p = {"w": np.array([0.5])}
    g = {"w": np.array([g0])}
    Adam(p, g, lr=1e-3).step()
    # closed form: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    assert 0.5 - p["w"][0] == pytest.approx(1e-3 * g0 / (abs(g0) + 1e-8), rel=1e-12)
    assert g["w"][0] == 0.0


def test_fit_is_deterministic():
    task = make_image_task(Rng(3).uniform(size=(8, 8)))
    cfg = TrainConfig(lr=1e-3, batch_size=16, epochs=5, seed=2)
    a, b = build(small("sl2a")), build(small("sl2a"))
    fit(a, task, cfg)
    fit(b, task, cfg)
    assert all(a.params[k].tobytes() == b.params[k].tobytes() for k in a.params)


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_constant_zero_signal_is_fitted(arch, seed):
    task = make_image_task(np.zeros((8, 8)))
    # a short second-moment memory lets Adam keep stepping as the gradients vanish
    cfg = TrainConfig(lr=1e-2, batch_size=8, beta2=0.9, epochs=200, log_every=200,
                      schedule="cosine", min_lr_ratio=0.0, seed=seed)
    report = fit(build(small(arch, seed=seed)), task, cfg)
    assert report.records[-1].loss < 1e-8


def test_constant_image_reaches_psnr_ceiling():
    task = make_image_task(np.full((4, 4), 0.25))
    net = build(small("relu-mlp"))
    for k in net.params:
        net.params[k][...] = 0.0
    net.params["head.b"][...] = 0.25
    assert task.evaluate(net) == 200.0


@pytest.mark.parametrize("epochs,every,rows", [(10, 1, 10), (10, 5, 2), (12, 5, 3), (3, 10, 1)])
def test_report_rows(epochs, every, rows):
    task = make_image_task(np.zeros((4, 4)))
    report = fit(build(small("relu-mlp")), task, TrainConfig(epochs=epochs, log_every=every))
    assert len(report.records) == rows
    assert report.records[-1].epoch == epochs


def test_nan_aborts_with_diagnostic():
    task = make_image_task(np.zeros((4, 4)))
    net = build(small("relu-mlp"))
    net.params["head.b"][...] = np.nan
    with pytest.raises(NumericalError, match="non-finite loss"):
        fit(net, task, TrainConfig(epochs=2))


def test_best_state_tracks_best_metric():
    task = make_image_task(Rng(5).uniform(size=(8, 8)))
    net = build(small("relu-pe"))
    report = fit(net, task, TrainConfig(lr=1e-2, epochs=30))
    assert report.best_metric == max(r.metric for r in report.records)
    net.load_state_dict(report.best_state)
    assert task.evaluate(net) == pytest.approx(report.best_metric, abs=1e-9)


def test_target_metric_stops_early():
    task = make_image_task(np.full((4, 4), 0.5))
    report = fit(build(small("relu-mlp")), task, TrainConfig(lr=1e-2, epochs=500, target_metric=20.0))
    assert report.records[-1].epoch < 500
    assert report.records[-1].metric >= 20.0


def test_cosine_schedule_endpoints():
    cfg = TrainConfig(lr=1e-2, epochs=11, schedule="cosine", min_lr_ratio=0.1)
    assert cfg.lr_at(1) == pytest.approx(1e-2)
    assert cfg.lr_at(11) == pytest.approx(1e-3)
    assert TrainConfig(lr=3e-3).lr_at(7) == 3e-3


def test_invalid_train_config():
    with pytest.raises(ConfigError) as info:
        TrainConfig(lr=-1.0, epochs=0, schedule="step").validate()
    assert set(info.value.fields) == {"lr", "epochs", "schedule"}


def test_csv_layout():
    task = make_image_task(np.zeros((4, 4)))
    report = fit(build(small("relu-mlp")), task, TrainConfig(epochs=2))
    lines = report.to_csv(include_time=False).splitlines()
    assert lines[0] == "epoch,loss,metric,seconds"
    assert len(lines) == 3 and all(line.endswith(",") for line in lines[1:])
    assert not report.to_csv(include_time=True).splitlines()[1].endswith(",")


def test_grid_search_rows():
    task = make_image_task(Rng(0).uniform(size=(4, 4)))
    rows = grid_search(lambda: build(small("relu-mlp")), task, TrainConfig(epochs=2), (1e-3, 1e-2), (4, 16))
    assert [(r["lr"], r["batch_size"]) for r in rows] == [(1e-3, 4), (1e-3, 16), (1e-2, 4), (1e-2, 16)]
    assert all(r["status"] == "ok" for r in rows)


def test_sl2a_beats_relu_mlp_on_probe_signal():
    task = make_spectral_task()
    cfg = TrainConfig(lr=1e-3, epochs=300, log_every=300)
    spec = dict(input_dim=1, output_dim=1, hidden_width=128, num_hidden_layers=3, degree=64)
    sl2a = fit(build(ModelSpec(architecture="sl2a", **spec)), task, cfg)
    relu = fit(build(ModelSpec(architecture="relu-mlp", **spec)), task, cfg)
    assert sl2a.records[-1].loss < relu.records[-1].loss
    assert math.isfinite(sl2a.records[-1].loss)
