"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The training criteria are marked ``slow``; together they take about an hour
on one core. Runs shared between criteria are module-scoped
fixtures so each model is trained once.
"""

import time

import numpy as np
import pytest

from lainr.chebyshev import chebyshev_eval
from lainr.cli import main
from lainr.metrics import iou, psnr, ssim
from lainr.models import ARCHITECTURES, ModelSpec, build, count_params
from lainr.numerics import Rng, gradient_check
from lainr.tasks import (
    RadonOperator,
    make_ct_task,
    make_image_task,
    make_occupancy_task,
    radon_forward,
    run_spectral_experiment,
)
from lainr.tasks.synthetic import IMAGES, shepp_logan, sphere_volume
from lainr.training import TrainConfig, fit
from test_metrics import ssim_oracle

IMAGE_SIZE = 64
IMAGE_EPOCHS = 500
IMAGE_LOG_EVERY = 10
LR_GRID = (1e-4, 1e-3, 1e-2)
BATCH_GRID = (1024, 4096)  # 4096 is the whole 64x64 image, so larger sizes repeat it
ABLATION_IMAGES = ("structured", "rings", "shapes")


def rel(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------- structure


def test_criterion_1_parameter_counts(verdict):
    full = count_params(build(ModelSpec()))
    low = count_params(build(ModelSpec(degree=256, rank=32)))
    narrow = count_params(build(ModelSpec(hidden_width=128, degree=500)))
    checks = {
        "width256 == 460,291": full == 460_291,
        "width256 within 0.1% of 0.461M": rel(full, 461_000) <= 1e-3,
        "low-rank within 1% of 0.190M": rel(low, 190_000) <= 1e-2,
        "width128 within 2.5% of 0.181M": rel(narrow, 181_000) <= 2.5e-2,
    }
    detail = (f"width256 {full:,} ({rel(full, 461_000):.3%} from 0.461M), low-rank {low:,} "
              f"({rel(low, 190_000):.3%}), width128 {narrow:,} ({rel(narrow, 181_000):.3%}); "
              + ", ".join(f"{k}: {'ok' if v else 'NO'}" for k, v in checks.items()))
    assert verdict(1, all(checks.values()), detail), checks


def test_criterion_2_chebyshev_oracle(verdict):
    x = np.linspace(-1.0, 1.0, 1000)
    d = np.arange(1, 513)
    err = float(np.max(np.abs(chebyshev_eval(x, 512) - np.cos(d[None, :] * np.arccos(x)[:, None]))))
    assert verdict(2, err < 1e-9, f"max |recurrence - cos(d arccos x)| over d<=512 = {err:.2e}")


def test_criterion_3_gradient_integrity(verdict):
    worst, failures = 0.0, []
    for arch in ARCHITECTURES:
        for seed in range(10):
            spec = ModelSpec(architecture=arch, input_dim=2, output_dim=3, hidden_width=16,
                             num_hidden_layers=2, degree=8, seed=seed, num_frequencies=3,
                             omega0=3.0, gauss_scale=2.0)
            net = build(spec)
            net.needs_input_grad = True
            x = Rng(seed + 1000).uniform(-0.9, 0.9, (5, 2))
            report = gradient_check(net, x, step=1e-6, tolerance=1e-4, seed=seed)
            worst = max(worst, report.max_rel_error)
            if not report.passed:
                failures.append((arch, seed, report.max_rel_error))
    ok = not failures
    assert verdict(3, ok, f"{len(ARCHITECTURES)} architectures x 10 seeds, worst rel error {worst:.2e}"), failures


def test_criterion_4_modulation_identity(verdict):
    worst = 0.0
    for seed in range(5):
        spec = ModelSpec(architecture="sl2a", input_dim=2, output_dim=3, hidden_width=16,
                         num_hidden_layers=3, degree=8, seed=seed)
        net = build(spec)
        x = Rng(seed).uniform(-1, 1, (64, 2))
        psi = net.features(x)
        net.modulation_override = "ones"
        out = net.forward(x)
        mlp = build(ModelSpec(architecture="relu-mlp", input_dim=16, output_dim=3, hidden_width=16,
                              num_hidden_layers=3))
        for k in mlp.params:
            mlp.params[k][...] = net.params[k]
        worst = max(worst, float(np.max(np.abs(out - mlp.forward(psi)))))
    assert verdict(4, worst <= 1e-12, f"max elementwise |sl2a(psi=1) - relu-mlp| = {worst:.1e}")


# ----------------------------------------------------------- spectral bias


@pytest.mark.slow
def test_criterion_5_spectral_bias(verdict):
    base = dict(input_dim=1, output_dim=1, hidden_width=128, num_hidden_layers=3, degree=64, seed=0)
    steps = 300
    tables = run_spectral_experiment({a: ModelSpec(architecture=a, **base) for a in ("siren", "sl2a")},
                                     TrainConfig(lr=1e-3, epochs=steps, log_every=1, seed=0))
    early = np.asarray(tables["siren"].steps) <= steps // 3
    r_siren, r_sl2a = tables["siren"].ratio()[early], tables["sl2a"].ratio()[early]
    hits = np.flatnonzero((r_siren >= 2.0) & (r_sl2a <= r_siren / 2.0))
    gm = lambda r: float(np.exp(np.mean(np.log(r))))  # noqa: E731
    first = f"first at step {tables['siren'].steps[hits[0]]}" if hits.size else "none"
    detail = (f"{hits.size} early checkpoints with SIREN 9pi/3pi >= 2 and sl2a ratio <= half ({first}); "
              f"geometric-mean early ratio SIREN {gm(r_siren):.2f}, sl2a {gm(r_sl2a):.2f}")
    assert verdict(5, hits.size > 0, detail)


# ------------------------------------------------------------ image fitting


def _fit_image(image, arch, lr, batch_size):
    task = make_image_task(IMAGES[image](IMAGE_SIZE))
    net = build(ModelSpec(architecture=arch, output_dim=3, degree=512))
    cfg = TrainConfig(lr=lr, batch_size=batch_size, epochs=IMAGE_EPOCHS, log_every=IMAGE_LOG_EVERY,
                      schedule="cosine")
    return fit(net, task, cfg)


@pytest.fixture(scope="module")
def image_runs():
    """relu-pe over the lr x batch grid, then sl2a at relu-pe's best setting."""
    t0 = time.time()
    grid = {(lr, bs): _fit_image("structured", "relu-pe", lr, bs) for lr in LR_GRID for bs in BATCH_GRID}
    best_cfg = max(grid, key=lambda k: grid[k].best_metric)
    sl2a = _fit_image("structured", "sl2a", *best_cfg)
    return {"grid": grid, "best_cfg": best_cfg, "relu-pe": grid[best_cfg], "sl2a": sl2a,
            "seconds": time.time() - t0}


@pytest.mark.slow
def test_criterion_6_image_fitting(verdict, image_runs):
    pe, sl = image_runs["relu-pe"], image_runs["sl2a"]
    lr, bs = image_runs["best_cfg"]
    grid = ", ".join(f"{k[0]:g}/{k[1]}: {r.best_metric:.1f}" for k, r in image_runs["grid"].items())
    gap = sl.best_metric - pe.best_metric
    detail = (f"sl2a {sl.best_metric:.2f} dB vs relu-pe {pe.best_metric:.2f} dB (gap {gap:.2f}) at lr {lr:g}, "
              f"batch {bs}; relu-pe grid [{grid}]; {image_runs['seconds'] / 60:.1f} min")
    assert verdict(6, gap >= 3.0, detail)


@pytest.mark.slow
def test_criterion_13_convergence_dominance(verdict, image_runs):
    pe, sl = image_runs["relu-pe"].metric_curve(), image_runs["sl2a"].metric_curve()
    assert np.array_equal(pe[:, 0], sl[:, 0])
    late = pe[:, 0] > 50
    margin = sl[late, 1] - pe[late, 1]
    worst = int(pe[late, 0][np.argmin(margin)])
    detail = (f"{int(late.sum())} logged epochs past 50, min margin {margin.min():.2f} dB at epoch {worst}")
    assert verdict(13, bool(np.all(margin > 0)), detail)


@pytest.mark.slow
def test_criterion_7_ablation(verdict, image_runs):
    lr, bs = image_runs["best_cfg"]
    results = {}
    for image in ABLATION_IMAGES:
        full = image_runs["sl2a"] if image == "structured" else _fit_image(image, "sl2a", lr, bs)
        simple = _fit_image(image, "sl2a-simple", lr, bs)
        results[image] = (full.best_metric, simple.best_metric)
    ok = all(f >= s for f, s in results.values())
    detail = "; ".join(f"{k}: full {f:.2f} vs simple {s:.2f}" for k, (f, s) in results.items())
    assert verdict(7, ok, detail + f" (lr {lr:g}, batch {bs})")


# ---------------------------------------------------------------------- CT


def test_criterion_8_radon(verdict):
    op = RadonOperator(32, 18)
    rng = Rng(8)
    x, y = rng.normal(size=(32 * 32, 1)), rng.normal(size=(32 * 32, 1))
    lin = float(np.max(np.abs(op.forward(2.5 * x - 0.75 * y) - (2.5 * op.forward(x) - 0.75 * op.forward(y)))))
    m = rng.normal(size=(op.forward(x).shape[0], 1))
    lhs, rhs = float(np.sum(op.forward(x) * m)), float(np.sum(x * op.backward(m)))
    adj = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
    # all-ones image, angle 0: every detector bin crosses the full square, chord = side length
    side = 64
    proj = radon_forward(RadonOperator(side, 1), np.ones((side, side)))[0]
    chord = float(np.max(np.abs(proj - side) / side))
    ok = lin < 1e-10 and adj < 1e-6 and chord < 0.01
    detail = f"linearity {lin:.1e}, adjoint rel {adj:.1e}, all-ones angle-0 chord max rel {chord:.1e}"
    assert verdict(8, ok, detail)


CT_ANGLES = 60
CT_LR = 1e-3  # 1e-2 is worse for both models
CT_EPOCHS = 1000


@pytest.mark.slow
def test_criterion_9_ct(verdict):
    t0 = time.time()
    task = make_ct_task(shepp_logan(IMAGE_SIZE), CT_ANGLES)
    best = {}
    for arch in ("sl2a", "relu-pe"):
        net = build(ModelSpec(architecture=arch, output_dim=1, degree=128))
        rep = fit(net, task, TrainConfig(lr=CT_LR, epochs=CT_EPOCHS, log_every=10, schedule="cosine"))
        best[arch] = rep.best_metric
    detail = (f"sl2a {best['sl2a']:.2f} dB vs relu-pe {best['relu-pe']:.2f} dB, {CT_ANGLES} angles, "
              f"lr {CT_LR:g}, {CT_EPOCHS} epochs full batch; {(time.time() - t0) / 60:.1f} min")
    assert verdict(9, best["sl2a"] > best["relu-pe"], detail)


# ---------------------------------------------------------------- occupancy

OCC_SPEC = ModelSpec(architecture="sl2a", input_dim=3, output_dim=1)  # width 256, D=512
# training stops once IoU reaches the target; one epoch over 64^3 points is about a minute
OCC_TRAIN = TrainConfig(lr=1e-3, batch_size=8192, epochs=300, log_every=1, target_metric=0.97)


@pytest.mark.slow
def test_criterion_10_occupancy(verdict):
    t0 = time.time()
    task = make_occupancy_task(sphere_volume(64))
    net = build(OCC_SPEC)
    rep = fit(net, task, OCC_TRAIN)
    recon = task.render(net)
    score = iou(recon, task.reference())
    detail = (f"IoU {score:.4f} at epoch {rep.records[-1].epoch} (limit {OCC_TRAIN.epochs}), sl2a width "
              f"{OCC_SPEC.hidden_width}, D={OCC_SPEC.degree}, batch {OCC_TRAIN.batch_size}; "
              f"{(time.time() - t0) / 60:.1f} min")
    assert verdict(10, score >= 0.97 and rep.records[-1].epoch <= 300, detail)


# ------------------------------------------------------------------ metrics


def test_criterion_11_metrics(verdict):
    p20 = psnr(np.full((8, 8), 0.1), np.zeros((8, 8)))
    img = Rng(11).uniform(size=(32, 32))
    noisy = np.clip(img + 0.1 * Rng(12).normal(size=img.shape), 0, 1)
    s_self, s_pair, s_oracle = ssim(img, img), ssim(noisy, img), ssim_oracle(noisy, img)
    a, b = np.zeros((8, 8, 8)), np.zeros((8, 8, 8))
    a[0:4], b[2:6] = 1.0, 1.0
    ious = (iou(a, a), iou(a, 1.0 - a), iou(a, b))
    checks = [
        abs(p20 - 20.0) <= 1e-12,
        abs(s_self - 1.0) <= 1e-12,
        abs(s_pair - s_oracle) <= 1e-6,
        ious == (1.0, 0.0, 1.0 / 3.0),
    ]
    detail = (f"PSNR(MSE 0.01) = {p20!r}, SSIM(x,x) = {s_self!r}, SSIM vs window oracle "
              f"{abs(s_pair - s_oracle):.1e}, IoU cases {ious}")
    assert verdict(11, all(checks), detail)


# ---------------------------------------------------------- reproducibility

TINY = ["--width", "8", "--hidden-layers", "1", "--degree", "4", "--size", "16", "--epochs", "4"]
SUBCOMMANDS = {
    "fit-image": ["fit-image", "--image", "structured", *TINY],
    "superres": ["superres", "--factor", "2", *TINY],
    "inpaint": ["inpaint", "--keep-fraction", "0.5", *TINY],
    "ct": ["ct", "--angles", "6", *TINY],
    "occupancy": ["occupancy", "--batch-size", "512", *TINY],
    "spectral": ["spectral", "--width", "8", "--degree", "4", "--epochs", "3", "--models", "sl2a", "siren"],
    "grid-search": ["grid-search", *TINY, "--epochs", "2", "--lrs", "1e-3", "1e-2", "--batch-sizes", "64", "256"],
}


def test_criterion_12_reproducibility(verdict, tmp_path):
    mismatched, compared = [], 0
    for name, argv in SUBCOMMANDS.items():
        for rep in ("a", "b"):
            assert main([*argv, "--out", str(tmp_path / name / rep)]) == 0
        for csv_a in sorted((tmp_path / name / "a").glob("*.csv")):
            compared += 1
            if csv_a.read_bytes() != (tmp_path / name / "b" / csv_a.name).read_bytes():
                mismatched.append(f"{name}/{csv_a.name}")
    runs = [str(tmp_path / "fit-image" / "a"), str(tmp_path / "fit-image" / "b")]
    for rep in ("a", "b"):
        assert main(["compare", *runs, "--labels", "x", "y", "--out", str(tmp_path / "compare" / rep)]) == 0
    for csv_a in sorted((tmp_path / "compare" / "a").glob("*.csv")):
        compared += 1
        if csv_a.read_bytes() != (tmp_path / "compare" / "b" / csv_a.name).read_bytes():
            mismatched.append(f"compare/{csv_a.name}")
    detail = f"{compared} CSV files across {len(SUBCOMMANDS) + 1} subcommands, {len(mismatched)} differ"
    assert verdict(12, compared > 0 and not mismatched, detail), mismatched
