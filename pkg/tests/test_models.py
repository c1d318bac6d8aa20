import numpy as np
import pytest

from lainr.errors import ConfigError, ParseError, ShapeError, UsageError
from lainr.models import ARCHITECTURES, ModelSpec, build, count_params, load_checkpoint, save_checkpoint
from lainr.numerics import Rng, gradient_check


def toy(arch, seed=0, rank=None, hidden=2):
    return ModelSpec(architecture=arch, input_dim=2, output_dim=3, hidden_width=16,
                     num_hidden_layers=hidden, degree=8, rank=rank, seed=seed,
                     num_frequencies=3, omega0=3.0, gauss_scale=2.0)


def coords(seed, rows=5):
    return Rng(seed + 1000).uniform(-1, 1, (rows, 2))


def test_width256_count():
    net = build(ModelSpec())
    breakdown = net.param_breakdown()
    assert breakdown["la"] == 262_144
    assert breakdown["norm"] == 512
    assert sum(breakdown[f"hidden{i}"] for i in range(3)) == 3 * 65_792
    assert breakdown["head"] == 771
    # itemized total: LA + LayerNorm + hidden + head
    assert count_params(net) == 262_144 + 512 + 3 * 65_792 + 771 == 460_803


def test_width128_count():
    assert count_params(build(ModelSpec(hidden_width=128, degree=500))) == 178_179


def test_lowrank_count():
    net = build(ModelSpec(degree=256, rank=32))
    assert count_params(net) == 2 * 256 * 256 + 512 + 3 * (32 * 512 + 256) + (32 * 259 + 3) == 189_795


def test_zero_hidden_layers():
    net = build(ModelSpec(num_hidden_layers=0, hidden_width=8, degree=4))
    assert count_params(net) == 2 * 8 * 4 + 16 + 8 * 3 + 3
    assert net.forward(coords(0)).shape == (5, 3)
    with pytest.raises(ConfigError):
        build(ModelSpec(architecture="relu-mlp", num_hidden_layers=0))


def test_build_is_deterministic():
    a, b = build(toy("relu-mlp", seed=3)), build(toy("relu-mlp", seed=3))
    assert all(a.params[k].tobytes() == b.params[k].tobytes() for k in a.params)
    c = build(toy("relu-mlp", seed=4))
    assert any(a.params[k].tobytes() != c.params[k].tobytes() for k in a.params)


def test_invalid_spec_lists_fields():
    with pytest.raises(ConfigError) as info:
        build(ModelSpec(architecture="mystery", degree=0))
    assert set(info.value.fields) >= {"architecture", "degree"}


def test_forward_shape_error():
    with pytest.raises(ShapeError):
        build(toy("sl2a")).forward(np.zeros((3, 3)))


def copy_fusion_into_mlp(net):
    mlp = build(ModelSpec(architecture="relu-mlp", input_dim=16, output_dim=3, hidden_width=16,
                          num_hidden_layers=net.spec.num_hidden_layers))
    for k in mlp.params:
        mlp.params[k][...] = net.params[k]
    return mlp


@pytest.mark.parametrize("seed", range(5))
def test_modulation_identity(seed):
    net = build(toy("sl2a", seed=seed))
    x = coords(seed, 50)
    psi = net.features(x)
    net.modulation_override = "ones"
    out = net.forward(x)
    ref = copy_fusion_into_mlp(net).forward(psi)
    assert np.max(np.abs(out - ref)) <= 1e-12


def test_simple_differs_from_full():
    full, simple = build(toy("sl2a", seed=2)), build(toy("sl2a-simple", seed=2))
    assert all(full.params[k].tobytes() == simple.params[k].tobytes() for k in full.params)
    x = coords(2, 20)
    assert np.max(np.abs(full.forward(x) - simple.forward(x))) > 1e-6
    # simple is the full network with the modulation replaced by pass-through
    full.modulation_override = "ones"
    np.testing.assert_array_equal(full.forward(x), simple.forward(x))


def test_degenerate_constant_psi():
    net = build(toy("sl2a", seed=1))
    net.params["la.coeffs"][...] = 0.0
    net.params["norm.shift"][...] = 0.0
    out = net.forward(coords(1, 10))
    np.testing.assert_allclose(out, np.tile(out[0], (10, 1)), atol=1e-15)
    # psi = 0, so every fusion input y * psi vanishes and each layer yields relu(b)
    y = np.maximum(net.params["hidden1.b"], 0.0)
    np.testing.assert_allclose(out[0], (y @ net.params["head.W"].T + net.params["head.b"])[0], atol=1e-15)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_network_gradient_check(arch, seed):
    net = build(toy(arch, seed=seed))
    net.needs_input_grad = True
    report = gradient_check(net, coords(seed) * 0.9, step=1e-6, tolerance=1e-4, seed=seed)
    assert report.passed, (arch, seed, report.per_tensor)


@pytest.mark.parametrize("arch", ["sl2a", "relu-pe"])
def test_network_gradient_check_lowrank(arch):
    net = build(toy(arch, seed=7, rank=4))
    net.needs_input_grad = True
    assert gradient_check(net, coords(7), step=1e-6, tolerance=1e-4).passed


def test_modulation_override_gradients_match_finite_differences():
    net = build(toy("sl2a", seed=5))
    net.modulation_override = "ones"
    net.needs_input_grad = True
    report = gradient_check(net, coords(5), step=1e-6, tolerance=1e-4)
    assert report.passed, report.per_tensor
    # LA still receives gradient through y_1 even with the modulation removed
    net.forward(coords(5))
    net.backward(np.ones((5, 3)))
    assert np.abs(net.grads["la.coeffs"]).max() > 0.0


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_zero_grad_out_gives_zero_gradients(arch):
    net = build(toy(arch))
    net.forward(coords(0))
    net.backward(np.zeros((5, 3)))
    assert all(np.all(g == 0.0) for g in net.grads.values())


def test_network_backward_without_forward():
    net = build(toy("sl2a"))
    with pytest.raises(UsageError):
        net.backward(np.zeros((5, 3)))


def test_predict_chunks_and_clears_caches():
    net = build(toy("sl2a", seed=3))
    x = coords(3, 37)
    full = net.forward(x)
    net._clear_caches()
    np.testing.assert_allclose(net.predict(x, batch_size=8), full, atol=1e-14)
    with pytest.raises(UsageError):
        net.backward(np.zeros((37, 3)))


def test_checkpoint_round_trip(tmp_path):
    net = build(toy("sl2a", seed=9, rank=3))
    path = save_checkpoint(net, tmp_path / "ck.npz")
    again = load_checkpoint(path)
    assert again.spec == net.spec
    x = coords(9)
    np.testing.assert_array_equal(again.forward(x), net.forward(x))


def test_checkpoint_rejects_garbage(tmp_path):
    p = tmp_path / "bad.npz"
    p.write_bytes(b"not a zip")
    with pytest.raises(ParseError):
        load_checkpoint(p)
    np.savez(tmp_path / "other.npz", x=np.zeros(2))
    with pytest.raises(ParseError):
        load_checkpoint(tmp_path / "other.npz")


def test_load_state_dict_mismatch():
    net = build(toy("relu-mlp"))
    state = net.state_dict()
    state.pop("head.b")
    with pytest.raises(ShapeError):
        net.load_state_dict(state)
