"""Network assembly: the Chebyshev-activation INR, its ablation, and baseline MLPs.

Architecture tags:

``sl2a``
    tanh -> LA block (n -> m, degree D) -> LayerNorm(m) = psi, then
    ``num_hidden_layers`` fusion layers ``relu(W (y ⊙ psi) + b)`` starting from
    ``y = psi``, then a linear head.
``sl2a-simple``
    Same layers, no ``⊙ psi`` modulation in the fusion layers.
``relu-mlp`` / ``relu-pe`` / ``siren`` / ``gauss``
    ``num_hidden_layers`` dense layers of width m with ReLU, sine or Gaussian
    activations plus a linear head; ``relu-pe`` puts a Fourier encoding in front.

With ``rank`` set, every dense layer after the first (hidden layers and head)
is low-rank.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from lainr.chebyshev import LearnableActivation
from lainr.errors import ConfigError, ParseError, ShapeError, UsageError
from lainr.layers import Activation, FourierEncoding, FourierEncodingSpec, LayerNorm, Linear, LowRankLinear
from lainr.numerics import Rng, as_matrix

ARCHITECTURES = ("sl2a", "sl2a-simple", "relu-mlp", "relu-pe", "siren", "gauss")
CHECKPOINT_FORMAT = "lainr-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    architecture: str = "sl2a"
    input_dim: int = 2
    output_dim: int = 3
    hidden_width: int = 256
    num_hidden_layers: int = 3
    degree: int = 512
    rank: int | None = None
    omega0: float = 30.0
    gauss_scale: float = 10.0
    num_frequencies: int = 10
    fourier_base: float = 2.0
    include_input: bool = True
    seed: int = 0

    def validate(self):
        bad = []
        if self.architecture not in ARCHITECTURES:
            bad.append("architecture")
        for name in ("input_dim", "output_dim", "hidden_width", "degree"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                bad.append(name)
        if not isinstance(self.num_hidden_layers, int) or self.num_hidden_layers < 0:
            bad.append("num_hidden_layers")
        if self.num_hidden_layers == 0 and not self.is_sl2a:
            bad.append("num_hidden_layers")
        if self.rank is not None and (not isinstance(self.rank, int) or self.rank < 1):
            bad.append("rank")
        if self.num_frequencies < 0:
            bad.append("num_frequencies")
        if bad:
            raise ConfigError(f"invalid model spec fields: {', '.join(bad)}", fields=bad)
        return self

    @property
    def is_sl2a(self):
        return self.architecture in ("sl2a", "sl2a-simple")

    @property
    def fourier(self):
        return FourierEncodingSpec(self.num_frequencies, self.fourier_base, self.include_input)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown model fields: {', '.join(unknown)}", fields=unknown)
        return cls(**d).validate()


class Network:
    """Ordered layer stack with whole-network forward/backward.

    ``params``/``grads`` map qualified names (``"hidden0.W"``) to the layers'
    own arrays, so in-place updates through either view are shared.
    ``modulation_override = "ones"`` replaces the modulator in every fusion
    layer with ones (test hook); ``y_1`` is left untouched.
    """

    def __init__(self, spec, named_layers):
        self.spec = spec
        self.named_layers = dict(named_layers)
        self.params, self.grads = {}, {}
        for lname, layer in self.named_layers.items():
            for pname in layer.params:
                self.params[f"{lname}.{pname}"] = layer.params[pname]
                self.grads[f"{lname}.{pname}"] = layer.grads[pname]
        self.modulation_override = None
        self.needs_input_grad = False
        self._mod_cache = None

    # structural views
    def hidden(self):
        return [(self.named_layers[f"hidden{i}"], self.named_layers[f"act{i}"])
                for i in range(self.spec.num_hidden_layers)]

    @property
    def head(self):
        return self.named_layers["head"]

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def num_params(self):
        return count_params(self)

    def param_breakdown(self):
        return {name: layer.num_params() for name, layer in self.named_layers.items() if layer.num_params()}

    def features(self, coords):
        """Normalized LA output psi for an sl2a network (no caching side effects kept)."""
        x = as_matrix(coords)
        nl = self.named_layers
        psi = nl["norm"].forward(nl["la"].forward(nl["tanh"].forward(x)))
        for name in ("tanh", "la", "norm"):
            nl[name]._cache = None
        return psi

    def forward(self, coords):
        x = as_matrix(coords, "coords")
        if x.shape[1] != self.spec.input_dim:
            raise ShapeError(f"network expects {self.spec.input_dim} coordinate columns, got {x.shape[1]}")
        if self.spec.is_sl2a:
            return self._forward_sl2a(x)
        y = x
        if "encode" in self.named_layers:
            y = self.named_layers["encode"].forward(y)
        for lin, act in self.hidden():
            y = act.forward(lin.forward(y))
        return self.head.forward(y)

    def _forward_sl2a(self, x):
        nl = self.named_layers
        nl["la"].needs_input_grad = self.needs_input_grad
        psi = nl["norm"].forward(nl["la"].forward(nl["tanh"].forward(x)))
        modulate = self.spec.architecture == "sl2a"
        mod = np.ones_like(psi) if self.modulation_override == "ones" else psi
        y = psi
        inputs = []
        for lin, act in self.hidden():
            inputs.append(y)
            u = y * mod if modulate else y
            y = act.forward(lin.forward(u))
        self._mod_cache = (psi, mod, inputs, modulate)
        return self.head.forward(y)

    def backward(self, grad_out):
        grad_out = as_matrix(grad_out, "grad_out")
        if self.spec.is_sl2a:
            return self._backward_sl2a(grad_out)
        g = self.head.backward(grad_out)
        for lin, act in reversed(self.hidden()):
            g = lin.backward(act.backward(g))
        if not self.needs_input_grad:
            self.named_layers.get("encode", self.head)._cache = None
            return None
        if "encode" in self.named_layers:
            g = self.named_layers["encode"].backward(g)
        return g

    def _backward_sl2a(self, grad_out):
        if self._mod_cache is None:
            raise UsageError("network backward called without a matching forward")
        psi, mod, inputs, modulate = self._mod_cache
        self._mod_cache = None
        nl = self.named_layers
        g = self.head.backward(grad_out)
        g_psi = np.zeros_like(psi)
        for (lin, act), y_prev in zip(reversed(self.hidden()), reversed(inputs)):
            gu = lin.backward(act.backward(g))
            if modulate:
                if self.modulation_override is None:
                    g_psi += gu * y_prev
                g = gu * mod
            else:
                g = gu
        g_psi += g  # y_1 = psi path
        g_z = nl["la"].backward(nl["norm"].backward(g_psi))
        if self.needs_input_grad:
            return nl["tanh"].backward(g_z)
        nl["tanh"]._cache = None
        return None

    __call__ = forward

    def predict(self, coords, batch_size=65536):
        """Inference in row chunks; leaves no caches behind."""
        x = as_matrix(coords)
        outs = []
        for start in range(0, x.shape[0], batch_size):
            outs.append(self.forward(x[start : start + batch_size]))
            self._clear_caches()
        return np.concatenate(outs, axis=0) if outs else np.zeros((0, self.spec.output_dim))

    def _clear_caches(self):
        self._mod_cache = None
        for layer in self.named_layers.values():
            layer._cache = None

    def state_dict(self):
        return {k: v.copy() for k, v in self.params.items()}

    def load_state_dict(self, state):
        missing = sorted(set(self.params) - set(state))
        extra = sorted(set(state) - set(self.params))
        if missing or extra:
            raise ShapeError(f"state mismatch: missing {missing}, unexpected {extra}")
        for k, v in state.items():
            if v.shape != self.params[k].shape:
                raise ShapeError(f"shape mismatch for {k}: {v.shape} vs {self.params[k].shape}")
            self.params[k][...] = v


def _dense(in_f, out_f, spec, rng, first, w_bound=None, b_bound=None):
    if spec.rank is not None and not first:
        return LowRankLinear(in_f, out_f, spec.rank, rng=rng, strict=False)
    return Linear(in_f, out_f, rng=rng, w_bound=w_bound, b_bound=b_bound)


def build(spec, rng=None):
    """Construct a network; identical spec and seed give identical parameters."""
    spec = spec.validate()
    rng = rng or Rng(spec.seed)
    n, m, out, L = spec.input_dim, spec.hidden_width, spec.output_dim, spec.num_hidden_layers
    layers = []
    if spec.is_sl2a:
        layers.append(("tanh", Activation("tanh")))
        layers.append(("la", LearnableActivation(n, m, spec.degree, rng=rng)))
        layers.append(("norm", LayerNorm(m)))
        for i in range(L):
            layers.append((f"hidden{i}", _dense(m, m, spec, rng, first=False)))
            layers.append((f"act{i}", Activation("relu")))
        layers.append(("head", _dense(m, out, spec, rng, first=False)))
        return Network(spec, layers)

    in_f = n
    if spec.architecture == "relu-pe":
        enc = FourierEncoding(n, spec.fourier)
        layers.append(("encode", enc))
        in_f = enc.output_dim
    for i in range(L):
        first = i == 0
        fan_in = in_f if first else m
        if spec.architecture == "siren":
            # first layer U(-1/in, 1/in); later layers U(-sqrt(6/in)/omega0, +)
            wb = 1.0 / fan_in if first else math.sqrt(6.0 / fan_in) / spec.omega0
            lin = _dense(fan_in, m, spec, rng, first, w_bound=wb)
            act = Activation("sine", spec.omega0)
        elif spec.architecture == "gauss":
            lin = _dense(fan_in, m, spec, rng, first)
            act = Activation("gaussian", spec.gauss_scale)
        else:
            lin = _dense(fan_in, m, spec, rng, first)
            act = Activation("relu")
        layers.append((f"hidden{i}", lin))
        layers.append((f"act{i}", act))
    if spec.architecture == "siren":
        wb = math.sqrt(6.0 / m) / spec.omega0
        layers.append(("head", _dense(m, out, spec, rng, first=False, w_bound=wb)))
    else:
        layers.append(("head", _dense(m, out, spec, rng, first=False)))
    return Network(spec, layers)


def count_params(net):
    return sum(layer.num_params() for layer in net.named_layers.values())


def save_checkpoint(net, path):
    """Write spec and parameters to an ``.npz`` container.

    Entries: ``__format__`` (str), ``__version__`` (int), ``__spec__`` (JSON
    str), then one float64 array per qualified parameter name.
    """
    path = Path(path)
    arrays = {
        "__format__": np.array(CHECKPOINT_FORMAT),
        "__version__": np.array(CHECKPOINT_VERSION),
        "__spec__": np.array(json.dumps(net.spec.to_dict(), sort_keys=True)),
    }
    arrays.update({k: v for k, v in net.params.items()})
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path):
    try:
        with np.load(path, allow_pickle=False) as data:
            if str(data["__format__"]) != CHECKPOINT_FORMAT:
                raise ParseError(f"{path}: not a checkpoint file")
            version = int(data["__version__"])
            if version != CHECKPOINT_VERSION:
                raise ParseError(f"{path}: unsupported checkpoint version {version}")
            spec = ModelSpec.from_dict(json.loads(str(data["__spec__"])))
            state = {k: data[k] for k in data.files if not k.startswith("__")}
    except (KeyError, ValueError, OSError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{path}: unreadable checkpoint ({exc})") from exc
    net = build(spec)
    net.load_state_dict(state)
    return net


def with_architecture(spec, architecture):
    return replace(spec, architecture=architecture)
