"""Dense layers and splittable sequential networks.

A Network is an ordered list of dense layers that can be cut at any index
into a prefix and a suffix whose composition reproduces the original forward
bitwise. Parameter and MAC counting follow the multiply-accumulate
convention: a layer of shape out x in costs out*in MACs per sample, bias add
and activation excluded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, DimensionError

LAYER_ACTIVATIONS = ("relu", "tanh", "none")


@dataclass
class DenseLayer:
    weights: Tensor  # out x in
    bias: Tensor  # out
    activation: str = "none"

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def forward(self, x: Tensor) -> Tensor:
        z = ag.add(ag.matmul(x, ag.transpose(self.weights)), self.bias)
        if self.activation == "none":
            return z
        return ag.activation(z, self.activation)

    def param_count(self) -> int:
        return self.out_dim * self.in_dim + self.out_dim

    def mac_count(self) -> int:
        return self.out_dim * self.in_dim


@dataclass
class Network:
    layers: list[DenseLayer] = field(default_factory=list)
    input_dim: int = 0

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim if self.layers else self.input_dim

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionError(
                f"forward: input shape {x.shape} does not match input_dim {self.input_dim}"
            )
        out = x
        for layer in self.layers:
            out = layer.forward(out)
        return out

    def split_at(self, i: int) -> tuple["Network", "Network"]:
        """Cut into ([0, i), [i, end)); layer objects are shared, not copied."""
        if not 0 <= i <= len(self.layers):
            raise IndexError(f"split_at: index {i} out of range for {len(self.layers)} layers")
        suffix_in = self.input_dim if i == 0 else self.layers[i - 1].out_dim
        return (
            Network(self.layers[:i], self.input_dim),
            Network(self.layers[i:], suffix_in),
        )

    def width_at(self, i: int) -> int:
        """Activation width flowing out of split point i."""
        if not 0 <= i <= len(self.layers):
            raise IndexError(f"width_at: index {i} out of range for {len(self.layers)} layers")
        return self.input_dim if i == 0 else self.layers[i - 1].out_dim


def param_count(net: Network) -> int:
    return sum(layer.param_count() for layer in net.layers)


def mac_count(net: Network) -> int:
    return sum(layer.mac_count() for layer in net.layers)


@dataclass
class InitSpec:
    seed: int
    scheme: str = "uniform_xavier"


def init_network(dims, activations, spec: InitSpec) -> Network:
    """Builds a network with uniform-Xavier weights and zero biases.

    dims is the full width chain (len >= 1); activations has one entry per
    layer. Identical (scheme, seed, dims, activations) give bitwise-identical
    parameters.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 1 or any(d <= 0 for d in dims):
        raise ConfigError(f"init: dims must be positive, got {dims}")
    if len(activations) != len(dims) - 1:
        raise ConfigError(
            f"init: need {len(dims) - 1} activations for {len(dims)} dims, got {len(activations)}"
        )
    for act in activations:
        if act not in LAYER_ACTIVATIONS:
            raise ConfigError(f"init: unknown activation {act!r}")
    if spec.scheme != "uniform_xavier":
        raise ConfigError(f"init: unknown scheme {spec.scheme!r}")

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    layers = []
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(
            DenseLayer(
                weights=Tensor(w, requires_grad=True),
                bias=Tensor(np.zeros(fan_out), requires_grad=True),
                activation=act,
            )
        )
    return Network(layers, dims[0])
