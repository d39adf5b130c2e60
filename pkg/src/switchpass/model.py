"""Assembly of a dense autoencoder with the switch block inserted."""

from __future__ import annotations

import numpy as np

from . import nn, routing
from .autograd import Tensor
from .errors import ConfigError

# Component streams for deriving independent init seeds from one run seed.
_NET, _SWITCH, _LIGHT, _SHUFFLE = 0, 1, 2, 3


def derive_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence((seed, stream)).generate_state(1, dtype=np.uint64)[0])


class SwitchedAutoencoder:
    """A splittable dense autoencoder plus mask, switch, and light decoder.

    The prefix and suffix share the layers of one underlying network; the
    block sits at cfg.placement. All parameters are reachable through
    named_parameters(), with names stable across runs for checkpointing.
    """

    def __init__(self, dims, activations, cfg: routing.SwitchConfig, seed: int):
        if not 1 <= cfg.placement <= len(dims) - 2:
            raise ConfigError(
                f"placement {cfg.placement} must leave at least one layer on each side "
                f"of a {len(dims) - 1}-layer network"
            )
        self.dims = list(dims)
        self.activations = list(activations)
        self.cfg = cfg
        self.seed = seed

        self.net = nn.init_network(dims, activations, nn.InitSpec(seed=derive_seed(seed, _NET)))
        self.prefix, self.suffix = self.net.split_at(cfg.placement)
        d = self.net.width_at(cfg.placement)
        self.mask = routing.LatentMask(d, eps=cfg.eps)
        self.switch = routing.build_switch(d, seed=derive_seed(seed, _SWITCH))
        self.light = routing.build_light_decoder(
            self.suffix, cfg.rho, seed=derive_seed(seed, _LIGHT)
        )

    @property
    def latent_dim(self) -> int:
        return self.mask.dim

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        params = []
        for group, net in (("prefix", self.prefix), ("suffix", self.suffix)):
            for k, layer in enumerate(net.layers):
                params.append((f"{group}.{k}.weights", layer.weights))
                params.append((f"{group}.{k}.bias", layer.bias))
        params.append(("mask.w", self.mask.w))
        for group, net in (("switch", self.switch.net), ("light", self.light)):
            for k, layer in enumerate(net.layers):
                params.append((f"{group}.{k}.weights", layer.weights))
                params.append((f"{group}.{k}.bias", layer.bias))
        return params

    def masked_latent(self, x: Tensor, mode: str) -> Tensor:
        return self.mask.apply(self.prefix.forward(x), mode)

    def full_output(self, x: Tensor) -> Tensor:
        return self.suffix.forward(self.masked_latent(x, "infer"))

    def light_output(self, x: Tensor) -> Tensor:
        return self.light.forward(self.masked_latent(x, "infer"))

    def mixed_output(self, x: Tensor, tau: float):
        return routing.mixed_forward(
            self.prefix, self.mask, self.switch, self.light, self.suffix, x, tau
        )

    def switch_predictions(self, x: Tensor) -> np.ndarray:
        return self.switch.predict(self.masked_latent(x, "infer")).data

    # Per-sample MAC cost of each strategy, by the out*in counting rule.
    def macs_prefix(self) -> int:
        return nn.mac_count(self.prefix)

    def macs_suffix(self) -> int:
        return nn.mac_count(self.suffix)

    def macs_light(self) -> int:
        return nn.mac_count(self.light)

    def macs_switch(self) -> int:
        return nn.mac_count(self.switch.net)

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_arrays(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        if set(state) != set(params):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise ConfigError(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, arr in state.items():
            p = params[name]
            if p.data.shape != arr.shape:
                raise ConfigError(
                    f"state {name}: shape {arr.shape} does not match model {p.data.shape}"
                )
            p.data = np.array(arr, dtype=np.float64)
