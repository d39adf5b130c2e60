"""The switch block: latent mask, route predictor, and lightweight decoder.

The block sits at a chosen depth inside an autoencoder. The mask multiplies
each latent dimension by a learned weight (L1-penalized so unused dimensions
collapse to zero), the lightweight decoder is a reduced-width mirror of the
remaining layers trained to imitate them, and the switch is a tiny regressor
that predicts, per sample, how far the lightweight output will land from the
full one. At inference the predicted distance against a threshold decides
which of the two passes runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import Tensor
from .errors import ConfigError, ContractError, DimensionError

LIGHT = "light"
FULL = "full"

#: Guard added to the denominator of the normalized distance.
NORM_DELTA = 1e-8


@dataclass
class SwitchConfig:
    """Weights and thresholds governing the block.

    alpha jointly weights the switch and imitation losses, beta weights the
    mask's L1 penalty, tau is the routing threshold on predicted distance,
    eps the hard-zero cutoff for mask weights at inference, rho the width
    factor of the lightweight decoder, and placement the layer index where
    the block is inserted.
    """

    alpha: float = 1.0
    beta: float = 1e-3
    tau: float = 0.0
    eps: float = 1e-3
    rho: float = 0.25
    placement: int = 1

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError(f"alpha and beta must be >= 0, got {self.alpha}, {self.beta}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must be in (0, 1), got {self.rho}")
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be > 0, got {self.eps}")
        if self.placement < 0:
            raise ConfigError(f"placement must be >= 0, got {self.placement}")


class LatentMask:
    """Per-dimension multiplicative weights on the activation map."""

    def __init__(self, dim: int, eps: float = 1e-3):
        self.w = Tensor(np.ones(dim), requires_grad=True)
        self.eps = float(eps)

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def hard_weights(self) -> np.ndarray:
        """Weights with |w| < eps snapped to exactly 0 (inference view)."""
        w = self.w.data
        return np.where(np.abs(w) >= self.eps, w, 0.0)

    def apply(self, h: Tensor, mode: str) -> Tensor:
        if h.data.ndim != 2 or h.shape[1] != self.dim:
            raise DimensionError(f"mask: input shape {h.shape} does not match dim {self.dim}")
        if mode == "train":
            return ag.mul(h, self.w)
        if mode == "infer":
            return Tensor(h.data * self.hard_weights())
        raise ContractError(f"mask: unknown mode {mode!r}")


def compression_loss(mask: LatentMask) -> Tensor:
    return ag.reduce(mask.w, "l1")


def activation_sparsity(mask: LatentMask) -> float:
    """Fraction of latent dimensions hard-zeroed at inference."""
    return float(np.mean(np.abs(mask.w.data) < mask.eps))


class Switch:
    """Small regressor over the masked latent; softplus keeps output >= 0."""

    def __init__(self, net: nn.Network):
        if net.output_dim != 1:
            raise ConfigError(f"switch net must map to a single output, got {net.output_dim}")
        self.net = net

    def predict(self, h: Tensor) -> Tensor:
        out = ag.softplus(self.net.forward(h))
        return ag.reshape(out, (h.shape[0],))


def build_switch(dim: int, seed: int) -> Switch:
    hidden = max(4, dim // 4)
    net = nn.init_network([dim, hidden, 1], ["relu", "none"], nn.InitSpec(seed=seed))
    return Switch(net)


def build_light_decoder(suffix: nn.Network, rho: float, seed: int) -> nn.Network:
    """Reduced-width mirror of the suffix: same input/output dims, hidden
    widths scaled to ceil(rho * width)."""
    if not suffix.layers:
        raise ConfigError("light decoder: suffix has no layers to mirror")
    if not 0.0 < rho < 1.0:
        raise ConfigError(f"light decoder: rho must be in (0, 1), got {rho}")
    hidden = [layer.out_dim for layer in suffix.layers[:-1]]
    dims = [suffix.input_dim] + [math.ceil(rho * w) for w in hidden] + [suffix.output_dim]
    activations = [layer.activation for layer in suffix.layers]
    return nn.init_network(dims, activations, nn.InitSpec(seed=seed))


def discrepancy(d_out: Tensor, full_out: Tensor) -> Tensor:
    """Per-sample distance between the two passes, normalized by the full
    pass's norm (plus a small guard). Carries no gradient linkage."""
    if d_out.shape != full_out.shape:
        raise DimensionError(f"discrepancy: shape mismatch {d_out.shape} vs {full_out.shape}")
    diff = np.linalg.norm(d_out.data - full_out.data, axis=1)
    ref = np.linalg.norm(full_out.data, axis=1)
    return Tensor(diff / (ref + NORM_DELTA))


def pass_gap(d_out: Tensor, full_out: Tensor) -> Tensor:
    """Per-sample absolute distance between the two passes.

    This is the switch's regression target. The normalized variant above
    divides by the full pass's output norm, which is tiny for near-silent
    frames: that blows their scores up and inverts the easy/hard ordering,
    so routing thresholds operate on the absolute distance instead (the
    threshold itself is chosen by quantile, so no fixed scale is needed).
    Carries no gradient linkage.
    """
    if d_out.shape != full_out.shape:
        raise DimensionError(f"pass_gap: shape mismatch {d_out.shape} vs {full_out.shape}")
    return Tensor(np.linalg.norm(d_out.data - full_out.data, axis=1))


def _mse(a: Tensor, b: Tensor) -> Tensor:
    d = ag.sub(a, b)
    return ag.reduce(ag.mul(d, d), "mean")


def switch_loss(predicted: Tensor, actual: Tensor) -> Tensor:
    """MSE between the switch's predictions and the measured distances.

    `actual` is a target, never a gradient path; passing a tracked tensor is
    a contract violation.
    """
    if predicted.shape != actual.shape:
        raise DimensionError(f"switch loss: length mismatch {predicted.shape} vs {actual.shape}")
    if actual.requires_grad:
        raise ContractError("switch loss: actual must be detached")
    return _mse(predicted, actual)


def lwd_loss(d_out: Tensor, target: Tensor) -> Tensor:
    """Imitation MSE of the lightweight decoder against the detached full pass."""
    if d_out.shape != target.shape:
        raise DimensionError(f"lwd loss: shape mismatch {d_out.shape} vs {target.shape}")
    if target.requires_grad:
        raise ContractError("lwd loss: target must be detached")
    return _mse(d_out, target)


def block_loss(l_switch: Tensor, l_lwd: Tensor, l_comp: Tensor, cfg: SwitchConfig) -> Tensor:
    """alpha * (switch + imitation) + beta * compression."""
    return ag.add(
        ag.add(ag.scale(l_switch, cfg.alpha), ag.scale(l_lwd, cfg.alpha)),
        ag.scale(l_comp, cfg.beta),
    )


@dataclass
class RouteDecision:
    kind: str  # LIGHT or FULL
    predicted: float


def route(predicted: float, tau: float) -> RouteDecision:
    """Light strictly below tau; ties go full, the safe direction."""
    kind = LIGHT if predicted < tau else FULL
    return RouteDecision(kind=kind, predicted=float(predicted))


def calibrate_threshold(predictions, target_light_fraction: float) -> float:
    """Threshold at which roughly `target_light_fraction` of the calibration
    predictions would route light.

    Returns the linear-interpolation quantile of the predictions. With a
    degenerate (constant) distribution the strict `< tau` rule then routes
    nothing light; callers wanting a different tie policy must nudge tau.
    """
    preds = np.asarray(list(predictions), dtype=np.float64)
    if preds.size == 0:
        raise ContractError("calibrate_threshold: no predictions given")
    if not 0.0 <= target_light_fraction <= 1.0:
        raise ContractError(
            f"calibrate_threshold: fraction must be in [0, 1], got {target_light_fraction}"
        )
    return float(np.quantile(preds, target_light_fraction, method="linear"))


def mixed_forward(
    prefix: nn.Network,
    mask: LatentMask,
    switch: Switch,
    lwd: nn.Network,
    suffix: nn.Network,
    x: Tensor,
    tau: float,
) -> tuple[Tensor, list[RouteDecision]]:
    """Routes each sample of the batch through exactly one decoder.

    Computes the hard-masked activation once, asks the switch for a predicted
    distance per sample, and runs the lightweight decoder on the rows below
    tau and the full suffix on the rest.
    """
    h = mask.apply(prefix.forward(x), "infer")
    preds = switch.predict(h).data
    decisions = [route(p, tau) for p in preds]
    light_rows = np.array([d.kind == LIGHT for d in decisions], dtype=bool)

    out = np.empty((x.shape[0], suffix.output_dim))
    if light_rows.any():
        sub = Tensor(np.ascontiguousarray(h.data[light_rows]))
        out[light_rows] = lwd.forward(sub).data
    if (~light_rows).any():
        sub = Tensor(np.ascontiguousarray(h.data[~light_rows]))
        out[~light_rows] = suffix.forward(sub).data
    return Tensor(out), decisions
