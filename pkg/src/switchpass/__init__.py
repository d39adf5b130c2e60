"""Autoencoders with a learned latent mask, a lightweight shadow decoder, and
a switch that routes easy samples down the cheap path at inference."""

from . import autograd, data, evaluation, model, nn, routing, training
from .autograd import Tensor
from .errors import (
    ConfigError,
    ContractError,
    DimensionError,
    FormatError,
    SwitchpassError,
    TrainingError,
)
from .model import SwitchedAutoencoder
from .routing import SwitchConfig
from .training import DataConfig, TrainConfig

__all__ = [
    "Tensor",
    "SwitchedAutoencoder",
    "SwitchConfig",
    "TrainConfig",
    "DataConfig",
    "SwitchpassError",
    "DimensionError",
    "ContractError",
    "ConfigError",
    "FormatError",
    "TrainingError",
    "autograd",
    "nn",
    "routing",
    "data",
    "model",
    "training",
    "evaluation",
]
