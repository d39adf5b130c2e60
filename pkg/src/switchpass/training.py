"""Joint optimization of the autoencoder and the switch block.

Gradient responsibilities are kept disjoint: reconstruction trains prefix,
mask, and suffix; the imitation loss trains the light decoder only; the
switch loss trains the switch only; the L1 penalty trains the mask weights
only. The separation falls out of detach placement in total_loss, so one
backward pass per batch covers everything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import data as dat
from . import routing
from .autograd import Tensor
from .errors import ConfigError, FormatError, TrainingError
from .model import SwitchedAutoencoder, derive_seed, _SHUFFLE

CHECKPOINT_FORMAT_VERSION = 1

METRIC_FIELDS = ("epoch", "l_recon", "l_switch", "l_lwd", "l_comp", "l_total",
                 "sparsity", "switch_mae")

#: Column order of metrics.csv (l_total is kept in the checkpoint history only).
METRICS_CSV_HEADER = "epoch,l_recon,l_switch,l_lwd,l_comp,sparsity,switch_mae"


class AdamState:
    """Bias-corrected Adam moments for a fixed set of named parameters."""

    def __init__(self, named_params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, t: int = 0):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = int(t)
        self.m = {name: np.zeros_like(p.data) for name, p in named_params}
        self.v = {name: np.zeros_like(p.data) for name, p in named_params}


def adam_step(named_params, state: AdamState) -> None:
    """One update over all parameters; grads must already be accumulated."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in named_params:
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data = p.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class DataConfig:
    spec: dat.SignalSpec = field(default_factory=dat.SignalSpec)
    n_easy: int = 1500
    n_hard: int = 1000
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    wav_paths: list[str] = field(default_factory=list)


@dataclass
class TrainConfig:
    dims: list[int] = field(default_factory=lambda: [64, 32, 32, 48, 48, 48, 64])
    activations: list[str] = field(
        default_factory=lambda: ["tanh", "tanh", "tanh", "tanh", "tanh", "none"]
    )
    dsl: routing.SwitchConfig = field(default_factory=routing.SwitchConfig)
    data: DataConfig = field(default_factory=DataConfig)
    epochs: int = 400
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 7
    checkpoint_every: int = 0  # 0 means every 10% of epochs

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size <= 0 or self.lr <= 0:
            raise ConfigError(
                f"epochs >= 0, batch_size > 0, lr > 0 required, got "
                f"{self.epochs}, {self.batch_size}, {self.lr}"
            )

    def cadence(self) -> int:
        if self.checkpoint_every > 0:
            return self.checkpoint_every
        return max(1, self.epochs // 10)


def build_dataset(cfg: DataConfig) -> dat.Dataset:
    frames = dat.gen_easy(cfg.spec, cfg.n_easy) + dat.gen_hard(cfg.spec, cfg.n_hard)
    for path in cfg.wav_paths:
        frames.extend(dat.load_wav(path, cfg.spec.frame_len))
    return dat.split(frames, cfg.ratios, cfg.spec.seed)


def total_loss(x: Tensor, model: SwitchedAutoencoder):
    """Composite loss and its term breakdown for one batch.

    Reconstruction runs the full path through the train-mode mask; the light
    decoder and switch see a detached copy of the masked activation, and
    their targets are detached, so their losses cannot pull on the trunk.
    """
    cfg = model.cfg
    h = model.masked_latent(x, "train")
    full_out = model.suffix.forward(h)
    diff = ag.sub(full_out, x)
    l_recon = ag.reduce(ag.mul(diff, diff), "mean")

    h_frozen = ag.detach(h)
    d_out = model.light.forward(h_frozen)
    l_lwd = routing.lwd_loss(d_out, ag.detach(full_out))

    predicted = model.switch.predict(h_frozen)
    actual = routing.pass_gap(d_out, full_out)
    l_switch = routing.switch_loss(predicted, actual)

    l_comp = routing.compression_loss(model.mask)
    l_total = ag.add(l_recon, routing.block_loss(l_switch, l_lwd, l_comp, cfg))

    breakdown = {
        "l_recon": l_recon.item(),
        "l_switch": l_switch.item(),
        "l_lwd": l_lwd.item(),
        "l_comp": l_comp.item(),
        "l_total": l_total.item(),
    }
    return l_total, breakdown


def switch_mae(model: SwitchedAutoencoder, frames) -> float:
    """Mean absolute error of switch predictions against measured distances."""
    x = Tensor(dat.frames_to_matrix(frames))
    h = model.masked_latent(x, "infer")
    predicted = model.switch.predict(h).data
    actual = routing.pass_gap(model.light.forward(h), model.suffix.forward(h)).data
    return float(np.mean(np.abs(predicted - actual)))


@dataclass
class Checkpoint:
    epoch: int
    params: dict[str, np.ndarray]
    adam: dict
    metrics: list[dict]
    format_version: int = CHECKPOINT_FORMAT_VERSION


@dataclass
class TrainResult:
    model: SwitchedAutoencoder
    dataset: dat.Dataset
    checkpoints: list[Checkpoint]
    metrics: list[dict]


def _snapshot(model: SwitchedAutoencoder, state: AdamState, epoch: int,
              metrics: list[dict]) -> Checkpoint:
    return Checkpoint(
        epoch=epoch,
        params=model.state_arrays(),
        adam={
            "lr": state.lr, "beta1": state.beta1, "beta2": state.beta2,
            "eps": state.eps, "t": state.t,
            "m": {k: v.copy() for k, v in state.m.items()},
            "v": {k: v.copy() for k, v in state.v.items()},
        },
        metrics=[dict(m) for m in metrics],
    )


def train(cfg: TrainConfig, dataset: dat.Dataset | None = None) -> TrainResult:
    """Runs the full loop; deterministic under cfg.seed, labels never read.

    Emits a checkpoint at epoch 0, at the configured cadence, and after the
    final epoch. Raises TrainingError naming the epoch if the loss goes
    non-finite.
    """
    if dataset is None:
        dataset = build_dataset(cfg.data)
    model = SwitchedAutoencoder(cfg.dims, cfg.activations, cfg.dsl, cfg.seed)
    named = model.named_parameters()
    state = AdamState(named, lr=cfg.lr)
    shuffle_rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, _SHUFFLE)))

    train_mat = dat.frames_to_matrix(dataset.train)
    n = train_mat.shape[0]
    metrics: list[dict] = []
    checkpoints = [_snapshot(model, state, 0, metrics)]
    cadence = cfg.cadence()

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        sums = {k: 0.0 for k in ("l_recon", "l_switch", "l_lwd", "l_comp", "l_total")}
        for start in range(0, n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            x = Tensor(np.ascontiguousarray(train_mat[rows]))
            for _, p in named:
                p.zero_grad()
            loss, breakdown = total_loss(x, model)
            if not np.isfinite(breakdown["l_total"]):
                raise TrainingError(f"training diverged at epoch {epoch}")
            ag.backward(loss)
            try:
                adam_step(named, state)
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from exc
            for k in sums:
                sums[k] += breakdown[k] * len(rows)
        row = {"epoch": epoch}
        row.update({k: sums[k] / n for k in sums})
        row["sparsity"] = routing.activation_sparsity(model.mask)
        row["switch_mae"] = switch_mae(model, dataset.calibrate) if dataset.calibrate else 0.0
        metrics.append(row)
        if epoch % cadence == 0 and epoch != cfg.epochs:
            checkpoints.append(_snapshot(model, state, epoch, metrics))
    if cfg.epochs > 0:
        checkpoints.append(_snapshot(model, state, cfg.epochs, metrics))
    return TrainResult(model=model, dataset=dataset, checkpoints=checkpoints, metrics=metrics)


def restore_model(cfg: TrainConfig, ckpt: Checkpoint) -> SwitchedAutoencoder:
    model = SwitchedAutoencoder(cfg.dims, cfg.activations, cfg.dsl, cfg.seed)
    model.load_state_arrays(ckpt.params)
    return model


# --- persistence -------------------------------------------------------------


def _array_doc(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "values": [float(v) for v in arr.ravel()]}


def _doc_array(doc, path: str) -> np.ndarray:
    if not isinstance(doc, dict) or set(doc) != {"shape", "values"}:
        raise FormatError(f"checkpoint field {path}: expected an array document")
    shape = doc["shape"]
    values = doc["values"]
    if not isinstance(shape, list) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise FormatError(f"checkpoint field {path}.shape: invalid shape {shape!r}")
    expected = int(np.prod(shape)) if shape else 1
    if not isinstance(values, list) or len(values) != expected:
        raise FormatError(
            f"checkpoint field {path}.values: expected {expected} values, "
            f"got {len(values) if isinstance(values, list) else type(values).__name__}"
        )
    return np.array(values, dtype=np.float64).reshape(shape)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    doc = {
        "format_version": ckpt.format_version,
        "epoch": ckpt.epoch,
        "params": {k: _array_doc(v) for k, v in ckpt.params.items()},
        "adam": {
            "lr": ckpt.adam["lr"], "beta1": ckpt.adam["beta1"],
            "beta2": ckpt.adam["beta2"], "eps": ckpt.adam["eps"],
            "t": ckpt.adam["t"],
            "m": {k: _array_doc(v) for k, v in ckpt.adam["m"].items()},
            "v": {k: _array_doc(v) for k, v in ckpt.adam["v"].items()},
        },
        "metrics": ckpt.metrics,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    """Reads a checkpoint document; any structural defect raises FormatError
    naming the field, and nothing is returned partially restored."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"checkpoint {path}: invalid document: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"checkpoint {path}: top level must be an object")
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise FormatError(
            f"checkpoint field format_version: got {version!r}, "
            f"expected {CHECKPOINT_FORMAT_VERSION}"
        )
    for key in ("epoch", "params", "adam", "metrics"):
        if key not in doc:
            raise FormatError(f"checkpoint field {key}: missing")
    if not isinstance(doc["epoch"], int):
        raise FormatError(f"checkpoint field epoch: expected integer, got {doc['epoch']!r}")
    params = {k: _doc_array(v, f"params.{k}") for k, v in doc["params"].items()}
    adam_doc = doc["adam"]
    for key in ("lr", "beta1", "beta2", "eps", "t", "m", "v"):
        if key not in adam_doc:
            raise FormatError(f"checkpoint field adam.{key}: missing")
    adam = {
        "lr": float(adam_doc["lr"]), "beta1": float(adam_doc["beta1"]),
        "beta2": float(adam_doc["beta2"]), "eps": float(adam_doc["eps"]),
        "t": int(adam_doc["t"]),
        "m": {k: _doc_array(v, f"adam.m.{k}") for k, v in adam_doc["m"].items()},
        "v": {k: _doc_array(v, f"adam.v.{k}") for k, v in adam_doc["v"].items()},
    }
    if not isinstance(doc["metrics"], list):
        raise FormatError("checkpoint field metrics: expected a list")
    return Checkpoint(
        epoch=doc["epoch"], params=params, adam=adam,
        metrics=doc["metrics"], format_version=version,
    )


def format_float(x) -> str:
    """Shortest decimal that round-trips the exact float64 value."""
    return repr(float(x))


def write_metrics_csv(metrics: list[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write(METRICS_CSV_HEADER + "\n")
        for row in metrics:
            fh.write(",".join([str(row["epoch"])] + [
                format_float(row[k])
                for k in ("l_recon", "l_switch", "l_lwd", "l_comp", "sparsity", "switch_mae")
            ]) + "\n")
