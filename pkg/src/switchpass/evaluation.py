"""Experiment harness: routing statistics, quality parity, compute accounting,
sparsity sweeps, switch calibration progress, placement ablation, and a
difficulty probe on the pass outputs."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import data as dat
from . import routing, training
from .autograd import Tensor
from .errors import ContractError
from .model import SwitchedAutoencoder
from .training import TrainConfig, format_float


def pearson(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    """Correlation coefficient, with degenerate (zero-variance) inputs
    reported as (0.0, True) instead of NaN."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0, True
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy)), False


@dataclass
class RoutingReport:
    """Routing outcomes plus per-frame MAC cost of each strategy.

    All three strategy costs describe the deployed pipeline, where the switch
    runs regardless of the threshold: full-only is the tau=0 limit and
    light-only the tau=inf limit of the mixed pass. Comparisons of the bare
    light decoder against the bare suffix go through nn.mac_count directly.
    """
    tau: float
    n: int
    light_fraction: dict[str, float]  # per difficulty
    counts: dict[str, dict[str, int]]  # difficulty -> {light, full}
    expected_macs_mixed: float  # per frame
    macs_full_only: int  # per frame
    macs_light_only: int  # per frame


def routing_stats(model: SwitchedAutoencoder, frames, tau: float) -> RoutingReport:
    if not frames:
        raise ContractError("routing_stats: empty dataset")
    x = Tensor(dat.frames_to_matrix(frames))
    _, decisions = model.mixed_output(x, tau)

    counts: dict[str, dict[str, int]] = {}
    for frame, decision in zip(frames, decisions):
        tag = str(frame.difficulty)
        slot = counts.setdefault(tag, {routing.LIGHT: 0, routing.FULL: 0})
        slot[decision.kind] += 1

    light_fraction = {
        tag: slot[routing.LIGHT] / (slot[routing.LIGHT] + slot[routing.FULL])
        for tag, slot in counts.items()
    }
    n = len(frames)
    n_light = sum(slot[routing.LIGHT] for slot in counts.values())
    base = model.macs_prefix() + model.macs_switch()
    # Integer total first so the mean matches per-sample counters exactly.
    total = n * base + n_light * model.macs_light() + (n - n_light) * model.macs_suffix()
    return RoutingReport(
        tau=float(tau),
        n=n,
        light_fraction=light_fraction,
        counts=counts,
        expected_macs_mixed=total / n,
        macs_full_only=base + model.macs_suffix(),
        macs_light_only=base + model.macs_light(),
    )


def reconstruction_loss(model: SwitchedAutoencoder, frames) -> float:
    """Mean squared reconstruction error of the full path on `frames`."""
    x = Tensor(dat.frames_to_matrix(frames))
    out = model.full_output(x)
    return float(np.mean((out.data - x.data) ** 2))


@dataclass
class ParityReport:
    mse_full: float
    mse_light: float
    mse_mixed: float


def quality_parity(model: SwitchedAutoencoder, frames, tau: float) -> ParityReport:
    """Reconstruction MSE against the input under each routing strategy."""
    x = Tensor(dat.frames_to_matrix(frames))
    mixed, _ = model.mixed_output(x, tau)

    def mse(out: Tensor) -> float:
        return float(np.mean((out.data - x.data) ** 2))

    return ParityReport(
        mse_full=mse(model.full_output(x)),
        mse_light=mse(model.light_output(x)),
        mse_mixed=mse(mixed),
    )


@dataclass
class SparsityCurvePoint:
    beta: float
    sparsity: float
    l_recon: float


def sparsity_sweep(base_cfg: TrainConfig, betas) -> list[SparsityCurvePoint]:
    """One full training run per beta, identical seeds otherwise."""
    betas = sorted(float(b) for b in betas)
    if len(set(betas)) != len(betas) or any(b < 0 for b in betas):
        raise ContractError(f"sparsity_sweep: betas must be distinct and >= 0, got {betas}")
    dataset = training.build_dataset(base_cfg.data)
    points = []
    for beta in betas:
        cfg = replace(base_cfg, dsl=replace(base_cfg.dsl, beta=beta))
        result = training.train(cfg, dataset=dataset)
        final_sparsity = routing.activation_sparsity(result.model.mask)
        l_recon = result.metrics[-1]["l_recon"] if result.metrics else float("nan")
        points.append(SparsityCurvePoint(beta=beta, sparsity=final_sparsity, l_recon=l_recon))
    return points


@dataclass
class CalibrationPoint:
    epoch: int
    mae: float
    pearson_r: float
    degenerate: bool
    predicted: np.ndarray
    actual: np.ndarray


def switch_scatter(model: SwitchedAutoencoder, frames) -> tuple[np.ndarray, np.ndarray]:
    """Predicted vs measured distances on held-out frames."""
    x = Tensor(dat.frames_to_matrix(frames))
    h = model.masked_latent(x, "infer")
    predicted = model.switch.predict(h).data
    actual = routing.pass_gap(model.light.forward(h), model.suffix.forward(h)).data
    return predicted, actual


def calibration_progress(cfg: TrainConfig, checkpoints, frames) -> list[CalibrationPoint]:
    """Evaluates each checkpoint's switch on the same held-out frames."""
    if len(checkpoints) < 2:
        raise ContractError(f"calibration_progress: need >= 2 checkpoints, got {len(checkpoints)}")
    points = []
    for ckpt in checkpoints:
        model = training.restore_model(cfg, ckpt)
        predicted, actual = switch_scatter(model, frames)
        r, degenerate = pearson(predicted, actual)
        points.append(CalibrationPoint(
            epoch=ckpt.epoch,
            mae=float(np.mean(np.abs(predicted - actual))),
            pearson_r=r,
            degenerate=degenerate,
            predicted=predicted,
            actual=actual,
        ))
    return points


@dataclass
class AblationRow:
    placement: int
    pearson_r: float
    mae: float
    prefix_mac_share: float


def placement_ablation(base_cfg: TrainConfig, placements) -> list[AblationRow]:
    """One training run per block position, shared seed and data."""
    placements = sorted(int(i) for i in placements)
    dataset = training.build_dataset(base_cfg.data)
    rows = []
    for i in placements:
        cfg = replace(base_cfg, dsl=replace(base_cfg.dsl, placement=i))
        result = training.train(cfg, dataset=dataset)
        model = result.model
        predicted, actual = switch_scatter(model, dataset.calibrate)
        r, _ = pearson(predicted, actual)
        total_macs = model.macs_prefix() + model.macs_suffix()
        rows.append(AblationRow(
            placement=i,
            pearson_r=r,
            mae=float(np.mean(np.abs(predicted - actual))),
            prefix_mac_share=model.macs_prefix() / total_macs,
        ))
    return rows


# --- difficulty probe --------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def fit_probe(x: np.ndarray, y: np.ndarray, epochs: int = 300, lr: float = 0.05):
    """Logistic regression (one dense layer + sigmoid) trained full-batch
    with Adam for a fixed budget. Deterministic: zero init, convex loss."""
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    m_w = np.zeros(d); v_w = np.zeros(d)
    m_b = 0.0; v_b = 0.0
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    for t in range(1, epochs + 1):
        p = _sigmoid(x @ w + b)
        err = (p - y) / n
        g_w = x.T @ err
        g_b = float(err.sum())
        m_w = beta1 * m_w + (1 - beta1) * g_w
        v_w = beta2 * v_w + (1 - beta2) * g_w ** 2
        m_b = beta1 * m_b + (1 - beta1) * g_b
        v_b = beta2 * v_b + (1 - beta2) * g_b ** 2
        c1 = 1 - beta1 ** t
        c2 = 1 - beta2 ** t
        w = w - lr * (m_w / c1) / (np.sqrt(v_w / c2) + eps)
        b = b - lr * (m_b / c1) / (np.sqrt(v_b / c2) + eps)
    return w, b


def probe_accuracy(w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((_sigmoid(x @ w + b) > 0.5).astype(np.float64) == y))


@dataclass
class DownstreamReport:
    acc_full: float
    acc_light: float
    acc_mixed: float


def _labels(frames) -> np.ndarray:
    return np.array([1.0 if f.difficulty == dat.HARD else 0.0 for f in frames])


def downstream_probe(model: SwitchedAutoencoder, dataset: dat.Dataset,
                     tau: float) -> DownstreamReport:
    """Difficulty probe over the masked latent of each strategy's output.

    A downstream consumer sees the signal each strategy emits, so the probe
    embeds that signal the way the pipeline itself would (masked latent of
    the re-encoded output) and classifies easy vs hard from there. One probe
    per source, fit on the train split, scored on the test split.
    """
    accs = {}
    for source in ("full", "light", "mixed"):
        def embed(frames):
            x = Tensor(dat.frames_to_matrix(frames))
            if source == "full":
                out = model.full_output(x)
            elif source == "light":
                out = model.light_output(x)
            else:
                out = model.mixed_output(x, tau)[0]
            return model.masked_latent(out, "infer").data

        w, b = fit_probe(embed(dataset.train), _labels(dataset.train))
        accs[source] = probe_accuracy(w, b, embed(dataset.test), _labels(dataset.test))
    return DownstreamReport(acc_full=accs["full"], acc_light=accs["light"],
                            acc_mixed=accs["mixed"])


# --- CSV writers -------------------------------------------------------------


def write_routing_csv(report: RoutingReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("difficulty,n,light,full,light_fraction,tau,"
                 "expected_macs_mixed,macs_full_only,macs_light_only\n")
        for tag in sorted(report.counts):
            slot = report.counts[tag]
            n = slot[routing.LIGHT] + slot[routing.FULL]
            fh.write(",".join([
                tag, str(n), str(slot[routing.LIGHT]), str(slot[routing.FULL]),
                format_float(report.light_fraction[tag]), format_float(report.tau),
                format_float(report.expected_macs_mixed),
                str(report.macs_full_only), str(report.macs_light_only),
            ]) + "\n")


def write_parity_csv(reports: dict[str, ParityReport], path) -> None:
    with open(path, "w") as fh:
        fh.write("scope,mse_full,mse_light,mse_mixed\n")
        for scope in sorted(reports):
            r = reports[scope]
            fh.write(",".join([scope, format_float(r.mse_full), format_float(r.mse_light),
                               format_float(r.mse_mixed)]) + "\n")


def write_sparsity_csv(points: list[SparsityCurvePoint], path) -> None:
    with open(path, "w") as fh:
        fh.write("beta,sparsity,l_recon\n")
        for p in points:
            fh.write(",".join([format_float(p.beta), format_float(p.sparsity),
                               format_float(p.l_recon)]) + "\n")


def write_calibration_csv(points: list[CalibrationPoint], path, scatter_path=None) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,switch_mae,pearson_r,degenerate\n")
        for p in points:
            fh.write(",".join([str(p.epoch), format_float(p.mae), format_float(p.pearson_r),
                               str(int(p.degenerate))]) + "\n")
    if scatter_path is not None:
        with open(scatter_path, "w") as fh:
            fh.write("epoch,predicted,actual\n")
            for p in points:
                for pred, act in zip(p.predicted, p.actual):
                    fh.write(f"{p.epoch},{format_float(pred)},{format_float(act)}\n")


def write_ablation_csv(rows: list[AblationRow], path) -> None:
    with open(path, "w") as fh:
        fh.write("placement,pearson_r,switch_mae,prefix_mac_share\n")
        for row in rows:
            fh.write(",".join([str(row.placement), format_float(row.pearson_r),
                               format_float(row.mae),
                               format_float(row.prefix_mac_share)]) + "\n")


def write_probe_csv(report: DownstreamReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("source,accuracy\n")
        fh.write(f"full,{format_float(report.acc_full)}\n")
        fh.write(f"light,{format_float(report.acc_light)}\n")
        fh.write(f"mixed,{format_float(report.acc_mixed)}\n")
