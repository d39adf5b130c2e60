"""Acceptance suite: every release criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one verdict line per
criterion. The expensive fixtures (a default training run, the compression
sweep, and the placement ablation) are shared module-wide; the whole file
takes a few minutes on a desktop CPU.
"""

import copy
import struct

import numpy as np
import pytest

from switchpass import autograd as ag
from switchpass import data as dat
from switchpass import evaluation as ev
from switchpass import nn, routing, training
from switchpass.autograd import MacCounter, Tensor
from switchpass.errors import FormatError
from switchpass.model import SwitchedAutoencoder

TARGET_LIGHT_FRACTION = 0.6


def verdict(number: int, name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")


def small_config(**kw):
    cfg = training.TrainConfig(
        dims=[16, 8, 12, 16],
        activations=["tanh", "tanh", "none"],
        dsl=routing.SwitchConfig(placement=1, rho=0.5, **kw.pop("dsl", {})),
        epochs=kw.pop("epochs", 6),
        batch_size=16,
        seed=5,
    )
    cfg.data = training.DataConfig(
        spec=dat.SignalSpec(frame_len=16, seed=9),
        n_easy=90, n_hard=90, ratios=(0.6, 0.2, 0.2),
    )
    assert not kw
    return cfg


@pytest.fixture(scope="module")
def default_run():
    cfg = training.TrainConfig()
    return cfg, training.train(cfg)


@pytest.fixture(scope="module")
def calibrated(default_run):
    cfg, result = default_run
    preds = result.model.switch_predictions(
        Tensor(dat.frames_to_matrix(result.dataset.calibrate))
    )
    return routing.calibrate_threshold(preds, TARGET_LIGHT_FRACTION)


@pytest.fixture(scope="module")
def sweep_points(default_run):
    cfg, _ = default_run
    return ev.sparsity_sweep(cfg, [1e-5, 1e-3, 1e-1])


@pytest.fixture(scope="module")
def ablation_rows(default_run):
    cfg, _ = default_run
    return ev.placement_ablation(cfg, [1, 2, 3])


# -- 1. gradient correctness ---------------------------------------------------


def check_grad(analytic: np.ndarray, fd: np.ndarray) -> float:
    # Relative error with a 1e-4 scale floor: below that scale the central
    # difference itself is cancellation noise, not signal.
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-4)
    return float(np.max(np.abs(analytic - fd) / scale))


def test_criterion_1_gradient_correctness():
    rng = np.random.default_rng(17)
    worst = 0.0

    # every autograd op against central finite differences
    a = Tensor(rng.uniform(-2, 2, (3, 4)), requires_grad=True)
    b = Tensor(rng.uniform(-2, 2, (3, 4)), requires_grad=True)
    m = Tensor(rng.uniform(-2, 2, (4, 3)), requires_grad=True)
    c = rng.uniform(-1, 1, (3, 4))
    ops = {
        "matmul": (lambda: ag.reduce(ag.matmul(a, m), "mean"),
                   lambda: float(np.mean(np.einsum("ik,kj->ij", a.data, m.data)))),
        "add": (lambda: ag.reduce(ag.mul(ag.add(a, b), Tensor(c)), "mean"),
                lambda: float(np.mean((a.data + b.data) * c))),
        "sub": (lambda: ag.reduce(ag.mul(ag.sub(a, b), Tensor(c)), "mean"),
                lambda: float(np.mean((a.data - b.data) * c))),
        "mul": (lambda: ag.reduce(ag.mul(ag.mul(a, b), Tensor(c)), "mean"),
                lambda: float(np.mean(a.data * b.data * c))),
        "relu": (lambda: ag.reduce(ag.mul(ag.relu(a), Tensor(c)), "mean"),
                 lambda: float(np.mean(np.maximum(a.data, 0) * c))),
        "tanh": (lambda: ag.reduce(ag.mul(ag.tanh(a), Tensor(c)), "mean"),
                 lambda: float(np.mean(np.tanh(a.data) * c))),
        "softplus": (lambda: ag.reduce(ag.mul(ag.softplus(a), Tensor(c)), "mean"),
                     lambda: float(np.mean((np.maximum(a.data, 0)
                                            + np.log1p(np.exp(-np.abs(a.data)))) * c))),
        "sum": (lambda: ag.reduce(a, "sum"), lambda: float(a.data.ravel().cumsum()[-1])),
        "mean": (lambda: ag.reduce(a, "mean"), lambda: float(np.mean(a.data))),
        "l1": (lambda: ag.reduce(a, "l1"), lambda: float(np.sum(np.abs(a.data)))),
        "sq_l2": (lambda: ag.reduce(ag.scale(a, 0.2), "sq_l2"),
                  lambda: float(np.sum((0.2 * a.data) ** 2))),
    }
    h = 1e-6
    for name, (graph, oracle) in ops.items():
        for t in (a, b, m):
            t.zero_grad()
        ag.backward(graph())
        for t in (a, b, m):
            if t.grad is None:
                continue
            fd = np.zeros_like(t.data)
            flat, fdflat = t.data.ravel(), fd.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = oracle()
                flat[i] = orig - h
                fm = oracle()
                flat[i] = orig
                fdflat[i] = (fp - fm) / (2 * h)
            worst = max(worst, check_grad(t.grad, fd))

    # The full composite loss on the pinned 64-32-16-32-64 model. The
    # distillation and switch targets (and the frozen copy of the masked
    # activation they consume) are stop-gradients, so the finite-difference
    # oracle holds them at their nominal values: that is the function whose
    # derivative the backward pass computes. The stop-gradient placement
    # itself is covered by the reachability tests.
    cfg = routing.SwitchConfig(placement=1, rho=0.25, alpha=1.0, beta=1e-3)
    model = SwitchedAutoencoder([64, 32, 16, 32, 64],
                                ["tanh", "tanh", "tanh", "none"], cfg, seed=3)
    x = Tensor(rng.uniform(-1, 1, (4, 64)))
    named = model.named_parameters()
    for _, p in named:
        p.zero_grad()
    loss, _ = training.total_loss(x, model)
    ag.backward(loss)

    h0 = model.masked_latent(x, "train").data.copy()
    target0 = model.suffix.forward(Tensor(h0)).data.copy()
    actual0 = routing.pass_gap(model.light.forward(Tensor(h0)), Tensor(target0)).data.copy()

    def loss_value():
        h = model.masked_latent(x, "train")
        full = model.suffix.forward(h)
        l_recon = float(np.mean((full.data - x.data) ** 2))
        d_out = model.light.forward(Tensor(h0)).data
        l_lwd = float(np.mean((d_out - target0) ** 2))
        pred = model.switch.predict(Tensor(h0)).data
        l_switch = float(np.mean((pred - actual0) ** 2))
        l_comp = float(np.sum(np.abs(model.mask.w.data)))
        return l_recon + cfg.alpha * (l_switch + l_lwd) + cfg.beta * l_comp

    for name, p in named:
        fd = np.zeros_like(p.data)
        flat, fdflat = p.data.ravel(), fd.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = loss_value()
            flat[i] = orig - h
            fm = loss_value()
            flat[i] = orig
            fdflat[i] = (fp - fm) / (2 * h)
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        worst = max(worst, check_grad(analytic, fd))

    ok = worst < 1e-5
    verdict(1, "gradient correctness", ok, f"worst rel err {worst:.2e} < 1e-5")
    assert ok


# -- 2. loss identities --------------------------------------------------------


def test_criterion_2_loss_identities(default_run):
    ls, ll, lc = Tensor(0.37), Tensor(0.219), Tensor(5.31)
    base = routing.block_loss(ls, ll, lc, routing.SwitchConfig(alpha=1.3, beta=0.02))
    double = routing.block_loss(ls, ll, lc, routing.SwitchConfig(alpha=2.6, beta=0.02))
    lin_err = abs((double.item() - 0.02 * 5.31) - 2 * (base.item() - 0.02 * 5.31))
    assert lin_err < 1e-12

    cfg, result = default_run
    a, b = cfg.dsl.alpha, cfg.dsl.beta
    resum_err = max(
        abs(row["l_recon"] + a * row["l_switch"] + a * row["l_lwd"]
            + b * row["l_comp"] - row["l_total"])
        for row in result.metrics
    )
    assert resum_err < 1e-12

    plain = small_config(dsl={"alpha": 0.0, "beta": 0.0}, epochs=8)
    run = training.train(plain)
    reduction = all(row["l_total"] == row["l_recon"] for row in run.metrics)
    assert reduction
    init = run.checkpoints[0].params
    final = run.checkpoints[-1].params
    untouched = all(
        np.array_equal(init[name], final[name])
        for name in init if name.startswith(("switch.", "light."))
    )
    trained = any(
        not np.array_equal(init[name], final[name])
        for name in init if name.startswith(("prefix.", "suffix."))
    )
    ok = reduction and untouched and trained
    verdict(2, "loss identities", ok,
            f"linearity {lin_err:.1e}, resum {resum_err:.1e}, "
            f"alpha=beta=0 is reconstruction-only bitwise")
    assert ok


# -- 3. unsupervised contract --------------------------------------------------


def test_criterion_3_no_label_leakage():
    cfg = small_config(epochs=8)
    dataset = training.build_dataset(cfg.data)
    stripped = copy.deepcopy(dataset)
    for frame in stripped.train + stripped.calibrate + stripped.test:
        frame.difficulty = None
    a = training.train(cfg, dataset=dataset)
    b = training.train(cfg, dataset=stripped)
    same_metrics = a.metrics == b.metrics
    same_params = all(
        np.array_equal(a.checkpoints[-1].params[k], b.checkpoints[-1].params[k])
        for k in a.checkpoints[-1].params
    )
    ok = same_metrics and same_params
    verdict(3, "unsupervised contract", ok,
            "loss trajectory bitwise identical without difficulty labels")
    assert ok


# -- 4. routing separation -----------------------------------------------------


def test_criterion_4_routing_separation(default_run, calibrated):
    cfg, result = default_run
    report = ev.routing_stats(result.model, result.dataset.test, calibrated)
    sep = report.light_fraction[dat.EASY] - report.light_fraction[dat.HARD]
    ok = report.light_fraction[dat.EASY] >= report.light_fraction[dat.HARD] + 0.25
    verdict(4, "routing separation", ok,
            f"light(easy)={report.light_fraction[dat.EASY]:.3f} "
            f"light(hard)={report.light_fraction[dat.HARD]:.3f} sep={sep:+.3f} >= 0.25")
    assert ok


# -- 5. quality parity ---------------------------------------------------------


def test_criterion_5_quality_parity(default_run, calibrated):
    cfg, result = default_run
    parity = ev.quality_parity(result.model, result.dataset.test, calibrated)
    hard = [f for f in result.dataset.test if f.difficulty == dat.HARD]
    parity_hard = ev.quality_parity(result.model, hard, calibrated)
    ratio = parity.mse_mixed / parity.mse_full
    ok = ratio <= 1.05 and parity_hard.mse_light >= parity_hard.mse_full
    verdict(5, "quality parity", ok,
            f"mixed/full={ratio:.4f} <= 1.05; hard light {parity_hard.mse_light:.4f} "
            f">= hard full {parity_hard.mse_full:.4f}")
    assert ok


# -- 6. compute accounting -----------------------------------------------------


def test_criterion_6_compute_accounting(default_run, calibrated):
    cfg, result = default_run
    model = result.model
    assert cfg.dsl.rho == 0.25
    param_ratio = nn.param_count(model.light) / nn.param_count(model.suffix)
    mac_ratio = nn.mac_count(model.light) / nn.mac_count(model.suffix)

    frames = result.dataset.test[:200]
    base = model.macs_prefix() + model.macs_switch()
    instrumented = 0
    for frame in frames:
        with MacCounter() as counter:
            _, decisions = model.mixed_output(Tensor(frame.samples[None, :]), calibrated)
        chosen = model.macs_light() if decisions[0].kind == routing.LIGHT else model.macs_suffix()
        assert counter.total == base + chosen
        instrumented += counter.total
    report = ev.routing_stats(model, frames, calibrated)
    exact = report.expected_macs_mixed == instrumented / len(frames)

    ok = param_ratio <= 0.2 and mac_ratio <= 0.2 and exact
    verdict(6, "compute accounting", ok,
            f"params {param_ratio:.4f} <= 0.2, macs {mac_ratio:.4f} <= 0.2, "
            f"instrumented == analytic ({instrumented / len(frames):.1f}/frame)")
    assert ok


# -- 7. compression-weight sparsity trend ---------------------------------------


def test_criterion_7_sparsity_trend(sweep_points):
    s = {p.beta: p.sparsity for p in sweep_points}
    nondecreasing = all(
        sweep_points[i + 1].sparsity >= sweep_points[i].sparsity - 0.05
        for i in range(len(sweep_points) - 1)
    )
    gap = s[1e-1] - s[1e-5]
    ok = nondecreasing and gap >= 0.2
    verdict(7, "sparsity trend", ok,
            f"sparsity {s[1e-5]:.3f} -> {s[1e-3]:.3f} -> {s[1e-1]:.3f}, gap {gap:.3f} >= 0.2")
    assert ok


# -- 8. switch calibration progress ---------------------------------------------


def test_criterion_8_calibration_progress(default_run):
    cfg, result = default_run
    points = ev.calibration_progress(cfg, result.checkpoints, result.dataset.calibrate)
    mae_ratio = points[-1].mae / points[0].mae
    ok = mae_ratio < 0.5 and points[-1].pearson_r >= 0.8
    verdict(8, "calibration progress", ok,
            f"MAE {points[0].mae:.4f} -> {points[-1].mae:.4f} (ratio {mae_ratio:.3f} < 0.5), "
            f"r={points[-1].pearson_r:.3f} >= 0.8")
    assert ok


# -- 9. placement trend ----------------------------------------------------------


def test_criterion_9_placement_trend(ablation_rows):
    shallow, deep = ablation_rows[0], ablation_rows[-1]
    shares = [r.prefix_mac_share for r in ablation_rows]
    ok = deep.pearson_r >= shallow.pearson_r - 0.02 and shares == sorted(shares)
    verdict(9, "placement trend", ok,
            f"r by placement {[round(r.pearson_r, 3) for r in ablation_rows]}, "
            f"deepest {deep.pearson_r:.3f} >= shallowest {shallow.pearson_r:.3f} - 0.02")
    assert ok


# -- 10. determinism and persistence ---------------------------------------------


def test_criterion_10_determinism_and_persistence(default_run, tmp_path):
    cfg_small = small_config(epochs=5)
    r1 = training.train(cfg_small)
    r2 = training.train(cfg_small)
    p1, p2 = tmp_path / "m1.csv", tmp_path / "m2.csv"
    training.write_metrics_csv(r1.metrics, p1)
    training.write_metrics_csv(r2.metrics, p2)
    same_csv = p1.read_bytes() == p2.read_bytes()

    cfg, result = default_run
    x = Tensor(dat.frames_to_matrix(result.dataset.test[:32]))
    want = result.model.full_output(x).data
    path = tmp_path / "ckpt.json"
    training.save_checkpoint(result.checkpoints[-1], path)
    restored = training.restore_model(cfg, training.load_checkpoint(path))
    same_forward = np.array_equal(restored.full_output(x).data, want)

    ok = same_csv and same_forward
    verdict(10, "determinism and persistence", ok,
            "identical metrics CSVs across reruns; checkpoint round-trip "
            "preserves the forward pass bitwise")
    assert ok


# -- 11. WAV interface ------------------------------------------------------------


def test_criterion_11_wav_interface(tmp_path):
    def wav_bytes(samples, audio_format=1, channels=1, bits=16):
        pcm = struct.pack(f"<{len(samples)}h", *samples)
        body = b"WAVE"
        body += b"fmt " + struct.pack("<I", 16)
        body += struct.pack("<HHIIHH", audio_format, channels, 16000, 32000, 2, bits)
        body += b"data" + struct.pack("<I", len(pcm)) + pcm
        return b"RIFF" + struct.pack("<I", len(body)) + body

    good = tmp_path / "good.wav"
    good.write_bytes(wav_bytes([-32768, 32767] + [0] * 126))
    frames = dat.load_wav(good, frame_len=64)
    counts = len(frames) == 2
    values = frames[0].samples[0] == -1.0 and frames[0].samples[1] == 32767 / 32768

    drop = tmp_path / "drop.wav"
    drop.write_bytes(wav_bytes([5] * 100))
    truncation = len(dat.load_wav(drop, frame_len=64)) == 1

    named = []
    for kw, needle in (
        ({"audio_format": 3}, "audio format"),
        ({"channels": 2}, "channel count"),
        ({"bits": 8}, "bits per sample"),
    ):
        bad = tmp_path / "bad.wav"
        bad.write_bytes(wav_bytes([0] * 4, **kw))
        try:
            dat.load_wav(bad)
            named.append(False)
        except FormatError as exc:
            named.append(needle in str(exc))
    bad_magic = tmp_path / "magic.wav"
    bad_magic.write_bytes(b"JUNK" + wav_bytes([0] * 4)[4:])
    try:
        dat.load_wav(bad_magic)
        named.append(False)
    except FormatError as exc:
        named.append("RIFF" in str(exc))

    ok = counts and values and truncation and all(named)
    verdict(11, "wav interface", ok,
            "frame counts, -32768 -> -1.0 scaling, remainder drop, "
            "named-field rejections all hold")
    assert ok


# -- 12. downstream probe parity ---------------------------------------------------


def test_criterion_12_probe_parity(default_run, calibrated):
    cfg, result = default_run
    report = ev.downstream_probe(result.model, result.dataset, calibrated)
    diff = abs(report.acc_mixed - report.acc_full)
    ok = diff <= 0.03
    verdict(12, "downstream probe parity", ok,
            f"acc full={report.acc_full:.4f} light={report.acc_light:.4f} "
            f"mixed={report.acc_mixed:.4f}, |mixed-full|={diff:.4f} <= 0.03")
    assert ok


# -- run-to-convergence smoke (train contract, frozen after first implementation) --


def test_training_convergence_smoke(default_run):
    cfg, result = default_run
    initial_model = training.restore_model(cfg, result.checkpoints[0])
    initial = ev.reconstruction_loss(initial_model, result.dataset.train)
    final = result.metrics[-1]["l_recon"]
    ok = final < 0.25 * initial
    verdict(0, "convergence smoke", ok,
            f"l_recon {initial:.4f} -> {final:.4f} (< 0.25x initial)")
    assert ok
