"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines inline;
they are also repeated in the terminal summary of any run that includes this file.
"""

import dataclasses
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from lcasc.augment import MixupConfig, SpecAugmentConfig
from lcasc.cli import main
from lcasc.cnn7 import build_cnn7
from lcasc.complexity import count_params, decomposition_ratios, ensemble_size
from lcasc.frontend import Spectrogram, split_patches
from lcasc.fusion import FusionInput, PredictionSet, average_patches, predict_label, prod_fusion
from lcasc.losses import cross_entropy_loss, kl_mixup_loss, l2_penalty
from lcasc.nn import DecomposedConvSpec, Network
from lcasc.nn import functional as F
from lcasc.nn.layers import (
    AvgPool, BatchNorm, Conv2d, DecomposedConv2d, Dropout, FullyConnected, GlobalAvgPool, ReLU, Softmax,
)
from lcasc.synth import toy_patches
from lcasc.training import TrainingConfig, accuracy, train

from gradcheck import check_layer, check_network_sampled
from oracles import naive_conv2d, naive_decomposed_conv, numeric_grad, rel_error

RESULTS = []


def record(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# 1 ---------------------------------------------------------------------------------

def test_c01_decomposition_ratio():
    spec = build_cnn7("crdc")
    ratios = decomposition_ratios(spec)
    counts_ok = True
    for layer in spec.layers:
        if layer.kind == "DecomposedConv2d":
            dc = DecomposedConvSpec(layer.in_channels, layer.out_channels)
            counts_ok &= Fraction(dc.weight_count) == Fraction(17, 16) * layer.in_channels * layer.out_channels
    ok = len(ratios) == 5 and set(ratios.values()) == {Fraction(17, 144)} and counts_ok
    record(1, ok, f"{len(ratios)} decomposed layers, ratios {sorted(set(map(str, ratios.values())))}, "
                  f"1/ratio = {144 / 17:.2f}")


# 2 ---------------------------------------------------------------------------------

def test_c02_size_ladder():
    reps = {v: count_params(build_cnn7(v)) for v in ("baseline", "cr", "crdc")}

    def either(rep, lo, hi, scale=1.0):
        return any(lo <= rep.kb(bn) * scale <= hi for bn in (True, False))

    base_ok = either(reps["baseline"], 1.05, 1.20, 1 / 1024)
    cr_ok = either(reps["cr"], 313 * 0.95, 313 * 1.05)
    crdc_ok = either(reps["crdc"], 42.6 * 0.95, 42.6 * 1.05)
    ens = {bn: ensemble_size([reps["crdc"]] * 3, include_bn=bn) for bn in (True, False)}
    ens_ok = min(ens.values()) <= 128
    detail = ", ".join(f"{v} {r.total_kb:.1f}/{r.total_kb_excl_bn:.1f} KB" for v, r in reps.items())
    record(2, base_ok and cr_ok and crdc_ok and ens_ok,
           f"(with/without BN) {detail}; 3x CRDC {ens[True]:.1f}/{ens[False]:.1f} KB")


# 3 ---------------------------------------------------------------------------------

def test_c03_cr_reduction():
    ratio = count_params(build_cnn7("cr")).total_params / count_params(build_cnn7("baseline")).total_params
    record(3, 0.24 <= ratio <= 0.31, f"CR/Baseline = {ratio:.4f}")


# 4 ---------------------------------------------------------------------------------

def test_c04_shape_ledger():
    expected = [(128, 128, 32), (64, 64, 32), (64, 64, 64), (32, 32, 64), (16, 16, 128), (128,), (10,)]
    t0 = time.perf_counter()
    net = Network(build_cnn7("baseline"), seed=0)
    trace = []
    net.forward(np.zeros((1, 128, 128, 3), dtype=np.float32), trace=trace)
    rows = [tuple(s) for name, s in trace if name.endswith("dropout")]
    rows.append(tuple(dict(trace)["fc"]))
    dt = time.perf_counter() - t0
    record(4, rows == expected and dt < 5, f"block outputs {rows} in {dt:.2f} s")


# 5 ---------------------------------------------------------------------------------

def test_c05_patch_count():
    spec = Spectrogram(np.zeros((128, 704, 3)), "MEL")
    n = len(split_patches(spec, 128, 0.5))
    record(5, n == 10, f"704 frames -> {n} patches")


# 6 ---------------------------------------------------------------------------------

def test_c06_conv_oracle():
    r = np.random.default_rng(6)
    worst, n_std, n_dc = 0.0, 0, 0
    t0 = time.perf_counter()
    for _ in range(100):
        h, w = r.integers(1, 7, 2)
        c_in, c_out = r.integers(1, 6, 2)
        k = int(r.choice([1, 3, 5]))
        x = r.standard_normal((h, w, c_in))
        wt = r.standard_normal((k, k, c_in, c_out))
        b = r.standard_normal(c_out)
        worst = max(worst, rel_error(F.conv2d_forward(x, wt, b), naive_conv2d(x, wt, b)))
        n_std += 1
    for _ in range(100):
        h, w = r.integers(1, 6, 2)
        c_in, c_out = 4 * r.integers(1, 3, 2)
        dc = DecomposedConvSpec(int(c_in), int(c_out))
        layer = DecomposedConv2d("d", dc.paths, rng=r, dtype=np.float64)
        for i in range(1, 5):
            layer.params[f"p{i}.bias"][:] = r.standard_normal(c_out // 4)
        x = r.standard_normal((h, w, c_in))
        ref = naive_decomposed_conv(
            x, [layer.params[f"p{i}.weight"] for i in range(1, 5)],
            [layer.params[f"p{i}.bias"] for i in range(1, 5)],
            [(p.in_start, p.in_stop) for p in dc.paths])
        worst = max(worst, rel_error(layer.forward(x[None])[0], ref))
        n_dc += 1
    dt = time.perf_counter() - t0
    record(6, worst < 1e-6 and dt < 30,
           f"{n_std} standard + {n_dc} decomposed shapes, max rel error {worst:.1e}, {dt:.1f} s")


# 7 ---------------------------------------------------------------------------------

def _layer_cases(r):
    bn = BatchNorm("bn", 3, dtype=np.float64)
    bn.params["gamma"][:] = r.uniform(0.5, 1.5, 3)
    bn.params["beta"][:] = r.standard_normal(3)
    return [
        ("Conv2d 3x3", Conv2d("c", 3, 4, 3, rng=r, dtype=np.float64), (2, 5, 4, 3)),
        ("Conv2d 1x1", Conv2d("c", 4, 2, 1, rng=r, dtype=np.float64), (2, 3, 3, 4)),
        ("DecomposedConv2d", DecomposedConv2d("d", DecomposedConvSpec(8, 4).paths, rng=r, dtype=np.float64),
         (2, 4, 3, 8)),
        ("BatchNorm", bn, (4, 3, 3, 3)),
        ("ReLU", ReLU("r"), (2, 3, 4, 2)),
        ("AvgPool", AvgPool("p", 2), (2, 4, 5, 3)),
        ("GlobalAvgPool", GlobalAvgPool("g"), (2, 3, 5, 4)),
        ("Dropout", Dropout("do", 0.3, rng=r), (3, 2, 2, 4)),
        ("FullyConnected", FullyConnected("fc", 6, 4, rng=r, dtype=np.float64), (5, 6)),
        ("Softmax", Softmax("s"), (4, 7)),
    ]


def test_c07_gradient_checks():
    t0 = time.perf_counter()
    results = []
    for seed in range(2):
        r = np.random.default_rng(100 + seed)
        for name, layer, shape in _layer_cases(r):
            err = max(check_layer(layer, r.standard_normal(shape), train=True, seed=seed).values())
            results.append((name, err))
        p = r.dirichlet(np.full(6, 4.0), 5)
        y_hard = np.eye(6)[r.integers(0, 6, 5)]
        y_soft = r.dirichlet(np.ones(6), 5)
        for name, fn, y in (("cross_entropy", cross_entropy_loss, y_hard), ("kl_mixup", kl_mixup_loss, y_soft)):
            results.append((name, rel_error(fn(p, y)[1], numeric_grad(lambda: fn(p, y)[0], p, h=1e-6))))
        # whole tiny CRDC network, one loss per seed
        net = Network(build_cnn7("crdc", 3, (8, 8, 3)), seed=seed, dtype=np.float64)
        x = r.standard_normal((4, 8, 8, 3))
        y = r.dirichlet(np.ones(3), 4) if seed else np.eye(3)[r.integers(0, 3, 4)]
        fn = kl_mixup_loss if seed else cross_entropy_loss
        err, _ = check_network_sampled(net, x, lambda probs: fn(probs, y), seed=seed)
        results.append(("CRDC network", err))
    dt = time.perf_counter() - t0
    kinds = {n.split()[0] for n, _ in results}
    worst_name, worst = max(results, key=lambda t: t[1])
    ok = len(results) >= 20 and worst < 1e-4 and dt < 60 and len(kinds) >= 12
    record(7, ok, f"{len(results)} configurations over {len(kinds)} layer/loss kinds, "
                  f"max rel error {worst:.1e} ({worst_name}), {dt:.1f} s")


# 8 ---------------------------------------------------------------------------------

def test_c08_loss_identities():
    r = np.random.default_rng(8)
    y = np.eye(10)[r.integers(0, 10, 16)]
    ce_uniform = cross_entropy_loss(np.full((16, 10), 0.1), y)[0]
    p = r.dirichlet(np.ones(10), 16)
    kl = kl_mixup_loss(p, y, lam=0.0)[0]
    n_ce = 16 * cross_entropy_loss(p, y)[0]
    params = [r.standard_normal((3, 3, 4, 8)), r.standard_normal(8)]
    lam = 1e-4
    penalty = kl_mixup_loss(y, y, params, lam)[0]
    expected = lam / 2 * sum(float(np.sum(t * t)) for t in params)
    ok = (abs(ce_uniform - math.log(10)) <= 1e-6 and abs(kl - n_ce) <= 1e-6
          and penalty == expected == l2_penalty(params, lam))
    record(8, ok, f"CE(uniform) - ln10 = {ce_uniform - math.log(10):.1e}, KL - N*CE = {kl - n_ce:.1e}, "
                  f"penalty {penalty:.6g} vs {expected:.6g}")


# 9 ---------------------------------------------------------------------------------

def test_c09_fusion_properties():
    r = np.random.default_rng(9)
    failures = []
    n = 1000
    for i in range(n):
        c = int(r.integers(2, 11))
        s_patch = int(r.integers(1, 12))
        probs = r.dirichlet(np.full(c, r.uniform(0.2, 3.0)), s_patch)
        avg = average_patches(PredictionSet(probs))
        if np.any(avg < 0) or abs(avg.sum() - 1) > 1e-9:
            failures.append((i, "simplex"))
        branches = r.dirichlet(np.ones(c), int(r.integers(1, 4)))
        fused = prod_fusion(FusionInput(branches))
        label = predict_label(fused)
        if predict_label(fused * r.uniform(1e-3, 1e3)) != label:
            failures.append((i, "rescale"))
        if not np.array_equal(prod_fusion(FusionInput(branches[:1])), branches[0]):
            failures.append((i, "identity"))
        same = prod_fusion(FusionInput(np.repeat(avg[None], 3, axis=0)))
        if predict_label(same) != predict_label(avg):
            failures.append((i, "identical branches"))
    record(9, not failures, f"{n} random sets, {len(failures)} violations {failures[:3]}")


# 10 --------------------------------------------------------------------------------

TOY_CFG = TrainingConfig(epochs=50, learning_rate=3e-3, batch_size=32, seed=0)
TOY_AUG = (MixupConfig(alpha=0.4), SpecAugmentConfig(max_time_width=6, max_freq_width=6))


def _toy_run(epochs):
    x, y = toy_patches(300, 3, (32, 32), seed=0)
    net = Network(build_cnn7("crdc", 3, (32, 32, 3)), seed=0)
    cfg = dataclasses.replace(TOY_CFG, epochs=epochs)
    result = train(net, x, y, cfg, *TOY_AUG)
    return net, result, accuracy(net, x, y)


@pytest.mark.slow
def test_c10_toy_training():
    t0 = time.perf_counter()
    _, full, acc = _toy_run(50)
    dt = time.perf_counter() - t0
    _, short, _ = _toy_run(3)
    deterministic = short.losses == full.losses[:3]
    loss_ratio = full.losses[-1] / full.losses[0]
    ok = acc >= 0.95 and loss_ratio <= 0.5 and deterministic and dt < 300
    record(10, ok, f"accuracy {acc:.3f}, loss {full.losses[0]:.3f} -> {full.losses[-1]:.3f} "
                   f"(ratio {loss_ratio:.3f}), rerun matches: {deterministic}, {dt:.0f} s")


# 11 --------------------------------------------------------------------------------

@pytest.mark.slow
def test_c11_end_to_end(tmp_path):
    t0 = time.perf_counter()
    codes = [main(["synth-dataset", "--out", str(tmp_path)])]
    config = str(tmp_path / "config.json")
    for kind in ("MEL", "GAM", "CQT"):
        codes.append(main(["extract", "--config", config, "--kind", kind]))
    for kind in ("MEL", "GAM", "CQT"):
        codes.append(main(["train", "--config", config, "--branch", kind]))
    out = tmp_path / "eval"
    codes.append(main(["eval", "--config", config, "--branch", "MEL", "--branch", "GAM", "--branch", "CQT",
                       "--fuse", "--out", str(out)]))
    dt = time.perf_counter() - t0
    rep = json.loads((out / "report_fused.json").read_text())
    conf = np.array(rep["confusion"])
    epochs = [len((p / "loss.csv").read_text().splitlines()) - 1 for p in (tmp_path / "runs").glob("*/*")
              if (p / "loss.csv").exists()]
    trace_acc = 100.0 * np.trace(conf) / conf.sum()
    ok = (codes == [0] * 8 and conf.shape == (3, 3) and conf.sum() == rep["total"] > 0
          and abs(trace_acc - rep["overall_accuracy"]) < 1e-9 and sorted(epochs) == [5, 5, 5] and dt < 600)
    record(11, ok, f"exit codes {codes}, fused accuracy {rep['overall_accuracy']:.1f}% "
                   f"= trace ratio {trace_acc:.1f}%, {dt:.0f} s")
