"""Numbered acceptance criteria, each at its stated tolerance and time budget.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints one
PASS/FAIL line per criterion. Numba kernels are compiled once by a warm-up
fixture so the time budgets measure the work, not JIT compilation.
"""

import math
import time

import numpy as np
import pytest

from mcumlp import resource_model as rm
from mcumlp.codec import TargetCodec
from mcumlp.data import load_fixture
from mcumlp.matrix import hadamard, mat_product, trace_product
from mcumlp.mlp import (
    Dataset,
    TrainConfig,
    backprop_gradients,
    em,
    evaluate,
    forward,
    init_weights,
    loss_gradients,
    predict,
    train,
)
from mcumlp.robot import load_map, run_episode
from mcumlp.errors import IntegrityError
from mcumlp.weights import decode_weights, encode_weights

import oracles

XOR = Dataset([[0, 0, 1, 1], [0, 1, 0, 1]], [[0, 1, 1, 0]])
ROBOT_EPOCHS = 3000
SIM_SEED = 0
SIM_DURATION = 300.0


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    net = init_weights((2, 2, 1), 0)
    train(net, XOR, TrainConfig(max_epochs=2))
    for module in rm.MODULES:
        rm._stage_callable(module, 2)()
    mat_product([[1.0]], [[1.0]]), hadamard([[1.0]], [[1.0]]), trace_product([[1.0]], [[1.0]])


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False

    def check(self):
        assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


def train_encoded(name, widths, seed):
    ds = load_fixture(name)
    codec = TargetCodec.fit(ds.targets)
    enc = Dataset(ds.inputs, codec.encode(ds.targets))
    cfg = TrainConfig(eta=0.9, alpha=0.8, batch_size=enc.n_samples, max_epochs=ROBOT_EPOCHS,
                      seed=seed)
    net, _ = train(init_weights(widths, seed), enc, cfg)
    return net, codec, evaluate(net, enc)[1]


@pytest.mark.acceptance(1, "gradient oracle")
def test_gradient_oracle(request):
    rng = np.random.default_rng(20240601)
    passed = total = 0
    with Budget(10) as budget:
        for _ in range(50):
            widths = (int(rng.integers(1, 4)), int(rng.integers(1, 6)), int(rng.integers(1, 3)))
            n = int(rng.integers(1, 9))
            net = init_weights(widths, int(rng.integers(1 << 31)))
            x = rng.uniform(-1, 1, (widths[0], n)).astype(np.float32)
            d = rng.uniform(0, 1, (widths[-1], n)).astype(np.float32)
            outputs = forward(net, x)
            analytic = loss_gradients(outputs, backprop_gradients(net, outputs, em(outputs[-1], d)))
            numeric = oracles.central_difference(net.weights, x, d, h=1e-3)
            for a, f in zip(analytic, numeric):
                a = a.astype(np.float64).ravel()
                f = f.ravel()
                scale = np.maximum(np.abs(a), np.abs(f))
                rel = np.divide(np.abs(a - f), scale, out=np.zeros_like(scale), where=scale > 0)
                passed += int((rel < 1e-3).sum())
                total += a.size
    frac = passed / total
    request.node.acceptance_detail = f"{passed}/{total} coordinates ({frac:.2%}) under 1e-3"
    assert frac >= 0.99
    budget.check()


@pytest.mark.acceptance(2, "XOR convergence at H1 in {2, 20, 38}")
def test_xor_convergence(request):
    cfg = TrainConfig(eta=0.9, alpha=0.8, batch_size=4, max_epochs=2000)
    counts = {}
    with Budget(30) as budget:
        for h1 in (2, 20, 38):
            ok = 0
            for seed in range(10):
                net, trace = train(init_weights((2, h1, 1), seed), XOR,
                                   TrainConfig(**{**cfg.__dict__, "seed": seed}))
                assert all(math.isfinite(v) for v in trace)
                ok += evaluate(net, XOR)[1] < 0.01
            counts[h1] = ok
    request.node.acceptance_detail = ", ".join(f"H1={h}: {c}/10" for h, c in counts.items())
    assert all(c >= 8 for c in counts.values())
    budget.check()


@pytest.mark.acceptance(3, "timing-law refit of the reference table")
def test_timing_refit(request, capsys):
    with Budget(1) as budget:
        samples = rm.load_paper_timing_fixture()
        ffm1 = rm.fit_linear(rm.select(samples, "FFM-1"))
        em_fit = rm.fit_linear(rm.select(samples, "EM"))
        text, notes = rm.format_fit_report(rm.fit_report(samples))
        print(text)
        print("\n".join(notes))
    printed = capsys.readouterr().out
    request.node.acceptance_detail = (
        f"FFM-1 slope {ffm1.slope:.4f} R2 {ffm1.r_squared:.4f}; EM slope {em_fit.slope:.2g}"
    )
    assert abs(ffm1.slope - 1.03) <= 0.05 and ffm1.r_squared > 0.99
    assert abs(em_fit.slope) < 0.005
    assert "FFM-1" in printed and "11.6,20.52,MISMATCH" in printed
    assert any(n.startswith("FFM-1: published t = 11.6 * H + 20.52") for n in notes)
    budget.check()


@pytest.mark.acceptance(4, "live FFM-1 linearity")
def test_live_linearity(request):
    with Budget(60) as budget:
        samples = rm.benchmark_sweep("FFM-1", range(2, 39, 2), reps=101)
        fit = rm.fit_linear(samples)
    request.node.acceptance_detail = (
        f"slope {fit.slope * 1e3:.3f} us/neuron, R2 {fit.r_squared:.4f}"
    )
    assert fit.slope > 0 and fit.r_squared >= 0.98
    budget.check()


@pytest.mark.acceptance(5, "SRAM budget and monotonicity")
def test_memory_budget(request):
    with Budget(1) as budget:
        est = rm.estimate_sram((2, 38, 1), batch=4)
        rng = np.random.default_rng(5)
        violations = 0
        for _ in range(100):
            widths = [int(w) for w in rng.integers(1, 65, size=int(rng.integers(2, 6)))]
            batch = int(rng.integers(1, 9))
            base = rm.estimate_sram(widths, batch).total
            k = int(rng.integers(len(widths)))
            grown = list(widths)
            grown[k] += 1
            violations += rm.estimate_sram(grown, batch).total <= base
            violations += rm.estimate_sram(widths, batch + 1).total <= base
    request.node.acceptance_detail = f"(2,38,1) N=4 total {est.total} B in {len(est.parts)} items"
    assert est.total < 8192 and len(est.parts) > 1 and "total" in est.report()
    assert violations == 0
    budget.check()


@pytest.fixture(scope="module")
def robot_runs():
    start = time.perf_counter()
    runs = {
        "robot1": [train_encoded("robot1", (3, 5, 2), s) for s in range(10)],
        "robot3": [train_encoded("robot3", (3, 10, 2), s) for s in range(10)],
    }
    return runs, time.perf_counter() - start


@pytest.mark.acceptance(6, "robot dataset training MSE")
def test_robot_training(request, robot_runs):
    runs, elapsed = robot_runs
    mse1 = [r[2] for r in runs["robot1"]]
    mse3 = [r[2] for r in runs["robot3"]]
    ok1 = sum(v <= 0.05 for v in mse1)
    ok3 = sum(v <= 0.06 for v in mse3)
    request.node.acceptance_detail = (
        f"dataset 1: {ok1}/10 <= 0.05 (median {np.median(mse1):.4f}); "
        f"dataset 3: {ok3}/10 <= 0.06 (median {np.median(mse3):.4f})"
    )
    assert ok1 > 5 and ok3 > 5
    assert elapsed < 60, f"took {elapsed:.1f}s"


@pytest.mark.acceptance(7, "behavioural ordering of robot controllers")
def test_behavioural_ordering(request, robot_runs):
    runs, _ = robot_runs
    net1, codec1, _ = runs["robot1"][SIM_SEED]
    net3, codec3, _ = runs["robot3"][SIM_SEED]
    cluttered, empty = load_map("cluttered"), load_map("empty")
    d1 = run_episode(cluttered, net1, codec1, SIM_DURATION)
    d3 = run_episode(cluttered, net3, codec3, SIM_DURATION)
    drift = run_episode(empty, net1, codec1, 60.0)
    request.node.acceptance_detail = (
        f"cluttered {SIM_DURATION:.0f}s seed {SIM_SEED}: dataset-3 {d3.collisions} vs "
        f"dataset-1 {d1.collisions} collisions; empty 60s net {drift.net_displacement():.2f} m"
    )
    assert d3.collisions < d1.collisions
    assert drift.net_displacement() < 2.0


@pytest.mark.acceptance(8, "weights file round trip and corruption detection")
def test_serialization(request):
    rng = np.random.default_rng(8)
    detected = 0
    for _ in range(100):
        widths = tuple(int(w) for w in rng.integers(1, 12, size=int(rng.integers(2, 5))))
        net = init_weights(widths, int(rng.integers(1 << 31)))
        codec = TargetCodec(-float(rng.uniform(0.1, 2)), float(rng.uniform(0.1, 2)))
        blob = encode_weights(net, codec)
        back, _ = decode_weights(blob)
        x = rng.uniform(-3, 3, (widths[0], 5)).astype(np.float32)
        assert predict(back, x).tobytes() == predict(net, x).tobytes()
        bad = bytearray(blob)
        bad[int(rng.integers(len(blob)))] ^= int(rng.integers(1, 256))
        with pytest.raises(IntegrityError):
            decode_weights(bytes(bad))
        detected += 1
    # Exhaustive sweep on the last file: every byte, every nonzero XOR mask.
    for pos in range(len(blob)):
        for mask in range(1, 256):
            bad = bytearray(blob)
            bad[pos] ^= mask
            with pytest.raises(IntegrityError):
                decode_weights(bytes(bad))
    request.node.acceptance_detail = (
        f"100/100 bit-identical, {detected}/100 random corruptions caught, "
        f"all {len(blob) * 255} single-byte edits of one file caught"
    )


@pytest.mark.acceptance(9, "kernel oracle equivalence")
def test_kernel_oracles(request):
    rng = np.random.default_rng(9)
    for _ in range(1000):
        m, p, n = (int(v) for v in rng.integers(1, 17, size=3))
        a = rng.integers(-50, 51, (m, p)).astype(np.float32)
        b = rng.integers(-50, 51, (p, n)).astype(np.float32)
        c = rng.integers(-50, 51, (m, p)).astype(np.float32)
        assert mat_product(a, b).tolist() == oracles.naive_matmul(a, b)
        assert hadamard(a, c).tolist() == oracles.naive_hadamard(a, c)
        assert float(trace_product(a, c)) == oracles.naive_trace_ata(a, c)
    request.node.acceptance_detail = "1000/1000 instances exact"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
