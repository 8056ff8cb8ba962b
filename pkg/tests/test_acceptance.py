"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are collected in the
terminal summary) or ``python tests/test_acceptance.py``.
"""
import math
import os
import subprocess
import sys
import time
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest
import torch

from netaural import audio, centrality
from netaural import model as m5
from netaural.auralize import FlowState, auralize, auralize_dense_oracle, auralize_raw, flow_step, power_matrix
from netaural.graphs import from_edges, gen_ba, gen_er, gen_ws, permute
from netaural.training import TrainConfig, build_testset, evaluate, train

try:
    from .helpers import finite_difference_check, parse_riff, random_small_graphs
except ImportError:  # executed as a script
    sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
    from tests.helpers import finite_difference_check, parse_riff, random_small_graphs

RESULTS: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def cycle(n):
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def test_01_energy_conservation():
    rng = np.random.default_rng(1)
    worst, count = 0.0, 0
    for i in range(20):
        n = (50, 150)[i % 2]
        kind = i % 3
        seed = int(rng.integers(1 << 31))
        if kind == 0:
            g = gen_er(n, float(rng.uniform(0.02, 0.1)), seed)
        elif kind == 1:
            g = gen_ba(n, int(rng.integers(1, 6)), seed)
        else:
            g = gen_ws(n, int(rng.choice([2, 4, 6])), float(rng.uniform(0.1, 0.5)), seed)
        for m in (0.0, 0.9, 0.99):
            raw = auralize_raw(g, m, 10000)
            worst = max(worst, float(np.abs(raw.sum(axis=1) - g.n).max()))
            count += 1
    record(1, worst <= 1e-6, f"max |sum S_t - n| = {worst:.2e} over {count} runs (tol 1e-6)")


def test_02_zero_momentum_is_matrix_product():
    rng = np.random.default_rng(2)
    worst = 0.0
    graphs = random_small_graphs(50, max_n=20, seed=2, allow_isolated=False)
    for g in graphs:
        p = power_matrix(g)
        state = FlowState.initial(g, 0.0)
        s = rng.uniform(0.1, 3.0, size=g.n)
        for _ in range(5):
            expected = p.T @ s
            state, s = flow_step(state, s)
            worst = max(worst, float(np.abs(s - expected).max()))
    record(2, worst <= 1e-12, f"max |flow_step - P^T s| = {worst:.2e} on {len(graphs)} graphs (tol 1e-12)")


def test_03_stationary_limit():
    g = from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    raw = auralize_raw(g, 0.0, 500)
    err = float(np.abs(raw[-1] - [1, 1, 1.5, 0.5]).max())
    record(3, err <= 1e-8, f"|S_500 - [1, 1, 1.5, 0.5]| = {err:.2e} (tol 1e-8)")


def test_04_hand_computed_trace():
    p3 = from_edges(3, [(0, 1), (1, 2)])
    raw = auralize_raw(p3, 0.0, 4)
    exact = np.array_equal(raw, [[0.5, 2, 0.5], [1, 1, 1], [0.5, 2, 0.5], [1, 1, 1]])
    mean = float(np.abs(auralize(p3, 0.0, 4).mean(axis=0)).max())
    record(4, exact and mean <= 1e-15, f"trace exact={exact}, post-DC |column mean| = {mean:.1e} (tol 1e-15)")


def test_05_sparse_matches_dense():
    worst = 0.0
    graphs = random_small_graphs(50, max_n=20, seed=5)
    for g in graphs:
        for m in (0.0, 0.9, 0.99):
            worst = max(worst, float(np.abs(auralize(g, m, 200) - auralize_dense_oracle(g, m, 200)).max()))
    record(5, worst <= 1e-12, f"max |sparse - dense| = {worst:.2e} on {len(graphs)} graphs x 3 momenta (tol 1e-12)")


def test_06_symmetry_and_equivariance():
    s = auralize(cycle(10), 0.99, 10000)
    sym = max(float(np.abs(s[:, a] - s[:, b]).max()) for a, b in combinations(range(10), 2))
    rng = np.random.default_rng(6)
    perm_err = 0.0
    for g in random_small_graphs(20, max_n=20, seed=6):
        perm = rng.permutation(g.n)
        base = auralize(g, 0.99, 2000)
        moved = auralize(permute(g, perm), 0.99, 2000)
        perm_err = max(perm_err, float(np.abs(moved[:, perm] - base).max()))
    record(6, sym <= 1e-9 and perm_err <= 1e-9,
           f"C_10 column spread {sym:.2e}, permutation error {perm_err:.2e} on 20 graphs (tol 1e-9)")


def test_07_centrality_oracles():
    brandes = 0.0
    residual = 0.0
    graphs = random_small_graphs(100, max_n=10, seed=7)
    for g in graphs:
        brandes = max(brandes, float(np.abs(centrality.betweenness_centrality(g)
                                            - centrality.naive_betweenness_oracle(g)).max()))
        if g.m:
            x = centrality.eigenvector_centrality(g)
            a = g.adjacency()
            lam = float(x @ a @ x)
            residual = max(residual, float(np.linalg.norm(a @ x - lam * x)))
    star = from_edges(4, [(0, 1), (0, 2), (0, 3)])
    p3 = from_edges(3, [(0, 1), (1, 2)])
    closed = max(abs(centrality.betweenness_centrality(star)[0] - 1.0),
                 abs(centrality.betweenness_centrality(p3)[1] - 1.0),
                 float(np.abs(centrality.eigenvector_centrality(p3) - [0.5, 1 / math.sqrt(2), 0.5]).max()))
    ok = brandes <= 1e-12 and residual <= 1e-8 and closed <= 1e-9
    record(7, ok, f"Brandes vs enumeration {brandes:.1e} (1e-12), eigen residual {residual:.1e} (1e-8), "
                  f"closed forms {closed:.1e} (1e-9)")


def test_08_loss_correctness():
    examples = max(abs(m5.pearson([1, 2, 3], [2, 4, 6]) - 1.0),
                   abs(m5.pearson([1, 2, 3], [3, 2, 1]) + 1.0),
                   abs(m5.pearson([1, 2, 3, 4], [1, 3, 2, 4]) - 0.8))
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        c, p = rng.normal(size=30), rng.normal(size=30)
        a = float(np.exp(rng.uniform(np.log(1e-2), np.log(1e2))))
        b = float(rng.uniform(-100, 100))
        worst = max(worst, abs(m5.loss(a * c + b, p) - m5.loss(c, p)))
    record(8, examples <= 1e-12 and worst <= 1e-12,
           f"pearson examples error {examples:.1e}, affine invariance {worst:.1e} over 100 draws (tol 1e-12)")


def test_09_gradient_check():
    from netaural.graphs import giant_component

    g = giant_component(gen_er(16, 0.3, 4))
    s = auralize(g, 0.9, 400)
    ckpt = m5.m5_init(m5.M5Config(input_length=400, stage_channels=(4, 4, 8, 8)), 2)
    errors = finite_difference_check(ckpt, s, g.degree.astype(float), count=24, seed=9)
    worst = max(e[3] for e in errors)
    record(9, worst < 1e-3, f"max relative error {worst:.1e} over {len(errors)} parameters (tol 1e-3)")


@pytest.fixture(scope="module")
def desk_run():
    config = TrainConfig(measure="degree", epochs=50, train_n=50, samples=2000, generators=("er", "ba"),
                         channels=m5.SMALL_CHANNELS, seed=1)
    started = time.time()
    result = train(config)
    return result, time.time() - started


def test_10_desk_scale_learning(desk_run):
    result, seconds = desk_run
    final = [v for _, e, v in result.history if e == 50]
    final_loss = float(np.mean(final))
    testset = build_testset("small", seed=1010, per_generator=10, n=50, generators=("er", "ba"))
    rep = evaluate(result.checkpoint, testset, "degree", momentum=0.99)
    mean_rho = rep.summary()["mean"] if rep.summary()["count"] == 20 else float("nan")
    ok = final_loss < 0.3 and mean_rho >= 0.8 and seconds <= 1800
    record(10, ok, f"final-epoch loss {final_loss:.4f} (< 0.3), mean test rho {mean_rho:.4f} on 20 graphs "
                   f"(>= 0.8), training {seconds:.0f}s (<= 1800s)")


def test_11_size_extrapolation(desk_run):
    result, _ = desk_run
    started = time.time()
    testset = build_testset("large", seed=1111, per_generator=5, n=500, generators=("er",))
    rep = evaluate(result.checkpoint, testset, "degree", momentum=0.99)
    seconds = time.time() - started
    rhos = [r.rho if r.rho is not None else float("nan") for r in rep.records]
    lo = min(rhos)
    ok = lo >= 0.6 and seconds < 300
    record(11, ok, f"min rho {lo:.4f} over {len(rhos)} ER graphs with n ~ {testset[0].graph.n} (>= 0.6), "
                   f"{seconds:.0f}s (< 300s)")


def test_12_wav_bit_exact():
    clip = audio.waveform_to_clip(np.sin(np.arange(1001) * 0.05), 11025)
    data = audio.write_wav(clip)
    info = parse_riff(data)
    header_ok = (data[:4] == b"RIFF" and int.from_bytes(data[4:8], "little") == len(data) - 8
                 and (info["tag"], info["channels"], info["rate"], info["bits"]) == (1, 1, 11025, 16)
                 and info["byte_rate"] == 22050 and info["align"] == 2 and len(data) == 44 + 2 * 1001
                 and np.array_equal(info["samples"], clip.samples))
    one = audio.write_wav(audio.AudioClip(np.array([7], dtype=np.int16), 11025))
    header_ok = header_ok and len(one) == 46 and one[22:24] == b"\x01\x00"
    scaled = audio.waveform_to_clip([0.5, -1.0, 0.25], peak=0.9).samples.tolist()
    full = audio.waveform_to_clip([2, -2], peak=1.0).samples.tolist()
    ok = header_ok and scaled == [14745, -29490, 7373] and full == [32767, -32767]
    record(12, ok, f"header checks {header_ok}, scaling {scaled} and {full}")


def test_13_cli_determinism(tmp_path):
    env = {k: v for k, v in os.environ.items() if k != "NETAURAL_SEED"}
    times, dirs = [], []
    for name in ("first", "second"):
        out = tmp_path / name
        started = time.time()
        proc = subprocess.run([sys.executable, "-m", "netaural", "train", "--epochs", "2", "--seed", "1",
                               "--out", str(out)], capture_output=True, text=True, env=env, check=False)
        times.append(time.time() - started)
        assert proc.returncode == 0, proc.stderr
        dirs.append(out)
    same_hist = (dirs[0] / "history.csv").read_bytes() == (dirs[1] / "history.csv").read_bytes()
    same_ckpt = (dirs[0] / "checkpoint.m5").read_bytes() == (dirs[1] / "checkpoint.m5").read_bytes()
    slowest = max(times)
    record(13, same_hist and same_ckpt and slowest < 120,
           f"history identical {same_hist}, checkpoint identical {same_ckpt}, "
           f"slowest run {slowest:.0f}s (< 120s; {torch.get_num_threads()} CPU thread(s))")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
