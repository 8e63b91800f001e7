"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line that is printed at the end of the
pytest run (see ``conftest.py``) and when this file is executed directly.
"""

import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from cgcn import oracles
from cgcn.io import archive_bytes, load_config, load_tudataset, parse_archive
from cgcn.model import model_forward, predict_scores
from cgcn.optim import NuclearBall, project_nuclear
from cgcn.synthetic import ring_path_task
from cgcn.trainer import TrainConfig, evaluate, generalization_gap_probe, split_dataset, train_layerwise

from conftest import MUTAG_DIR

REFERENCE_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "mutag_reference.cfg"
RESULTS: list[str] = []


def record(number: int, title: str, ok: bool, detail: str, seconds: float) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} {title}: {detail} ({seconds:.1f}s)"
    RESULTS.append(line)
    print(line)


def test_1_convexity_and_global_optimality():
    t0 = time.perf_counter()
    jensen = oracles.convexity_suite(0)
    optimum = oracles.init_independence_suite(0)
    dt = time.perf_counter() - t0
    ok = jensen.passed and optimum.passed and dt < 60
    record(1, "convexity", ok, f"jensen excess {jensen.max_deviation:.1e} over {jensen.cases} triples, "
           f"init-gap {optimum.max_deviation:.1e} rel", dt)
    assert jensen.cases >= 200 and ok


def test_2_nuclear_projection():
    t0 = time.perf_counter()
    grid = oracles.projection_suite(0)
    rng = np.random.default_rng(2)
    idem = expand = 0.0
    for _ in range(100):
        a, b = rng.normal(scale=2.0, size=(2, 4, 3))
        ball = NuclearBall(float(rng.uniform(0.2, 4.0)))
        pa, pb = project_nuclear(a, ball), project_nuclear(b, ball)
        idem = max(idem, float(np.abs(project_nuclear(pa, ball) - pa).max()))
        expand = max(expand, float(np.linalg.norm(pa - pb) - np.linalg.norm(a - b)))
    dt = time.perf_counter() - t0
    ok = grid.passed and idem <= 1e-9 and expand <= 1e-9 and dt < 60
    record(2, "nuclear projection", ok, f"grid dev {grid.max_deviation:.1e}, idempotence {idem:.1e}, "
           f"expansion {expand:.1e}", dt)
    assert ok


def test_3_column_norm_budget_bound():
    t0 = time.perf_counter()
    excess, adv_norm, adv_bound = oracles.budget_bound_draws(0, cases=200)
    dt = time.perf_counter() - t0
    ok = excess <= 1e-9 and np.isfinite(adv_norm) and dt < 10
    record(3, "nuclear bound", ok, f"max excess {excess:.1e} over 200 draws; adversarial draw "
           f"norm {adv_norm:.2f} vs bound {adv_bound:.2f} (not asserted)", dt)
    assert ok


def test_4_kernel_validity():
    t0 = time.perf_counter()
    psd = oracles.psd_suite(0, cases=100)
    series = oracles.mercer_suite(0, terms=60)
    dt = time.perf_counter() - t0
    ok = psd.passed and series.passed and dt < 30
    record(4, "kernel validity", ok, f"worst negative eigenvalue {psd.max_deviation:.1e}, "
           f"series dev {series.max_deviation:.1e}", dt)
    assert ok


def test_5_factorization():
    t0 = time.perf_counter()
    exact = oracles.exact_reconstruction_suite(0)
    _, errs = oracles.nystrom_errors(0, p_values=(5, 10, 20, 40), draws=10)
    monotone = all(b <= a for a, b in zip(errs[:-1], errs[1:]))
    dt = time.perf_counter() - t0
    ok = exact.passed and monotone and errs[-1] <= 1e-6 and dt < 60
    record(5, "factorization", ok, f"exact rel err {exact.max_deviation:.1e}, nystrom errors "
           + ", ".join(f"{e:.2e}" for e in errs), dt)
    assert ok


def test_6_gradient():
    t0 = time.perf_counter()
    fd = oracles.gradient_suite(0, cases=20)
    dt = time.perf_counter() - t0
    ok = fd.passed and dt < 30
    record(6, "gradient", ok, f"max relative error {fd.max_deviation:.1e} over {fd.cases} instances", dt)
    assert ok


@pytest.mark.slow
@pytest.mark.skipif(not MUTAG_DIR.exists(), reason="MUTAG not available")
def test_7_mutag_reproduction():
    t0 = time.perf_counter()
    ds = load_tudataset(MUTAG_DIR)
    base = load_config(REFERENCE_CONFIG)
    assert (base.hops, base.num_layers, base.hidden_widths, base.gamma, base.landmarks) == (1, 2, (32,), 0.2, 32)
    assert (base.optimizer, base.lr, base.epochs, base.split) == ("projected-adam", 1e-3, 200, (0.8, 0.1, 0.1))
    accs = []
    for seed in range(4):
        cfg = replace(base, seed=seed)
        train, _, test = split_dataset(ds, cfg.split, seed)
        model, _ = train_layerwise(train, cfg)
        accs.append(evaluate(model, test).accuracy)
    dt = time.perf_counter() - t0
    mean = float(np.mean(accs))
    ok = mean >= 0.75 and dt <= 600
    record(7, "MUTAG reproduction", ok, f"mean test accuracy {mean:.3f} (per seed "
           + ", ".join(f"{a:.3f}" for a in accs) + f") on {len(ds)} graphs, gate 0.75", dt)
    assert ok


@pytest.mark.slow
def test_8_generalization_gap_trend():
    t0 = time.perf_counter()
    cfg = TrainConfig(hidden_widths=())
    rows = generalization_gap_probe(cfg, ring_path_task, [50, 100, 200, 400, 800], range(10))
    gaps = [r.gap for r in rows]
    good = sum(b <= a for a, b in zip(gaps[:-1], gaps[1:]))
    dt = time.perf_counter() - t0
    ok = good >= 3 and dt < 300
    record(8, "generalization gap", ok, "gaps " + ", ".join(f"m={r.m}:{r.gap:.4f}" for r in rows)
           + f"; {good}/4 pairs nonincreasing", dt)
    assert ok


def test_9_structural_invariants():
    t0 = time.perf_counter()
    ds = ring_path_task(30, seed=11)
    cfg = TrainConfig(hidden_widths=(6,), landmarks=12, epochs=20, seed=3)
    model, _ = train_layerwise(ds, cfg)
    rng = np.random.default_rng(9)
    perm_dev = 0.0
    for _ in range(50):
        s = ds.samples[rng.integers(len(ds))]
        perm = rng.permutation(s.graph.num_nodes)
        x = np.empty_like(s.signal)
        x[perm] = s.signal
        diff = model_forward(model, s.graph, s.signal) - model_forward(model, s.graph.permuted(perm), x)
        perm_dev = max(perm_dev, float(np.abs(diff).max()))
    back = parse_archive(archive_bytes(model))
    graphs, signals = [s.graph for s in ds.samples], [s.signal for s in ds.samples]
    trip_dev = float(np.abs(predict_scores(back, graphs, signals) - predict_scores(model, graphs, signals)).max())
    again, _ = train_layerwise(ds, cfg)
    same_bytes = archive_bytes(again) == archive_bytes(model)
    dt = time.perf_counter() - t0
    ok = perm_dev <= 1e-9 and trip_dev <= 1e-12 and same_bytes and dt < 60
    record(9, "structural invariants", ok, f"permutation dev {perm_dev:.1e}, round-trip dev {trip_dev:.1e}, "
           f"deterministic archive {same_bytes}", dt)
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
