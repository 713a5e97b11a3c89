"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""
import json
import os
import time

import numpy as np
import pytest

from qkge.config import TrainConfig
from qkge.data import LabeledTriple, Vocabulary, load_dataset
from qkge.evaluate import ScoreCache, evaluate_triples, filtered_rank, metrics
from qkge.params import init_params
from qkge.scoring import BatchLayout, resource_estimate, score_batch, score_single
from qkge.sim import Statevector, adjoint_gradient, inverse, run_circuit, zero_state
from qkge.train import train

import oracle
from helpers import central_difference, random_circuit, random_state, record

UMLS_TARGET = {"mrr": 0.799, "hits1": 0.707, "hits10": 0.941}


def test_criterion_1_batched_equals_sequential():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        size = int(rng.choice([1, 2, 4, 8]))
        n = int(rng.choice([2, 4]))
        layers = int(rng.choice([1, 2, 4]))
        store = init_params(12, 4, n, layers, 1, int(rng.integers(2**31)))
        triples = [(int(rng.integers(12)), int(rng.integers(4)), int(rng.integers(12)))
                   for _ in range(size)]
        batched = score_batch(triples, store)
        single = np.array([score_single(*tr, store) for tr in triples])
        worst = max(worst, float(np.max(np.abs(batched - single))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 60
    record(1, "batched vs single scores over 200 batches", ok,
           f"max diff {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_execution_reduction():
    est = resource_estimate(4, 4, 2, 1)
    layout = BatchLayout(4, [(0, 0, 1)] * 4)
    vocab = Vocabulary([f"e{i}" for i in range(20)], ["r", "s"])
    positives = [LabeledTriple(i, i % 2, (3 * i + 1) % 20) for i in range(16)]
    runs = {}
    for batched in (True, False):
        cfg = TrainConfig(epochs=1, batch_size=4, seed=0, batched_scoring=batched)
        runs[batched] = train(cfg, vocab, positives).log[0]
    per_batch = {b: rec.circuit_executions / rec.batches for b, rec in runs.items()}
    ok = (est.executions_batched == 1 and est.executions_sequential == 4
          and est.n_address_qubits == 2 and layout.n_address_qubits == 2
          and per_batch == {True: 1.0, False: 4.0})
    record(2, "B=4 uses 1 execution vs 4 and 2 address qubits", ok,
           f"estimator {est.executions_batched} vs {est.executions_sequential}, "
           f"log {per_batch[True]:g} vs {per_batch[False]:g} per batch")
    assert ok


def _weighted(circuit, angles, weights, owner, x):
    a = dict(angles)
    a[owner] = x
    state = oracle.circuit_matrix(circuit, a) @ oracle.zero(circuit.n_qubits)
    return float(np.dot(weights, np.abs(state) ** 2))


def test_criterion_3_gradients_match_finite_differences():
    rng = np.random.default_rng(77)
    t0 = time.perf_counter()
    worst, conditioned = 0.0, 0
    for _ in range(50):
        n = int(rng.integers(1, 7))
        n_angles = 3 * int(rng.integers(1, 14))  # at most 39
        circuit, angles = random_circuit(rng, n, n_angles, share=bool(rng.random() < 0.5))
        conditioned += any(g.condition is not None for g in circuit.gates)
        weights = rng.normal(size=2 ** n)
        _, grads = adjoint_gradient(circuit, angles, weights)
        fd = central_difference(lambda x: _weighted(circuit, angles, weights, "x", x),
                                angles["x"], 1e-5)
        worst = max(worst, float(np.max(np.abs(grads["x"] - fd))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 120 and conditioned > 0
    record(3, "exact gradients vs central differences on 50 circuits", ok,
           f"max diff {worst:.2e}, {conditioned} with conditions, {elapsed:.1f}s")
    assert ok


def test_criterion_4_simulator_invariants():
    rng = np.random.default_rng(4)
    drift, round_trip = 0.0, 0.0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        circuit, angles = random_circuit(rng, n, 3 * int(rng.integers(1, 14)), share=True)
        start = Statevector(random_state(rng, n))
        out = run_circuit(start, circuit, angles)
        drift = max(drift, abs(out.norm_squared() - 1.0))
        back = run_circuit(out, inverse(circuit), angles)
        round_trip = max(round_trip, float(np.max(np.abs(back.amplitudes - start.amplitudes))))
        zero_out = run_circuit(zero_state(n), circuit, angles)
        drift = max(drift, abs(zero_out.norm_squared() - 1.0))
    ok = drift <= 1e-10 and round_trip <= 1e-9
    record(4, "norm preservation and round-trip identity", ok,
           f"norm drift {drift:.1e}, round trip {round_trip:.1e}")
    assert ok


def _brute_rank(h, r, t, store, known):
    target = score_single(h, r, t, store)
    others = [score_single(h, r, e, store) for e in range(store.n_entities)
              if e != t and (h, r, e) not in known]
    return 1 + sum(s >= target for s in others)


def test_criterion_5_metrics_oracle():
    checks = []
    m = metrics([1, 2, 4])
    checks.append(m.mrr == (1 + 0.5 + 0.25) / 3 and m.hits1 == 1 / 3 and m.hits10 == 1.0)
    ones = metrics([1, 1, 1, 1])
    checks.append(ones.mrr == ones.hits1 == ones.hits10 == 1.0)
    far = metrics([100])
    checks.append(far.mrr == 0.01 and far.hits1 == 0.0 and far.hits10 == 0.0)
    checks.append(filtered_rank(np.full(5, 0.3), 2) == 5)

    rng = np.random.default_rng(10)
    store = init_params(10, 2, 4, 2, 1, 10)
    known = {(int(rng.integers(10)), int(rng.integers(2)), int(rng.integers(10))) for _ in range(30)}
    triples = sorted(known)
    report = evaluate_triples(triples, store, known, cache=ScoreCache(store))
    brute = [_brute_rank(h, r, t, store, known) for h, r, t in triples]
    checks.append([rec.rank_pessimistic for rec in report.records] == brute)
    checks.append(report.metrics.mrr == metrics(brute).mrr)
    ok = all(checks)
    record(5, "metric arithmetic and brute-force filtered ranks", ok,
           f"{sum(checks)}/{len(checks)} checks, {len(triples)} triples on 10 entities")
    assert ok


TOY_VOCAB = Vocabulary(["a", "b", "c"], ["links"])
TOY_TRAIN = [LabeledTriple(0, 0, 1), LabeledTriple(1, 0, 2)]


def test_criterion_6_toy_convergence(tmp_path):
    t0 = time.perf_counter()
    cfg = TrainConfig(learning_rate=0.1, epochs=50, seed=0)
    a = train(cfg, TOY_VOCAB, TOY_TRAIN, out_dir=tmp_path / "a")
    b = train(cfg, TOY_VOCAB, TOY_TRAIN, out_dir=tmp_path / "b")
    elapsed = time.perf_counter() - t0
    loss = a.log[-1].mean_loss
    mrr = evaluate_triples(TOY_TRAIN, a.store, {t.key for t in TOY_TRAIN}).metrics.mrr
    same = (tmp_path / "a" / "final.ckpt").read_bytes() == (tmp_path / "b" / "final.ckpt").read_bytes()
    ok = loss <= 0.05 and mrr >= 0.9 and same and elapsed < 60
    record(6, "toy graph converges within 50 epochs", ok,
           f"loss {loss:.4f}, train MRR {mrr:.3f}, repeatable {same}, {elapsed:.1f}s for two runs")
    assert ok


@pytest.mark.skipif(os.environ.get("QKGE_SKIP_UMLS") == "1", reason="QKGE_SKIP_UMLS=1")
def test_criterion_7_umls_reproduction(umls_dir):
    ds = load_dataset(umls_dir)
    results = []
    for seed in range(3):
        t0 = time.perf_counter()
        # library defaults except depth, which follows the reference 4-layer row
        cfg = TrainConfig(entity_layers=4, seed=seed)
        res = train(cfg, ds.vocab, ds.train, ds.valid)
        m = evaluate_triples(ds.test, res.store, ds.known()).metrics
        results.append((seed, m, time.perf_counter() - t0))
        if m.mrr >= 0.70 and m.hits10 >= 0.88:
            break
    best = max(results, key=lambda x: x[1].mrr)
    ok = any(m.mrr >= 0.70 and m.hits10 >= 0.88 for _, m, _ in results)
    detail = "; ".join(f"seed {s}: MRR {m.mrr:.3f} H@1 {m.hits1:.3f} H@10 {m.hits10:.3f} "
                       f"({t / 60:.1f} min)" for s, m, t in results)
    record(7, "UMLS test MRR >= 0.70 and Hits@10 >= 0.88", ok,
           f"{detail}; reference MRR {UMLS_TARGET['mrr']} H@10 {UMLS_TARGET['hits10']}")
    assert ok, f"best seed {best[0]} reached MRR {best[1].mrr:.3f}, Hits@10 {best[1].hits10:.3f}"


def test_criterion_8_determinism(tmp_path, umls_dir):
    ds = load_dataset(umls_dir)
    subset = ds.train[:256]
    cfg = TrainConfig(epochs=2, seed=5, learning_rate=0.01)
    logs = []
    for name in ("a", "b"):
        train(cfg, ds.vocab, subset, ds.valid[:64], out_dir=tmp_path / name)
        rows = [json.loads(x) for x in (tmp_path / name / "train_log.jsonl").read_text().splitlines()]
        for row in rows:
            row.pop("wall_seconds")  # elapsed time is the only nondeterministic field
        logs.append(rows)
    same_ckpt = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
                    for f in ("final.ckpt", "latest.ckpt"))
    ok = same_ckpt and logs[0] == logs[1] and len(logs[0]) == 2
    record(8, "identical seed and config give identical checkpoints and logs", ok,
           f"checkpoints identical {same_ckpt}, log records identical {logs[0] == logs[1]}")
    assert ok
