"""MSE loss, gradients over scored triples, and the epoch loop."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import TrainConfig, is_power_of_two
from .data import LabeledTriple, Vocabulary, sample_negatives
from .errors import TrainingError
from .evaluate import evaluate_triples
from .params import Checkpoint, ParameterStore, adam_step, init_params, save_checkpoint
from .scoring import BatchLayout, build_batched, extract_scores, single_circuit
from .sim import (
    adjoint_gradient,
    finite_difference_gradient,
    parameter_shift_gradient,
    run_circuit,
    zero_state,
)

log = logging.getLogger(__name__)


def mse_loss(scores: Sequence[float], labels: Sequence[float]) -> float:
    """Mean of ``(score - label)^2`` over the batch."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.shape[0]} scores but {labels.shape[0]} labels")
    if scores.size == 0:
        raise ValueError("mse_loss needs at least one score")
    return float(np.mean((scores - labels) ** 2))


@dataclass
class BatchResult:
    loss: float
    scores: np.ndarray
    grads: dict
    executions: int


def _accumulate(total: dict, part: dict):
    for owner, g in part.items():
        if owner in total:
            total[owner] += g
        else:
            total[owner] = g.copy()


def _batched_step(batch, store):
    layout = BatchLayout(store.n_qubits, batch)
    circuit = build_batched(layout, store)
    angles = store.angle_map(circuit.owners)
    final = run_circuit(zero_state(layout.n_qubits), circuit, angles)
    scores = extract_scores(final, layout)
    labels = np.array([tr.y for tr in batch], dtype=float)
    weights = np.zeros(1 << layout.n_qubits)
    # dL/d|amp_i|^2 = (2/D) (delta_i - y_i) * 2^q, and 2^q == D here
    weights[: len(batch)] = 2.0 * (scores - labels)
    _, grads = adjoint_gradient(circuit, angles, weights, final_state=final)
    return BatchResult(mse_loss(scores, labels), scores, grads, 1)


def _single_step(batch, store, mode):
    d = len(batch)
    n = store.n_qubits
    scores = np.empty(d)
    grads: dict = {}
    for i, tr in enumerate(batch):
        circuit = single_circuit(tr.h, tr.r, tr.t, store)
        angles = store.angle_map(circuit.owners)
        final = run_circuit(zero_state(n), circuit, angles)
        amp0 = final.amplitudes[0]
        scores[i] = amp0.real ** 2 + amp0.imag ** 2
        weights = np.zeros(1 << n)
        weights[0] = (2.0 / d) * (scores[i] - tr.y)
        if mode == "exact":
            _, g = adjoint_gradient(circuit, angles, weights, final_state=final)
        elif mode == "parameter_shift_single":
            g = parameter_shift_gradient(circuit, angles, weights)
        elif mode == "finite_diff_debug":
            g = finite_difference_gradient(circuit, angles, weights)
        else:
            raise ValueError(f"unknown gradient mode {mode!r}")
        _accumulate(grads, g)
    labels = np.array([tr.y for tr in batch], dtype=float)
    return BatchResult(mse_loss(scores, labels), scores, grads, d)


def loss_and_gradient(batch: Sequence[LabeledTriple], store: ParameterStore,
                      batched: bool = True, mode: str = "exact") -> BatchResult:
    """Loss, scores and per-owner gradients of one batch.

    With ``batched`` (and a power-of-two batch) all triples are scored by a
    single superposition circuit; otherwise one circuit runs per triple.
    ``executions`` counts circuit executions.
    """
    if not batch:
        raise ValueError("empty batch")
    if batched and is_power_of_two(len(batch)):
        if mode != "exact":
            raise ValueError("batched scoring only supports exact gradients")
        return _batched_step(batch, store)
    return _single_step(batch, store, mode)


def loss_gradient(batch: Sequence[LabeledTriple], store: ParameterStore,
                  batched: bool = True, mode: str = "exact") -> dict:
    """Sparse gradient map {owner: dL/dangles} of the batch MSE loss."""
    return loss_and_gradient(batch, store, batched, mode).grads


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    valid_mrr: float | None
    wall_seconds: float
    circuit_executions: int
    batches: int
    batched_batches: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    store: ParameterStore
    log: list
    checkpoint: Checkpoint


def make_batches(positives: Sequence[LabeledTriple], order, config: TrainConfig,
                 vocab: Vocabulary, rng: np.random.Generator, known: set) -> list:
    """Group each shuffled positive with its negatives, ``batch_size`` triples per batch."""
    k = config.negatives_per_positive
    per_batch = config.batch_size // (1 + k)
    batches = []
    for start in range(0, len(order), per_batch):
        batch = []
        for idx in order[start:start + per_batch]:
            pos = positives[idx]
            batch.append(pos)
            batch.extend(sample_negatives(pos, vocab, k, rng, known, config.corrupt))
        batches.append(batch)
    return batches


def initial_store(config: TrainConfig, vocab: Vocabulary) -> ParameterStore:
    """The parameters ``train`` starts from for this config and vocabulary."""
    init_seq = np.random.SeedSequence(config.seed).spawn(2)[0]
    return init_params(vocab.n_entities, vocab.n_relations, config.n_qubits,
                       config.entity_layers, config.relation_layers, init_seq)


def train(config: TrainConfig, vocab: Vocabulary, train_triples: Sequence[LabeledTriple],
          valid_triples: Sequence[LabeledTriple] = (), out_dir=None,
          on_epoch: Callable[[EpochRecord], None] | None = None,
          eval_threads: int = 1) -> TrainResult:
    """Optimize entity and relation angles with lazy Adam on the batch MSE loss.

    The seed drives initialization and, through an independent stream,
    shuffling and negative sampling. With ``out_dir`` the latest checkpoint
    is rewritten after every epoch, ``final.ckpt`` at the end, and epoch
    records are appended to ``train_log.jsonl``.
    """
    config.validate_config()
    store = initial_store(config, vocab)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(2)[1])
    positives = list(train_triples)
    known_train = {tr.key for tr in positives}
    known_all = known_train | {tr.key for tr in valid_triples}
    out_dir = Path(out_dir) if out_dir is not None else None
    log_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / "train_log.jsonl"
        log_path.write_text("", encoding="utf-8")

    def snapshot(epoch):
        return Checkpoint(store.copy(), vocab, config.to_dict(), epoch, rng.bit_generator.state)

    records = []
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(positives))
        batches = make_batches(positives, order, config, vocab, rng, known_train)
        losses, executions, n_batched = [], 0, 0
        for batch in batches:
            use_batched = config.batched_scoring and len(batch) == config.batch_size
            res = loss_and_gradient(batch, store, use_batched, config.gradient_mode)
            if not np.isfinite(res.loss):
                raise TrainingError(f"non-finite loss in epoch {epoch}")
            adam_step(store, res.grads, config.learning_rate, config.beta1, config.beta2,
                      config.adam_eps)
            losses.append(res.loss)
            executions += res.executions
            n_batched += use_batched
        valid_mrr = None
        if config.validate and valid_triples:
            valid_mrr = evaluate_triples(valid_triples, store, known_all,
                                         threads=eval_threads).metrics.mrr
        rec = EpochRecord(epoch, float(np.mean(losses)) if losses else 0.0, valid_mrr,
                          time.perf_counter() - t0, executions, len(batches), n_batched)
        records.append(rec)
        log.info("epoch %d loss=%.6f valid_mrr=%s executions=%d (%.1fs)", epoch, rec.mean_loss,
                 "n/a" if valid_mrr is None else f"{valid_mrr:.4f}", executions, rec.wall_seconds)
        if out_dir is not None:
            save_checkpoint(out_dir / "latest.ckpt", snapshot(epoch + 1))
            with log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec.as_dict()) + "\n")
        if on_epoch is not None:
            on_epoch(rec)

    final = snapshot(config.epochs)
    if out_dir is not None:
        save_checkpoint(out_dir / "final.ckpt", final)
        save_checkpoint(out_dir / "latest.ckpt", final)
    return TrainResult(store, records, final)
