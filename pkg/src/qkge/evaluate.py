"""Filtered link-prediction evaluation (tail ranking, MRR, Hits@k)."""
from __future__ import annotations

import json
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

import numpy as np

from .ansatz import entangling_layers, entity_prep
from .data import load_dataset
from .errors import DataError, ParameterError
from .params import ParameterStore, entity_owner, load_checkpoint, relation_owner
from .sim import circuit_unitary, run_circuit, zero_state

TIE_POLICIES = ("pessimistic", "optimistic")


def percent(x: float) -> float:
    """Fraction to percent, rounded half-up to one decimal."""
    return float(Decimal(repr(100.0 * x)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass
class Metrics:
    mrr: float
    hits1: float
    hits10: float
    ranks: list
    n_evaluated: int

    def as_dict(self) -> dict:
        return {
            "mrr": self.mrr, "hits1": self.hits1, "hits10": self.hits10,
            "mrr_percent": percent(self.mrr), "hits1_percent": percent(self.hits1),
            "hits10_percent": percent(self.hits10), "n_evaluated": self.n_evaluated,
        }


def metrics(ranks: Sequence[int]) -> Metrics:
    ranks = [int(r) for r in ranks]
    if not ranks:
        raise ValueError("metrics need at least one rank")
    if min(ranks) < 1:
        raise ValueError("ranks start at 1")
    n = len(ranks)
    return Metrics(
        mrr=sum(1.0 / r for r in ranks) / n,
        hits1=sum(r <= 1 for r in ranks) / n,
        hits10=sum(r <= 10 for r in ranks) / n,
        ranks=ranks,
        n_evaluated=n,
    )


def filtered_rank(scores: np.ndarray, target: int, exclude=(), ties: str = "pessimistic") -> int:
    """Rank of ``scores[target]`` among candidates not in ``exclude``.

    ``exclude`` lists other known-true candidates; ``target`` itself is
    always kept. Pessimistic ties count every equal-scored candidate as
    ranked ahead; optimistic ties count none.
    """
    if ties not in TIE_POLICIES:
        raise ValueError(f"ties must be one of {TIE_POLICIES}, got {ties!r}")
    keep = np.ones(scores.shape[0], dtype=bool)
    keep[list(exclude)] = False
    keep[target] = False
    s = scores[keep]
    ref = scores[target]
    rank = 1 + int(np.count_nonzero(s > ref))
    if ties == "pessimistic":
        rank += int(np.count_nonzero(s == ref))
    return rank


class ScoreCache:
    """Entity states and relation unitaries computed once per parameter snapshot."""

    def __init__(self, store: ParameterStore):
        self.store = store
        n = store.n_qubits
        zero = zero_state(n)
        self.states = np.empty((store.n_entities, 1 << n), dtype=np.complex128)
        for e in range(store.n_entities):
            circuit = entity_prep(store.entity_shape, owner=entity_owner(e))
            self.states[e] = run_circuit(zero, circuit, store.angle_map(circuit.owners)).amplitudes
        self.unitaries = np.empty((store.n_relations, 1 << n, 1 << n), dtype=np.complex128)
        for r in range(store.n_relations):
            circuit = entangling_layers(store.relation_shape, owner=relation_owner(r))
            self.unitaries[r] = circuit_unitary(circuit, store.angle_map(circuit.owners))

    def tail_scores(self, h: int, r: int) -> np.ndarray:
        """Score of (h, r, e) for every entity e."""
        self._check(h, r)
        moved = self.unitaries[r] @ self.states[h]
        amp = self.states.conj() @ moved
        return amp.real ** 2 + amp.imag ** 2

    def head_scores(self, r: int, t: int) -> np.ndarray:
        """Score of (e, r, t) for every entity e."""
        self._check(t, r)
        back = self.unitaries[r].conj().T @ self.states[t]
        amp = self.states @ back.conj()
        return amp.real ** 2 + amp.imag ** 2

    def _check(self, e, r):
        if not 0 <= e < self.store.n_entities:
            raise ParameterError(f"no entity with id {e}")
        if not 0 <= r < self.store.n_relations:
            raise ParameterError(f"no relation with id {r}")


def _index_known(known) -> tuple:
    tails, heads = defaultdict(list), defaultdict(list)
    for h, r, t in known:
        tails[(h, r)].append(t)
        heads[(r, t)].append(h)
    return tails, heads


def rank_tail(triple, cache: ScoreCache, known, ties: str = "pessimistic") -> int:
    """Filtered rank of the true tail of ``triple`` against every entity."""
    h, r, t = triple[:3]
    exclude = [e for (kh, kr, e) in known if kh == h and kr == r and e != t]
    return filtered_rank(cache.tail_scores(h, r), t, exclude, ties)


@dataclass
class RankRecord:
    h: int
    r: int
    t: int
    rank_pessimistic: int
    rank_optimistic: int
    rank_raw: int

    def rank(self, ties: str) -> int:
        return self.rank_optimistic if ties == "optimistic" else self.rank_pessimistic


@dataclass
class EvalReport:
    metrics: Metrics
    metrics_optimistic: Metrics
    metrics_pessimistic: Metrics
    records: list = field(default_factory=list)
    ties: str = "pessimistic"
    side: str = "tail"

    def histogram(self) -> dict:
        counts = Counter(r.rank(self.ties) for r in self.records)
        return {str(k): counts[k] for k in sorted(counts)}

    def as_dict(self, vocab=None, config=None) -> dict:
        def name(kind, i):
            if vocab is None:
                return i
            return vocab.entities[i] if kind == "e" else vocab.relations[i]

        return {
            "side": self.side,
            "ties": self.ties,
            **self.metrics.as_dict(),
            "pessimistic": self.metrics_pessimistic.as_dict(),
            "optimistic": self.metrics_optimistic.as_dict(),
            "rank_histogram": self.histogram(),
            "config": config,
            "triples": [
                {"h": name("e", rec.h), "r": name("r", rec.r), "t": name("e", rec.t),
                 "rank": rec.rank(self.ties), "rank_pessimistic": rec.rank_pessimistic,
                 "rank_optimistic": rec.rank_optimistic, "rank_raw": rec.rank_raw}
                for rec in self.records
            ],
        }


def evaluate_triples(triples: Sequence, store: ParameterStore, known, ties: str = "pessimistic",
                     side: str = "tail", threads: int = 1,
                     cache: ScoreCache | None = None) -> EvalReport:
    """Filtered ranks of every triple in ``triples``.

    ``known`` is the set of all positive ``(h, r, t)`` keys used for
    filtering. Both tie policies are computed; ``ties`` picks the headline.
    """
    if ties not in TIE_POLICIES:
        raise ValueError(f"ties must be one of {TIE_POLICIES}, got {ties!r}")
    if side not in ("tail", "head"):
        raise ValueError("side must be 'tail' or 'head'")
    if not triples:
        raise DataError("nothing to evaluate: split is empty")
    cache = cache or ScoreCache(store)
    tails, heads = _index_known(known)

    def one(triple):
        h, r, t = triple[:3]
        if side == "tail":
            scores, target, others = cache.tail_scores(h, r), t, tails.get((h, r), ())
        else:
            scores, target, others = cache.head_scores(r, t), h, heads.get((r, t), ())
        return RankRecord(
            h, r, t,
            rank_pessimistic=filtered_rank(scores, target, others, "pessimistic"),
            rank_optimistic=filtered_rank(scores, target, others, "optimistic"),
            rank_raw=filtered_rank(scores, target, (), "pessimistic"),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, triples))
    else:
        records = [one(tr) for tr in triples]
    pess = metrics([rec.rank_pessimistic for rec in records])
    opt = metrics([rec.rank_optimistic for rec in records])
    return EvalReport(opt if ties == "optimistic" else pess, opt, pess, records, ties, side)


def evaluate(split: str, checkpoint_path, data_dir, ties: str = "pessimistic",
             side: str = "tail", threads: int = 1):
    """Evaluate a checkpoint on ``split`` with train + valid + test as the filter set.

    Returns ``(report, checkpoint)``.
    """
    if split not in ("valid", "test", "train"):
        raise ValueError(f"unknown split {split!r}")
    ckpt = load_checkpoint(checkpoint_path)
    dataset = load_dataset(data_dir, vocab=ckpt.vocab, require=("train", split))
    report = evaluate_triples(dataset.splits[split], ckpt.store, dataset.known(),
                              ties=ties, side=side, threads=threads)
    return report, ckpt


def write_report(path, report: EvalReport, vocab=None, config=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.as_dict(vocab, config), indent=2) + "\n", encoding="utf-8")
    return path
