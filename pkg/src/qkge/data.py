"""Triple files, vocabularies and negative sampling."""
from __future__ import annotations

import difflib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DataError, ParseError, SamplingError, UnknownNameError

SPLITS = ("train", "valid", "test")
NEGATIVE_RETRY_CAP = 100


class LabeledTriple(NamedTuple):
    h: int
    r: int
    t: int
    y: int = 1

    @property
    def key(self) -> tuple:
        return (self.h, self.r, self.t)


class Vocabulary:
    """Bidirectional name <-> dense id maps for entities and relations."""

    def __init__(self, entities: Iterable[str] = (), relations: Iterable[str] = ()):
        self.entities: list[str] = []
        self.relations: list[str] = []
        self._entity_ids: dict[str, int] = {}
        self._relation_ids: dict[str, int] = {}
        for name in entities:
            self.add_entity(name)
        for name in relations:
            self.add_relation(name)

    def add_entity(self, name: str) -> int:
        if name not in self._entity_ids:
            self._entity_ids[name] = len(self.entities)
            self.entities.append(name)
        return self._entity_ids[name]

    def add_relation(self, name: str) -> int:
        if name not in self._relation_ids:
            self._relation_ids[name] = len(self.relations)
            self.relations.append(name)
        return self._relation_ids[name]

    def entity_id(self, name: str) -> int:
        try:
            return self._entity_ids[name]
        except KeyError:
            raise UnknownNameError("entity", name, difflib.get_close_matches(name, self.entities)) from None

    def relation_id(self, name: str) -> int:
        try:
            return self._relation_ids[name]
        except KeyError:
            raise UnknownNameError("relation", name, difflib.get_close_matches(name, self.relations)) from None

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def __eq__(self, other):
        return (isinstance(other, Vocabulary) and self.entities == other.entities
                and self.relations == other.relations)

    def __repr__(self):
        return f"Vocabulary({self.n_entities} entities, {self.n_relations} relations)"


def load_triples(path, vocab: Vocabulary) -> list[LabeledTriple]:
    """Read ``head<TAB>relation<TAB>tail`` lines, extending ``vocab`` with new names."""
    path = Path(path)
    triples = []
    with path.open(encoding="utf-8", newline="") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(path, line_no, f"expected 3 tab-separated fields, got {len(fields)}")
            head, rel, tail = fields
            if not (head and rel and tail):
                raise ParseError(path, line_no, "empty field")
            h = vocab.add_entity(head)
            r = vocab.add_relation(rel)
            t = vocab.add_entity(tail)
            triples.append(LabeledTriple(h, r, t, 1))
    return triples


@dataclass
class Dataset:
    vocab: Vocabulary
    splits: dict = field(default_factory=dict)

    @property
    def train(self) -> list:
        return self.splits.get("train", [])

    @property
    def valid(self) -> list:
        return self.splits.get("valid", [])

    @property
    def test(self) -> list:
        return self.splits.get("test", [])

    def known(self) -> set:
        """All positive (h, r, t) keys across every loaded split."""
        return {tr.key for triples in self.splits.values() for tr in triples}


def load_dataset(data_dir, vocab: Vocabulary | None = None, require=("train",)) -> Dataset:
    """Load ``train.txt``, ``valid.txt`` and ``test.txt`` in that order.

    Splits named in ``require`` must exist; others are skipped when missing.
    With a fixed ``vocab`` (e.g. from a checkpoint), unknown names raise.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"data directory not found: {data_dir}")
    frozen = vocab is not None
    vocab = vocab if frozen else Vocabulary()
    splits = {}
    for split in SPLITS:
        path = data_dir / f"{split}.txt"
        if not path.exists():
            if split in require:
                raise DataError(f"missing split file: {path}")
            continue
        if frozen:
            splits[split] = _load_frozen(path, vocab)
        else:
            splits[split] = load_triples(path, vocab)
    return Dataset(vocab, splits)


def _load_frozen(path, vocab):
    scratch = Vocabulary(vocab.entities, vocab.relations)
    triples = load_triples(path, scratch)
    if scratch.n_entities != vocab.n_entities:
        raise UnknownNameError("entity", scratch.entities[vocab.n_entities])
    if scratch.n_relations != vocab.n_relations:
        raise UnknownNameError("relation", scratch.relations[vocab.n_relations])
    return triples


def sample_negatives(positive: LabeledTriple, vocab: Vocabulary, k: int,
                     rng: np.random.Generator, known: set,
                     corrupt: str = "tail") -> list[LabeledTriple]:
    """Draw ``k`` corruptions of ``positive`` labelled 0.

    The corrupted entity is uniform over all entities except the original;
    draws that land on a known positive are rejected, up to
    ``NEGATIVE_RETRY_CAP`` times, after which the last draw is kept.
    """
    if k < 1:
        raise SamplingError(f"k must be >= 1, got {k}")
    n = vocab.n_entities
    if n < 2:
        raise SamplingError("negative sampling needs at least two entities")
    if corrupt not in ("tail", "head"):
        raise SamplingError(f"corrupt must be 'tail' or 'head', got {corrupt!r}")
    h, r, t = positive.h, positive.r, positive.t
    original = t if corrupt == "tail" else h
    out = []
    for _ in range(k):
        for _ in range(NEGATIVE_RETRY_CAP):
            e = int(rng.integers(n - 1))
            if e >= original:
                e += 1
            cand = (h, r, e) if corrupt == "tail" else (e, r, t)
            if cand not in known:
                break
        out.append(LabeledTriple(*cand, 0))
    return out
