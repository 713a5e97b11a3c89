"""Entity/relation angle storage, lazy Adam and JSON checkpoints."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .ansatz import AnsatzShape
from .data import Vocabulary
from .errors import CheckpointFormatError, TrainingError

FORMAT_VERSION = 1
TAU = 2 * math.pi


class Owner(NamedTuple):
    """Key of one parameter tensor: ``kind`` is "entity" or "relation"."""

    kind: str
    index: int


def entity_owner(i: int) -> Owner:
    return Owner("entity", int(i))


def relation_owner(i: int) -> Owner:
    return Owner("relation", int(i))


@dataclass
class ParameterStore:
    """Angles shaped ``[owner][layer][qubit][phi, theta, omega]`` plus Adam state.

    Adam moments share the angle shapes. Step counters are kept per owner:
    every parameter of an owner is touched together.
    """

    n_qubits: int
    entity: np.ndarray
    relation: np.ndarray
    entity_m: np.ndarray = None
    entity_v: np.ndarray = None
    relation_m: np.ndarray = None
    relation_v: np.ndarray = None
    entity_steps: np.ndarray = None
    relation_steps: np.ndarray = None

    def __post_init__(self):
        self.entity = np.ascontiguousarray(self.entity, dtype=float)
        self.relation = np.ascontiguousarray(self.relation, dtype=float)
        for name, like in (("entity_m", self.entity), ("entity_v", self.entity),
                           ("relation_m", self.relation), ("relation_v", self.relation)):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros_like(like))
        if self.entity_steps is None:
            self.entity_steps = np.zeros(self.entity.shape[0], dtype=np.int64)
        if self.relation_steps is None:
            self.relation_steps = np.zeros(self.relation.shape[0], dtype=np.int64)

    @property
    def n_entities(self) -> int:
        return self.entity.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relation.shape[0]

    @property
    def entity_shape(self) -> AnsatzShape:
        return AnsatzShape(self.n_qubits, self.entity.shape[1])

    @property
    def relation_shape(self) -> AnsatzShape:
        return AnsatzShape(self.n_qubits, self.relation.shape[1])

    def _tensor(self, owner, suffix=""):
        arr = getattr(self, owner.kind + suffix)
        if not 0 <= owner.index < arr.shape[0]:
            raise KeyError(f"no {owner.kind} with id {owner.index}")
        return arr[owner.index]

    def flat(self, owner: Owner) -> np.ndarray:
        """Flat view of an owner's angles, in ansatz consumption order."""
        return self._tensor(owner).reshape(-1)

    def angle_map(self, owners) -> dict:
        return {o: self.flat(o) for o in owners}

    def copy(self) -> "ParameterStore":
        return ParameterStore(
            self.n_qubits, self.entity.copy(), self.relation.copy(),
            self.entity_m.copy(), self.entity_v.copy(),
            self.relation_m.copy(), self.relation_v.copy(),
            self.entity_steps.copy(), self.relation_steps.copy(),
        )

    @property
    def n_angles(self) -> int:
        return self.entity.size + self.relation.size


def init_params(n_entities: int, n_relations: int, n_qubits: int, entity_layers: int,
                relation_layers: int, seed) -> ParameterStore:
    """Every angle uniform in [0, 2*pi); entities drawn first, then relations."""
    rng = np.random.default_rng(seed)
    ent = np.mod(rng.random((n_entities, entity_layers, n_qubits, 3)) * TAU, TAU)
    rel = np.mod(rng.random((n_relations, relation_layers, n_qubits, 3)) * TAU, TAU)
    return ParameterStore(n_qubits, ent, rel)


def adam_step(store: ParameterStore, grads: dict, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> ParameterStore:
    """Lazy Adam: only owners present in ``grads`` update moments and step counts."""
    for owner in sorted(grads):
        g = np.asarray(grads[owner], dtype=float)
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {owner.kind} {owner.index}")
        theta = store._tensor(owner).reshape(-1)
        m = store._tensor(owner, "_m").reshape(-1)
        v = store._tensor(owner, "_v").reshape(-1)
        steps = getattr(store, owner.kind + "_steps")
        steps[owner.index] += 1
        t = int(steps[owner.index])
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        theta -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return store


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------


@dataclass
class Checkpoint:
    store: ParameterStore
    vocab: Vocabulary
    config: dict = field(default_factory=dict)
    epoch: int = 0
    rng_state: dict | None = None


def checkpoint_to_dict(ckpt: Checkpoint, include_optimizer: bool = True) -> dict:
    s = ckpt.store
    doc = {
        "format_version": FORMAT_VERSION,
        "config": ckpt.config,
        "epoch": ckpt.epoch,
        "n_qubits": s.n_qubits,
        "entity_layers": int(s.entity.shape[1]),
        "relation_layers": int(s.relation.shape[1]),
        "vocabulary": {"entities": list(ckpt.vocab.entities),
                       "relations": list(ckpt.vocab.relations)},
        "entity_angles": s.entity.tolist(),
        "relation_angles": s.relation.tolist(),
        "rng_state": ckpt.rng_state,
    }
    if include_optimizer:
        doc["optimizer"] = {
            "entity_m": s.entity_m.tolist(), "entity_v": s.entity_v.tolist(),
            "relation_m": s.relation_m.tolist(), "relation_v": s.relation_v.tolist(),
            "entity_steps": s.entity_steps.tolist(), "relation_steps": s.relation_steps.tolist(),
        }
    return doc


def save_checkpoint(path, ckpt: Checkpoint, include_optimizer: bool = True) -> Path:
    """Write ``ckpt`` as JSON, atomically replacing any existing file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        json.dump(checkpoint_to_dict(ckpt, include_optimizer), fh)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def _array(doc, key, shape):
    arr = np.array(doc[key], dtype=float)
    if arr.shape != shape:
        raise CheckpointFormatError(f"{key} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise CheckpointFormatError(f"{key} contains non-finite values")
    return arr


def checkpoint_from_dict(doc: dict) -> Checkpoint:
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CheckpointFormatError("not a checkpoint: missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise CheckpointFormatError(
            f"unsupported checkpoint format_version {doc['format_version']!r} (expected {FORMAT_VERSION})"
        )
    try:
        vocab = Vocabulary(doc["vocabulary"]["entities"], doc["vocabulary"]["relations"])
        n, le, lr = int(doc["n_qubits"]), int(doc["entity_layers"]), int(doc["relation_layers"])
        ent = _array(doc, "entity_angles", (vocab.n_entities, le, n, 3))
        rel = _array(doc, "relation_angles", (vocab.n_relations, lr, n, 3))
        store = ParameterStore(n, ent, rel)
        opt = doc.get("optimizer")
        if opt:
            store.entity_m = _array(opt, "entity_m", ent.shape)
            store.entity_v = _array(opt, "entity_v", ent.shape)
            store.relation_m = _array(opt, "relation_m", rel.shape)
            store.relation_v = _array(opt, "relation_v", rel.shape)
            store.entity_steps = np.array(opt["entity_steps"], dtype=np.int64)
            store.relation_steps = np.array(opt["relation_steps"], dtype=np.int64)
        return Checkpoint(store, vocab, doc.get("config", {}), int(doc.get("epoch", 0)),
                          doc.get("rng_state"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointFormatError):
            raise
        raise CheckpointFormatError(f"malformed checkpoint: {exc!r}") from exc


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointFormatError(f"{path}: not a valid JSON checkpoint ({exc})") from exc
    return checkpoint_from_dict(doc)
