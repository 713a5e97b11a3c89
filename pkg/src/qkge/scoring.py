"""Triple scores, the batched superposition circuit, and resource accounting.

The score of ``(h, r, t)`` is the fidelity ``|<t| U_r |h>|^2``. As a circuit
it is the probability of reading all zeros after preparing ``h``, applying
the relation layers, and un-preparing ``t``.

In batched mode, B = 2^q triples share one circuit. An address register of q
qubits (placed after the data qubits) is put in uniform superposition, and
each triple's head, relation and inverse-tail layers are conditioned on its
address value. Branch i then carries ``2^(-q/2)`` times the single-triple
final state of triple i, so ``delta_i = 2^q * P(address = i, data = 0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ansatz import AnsatzShape, entangling_layers, entity_prep
from .config import is_power_of_two
from .errors import ConfigError, ParameterError
from .params import ParameterStore, entity_owner, relation_owner
from .sim import (
    CircuitSpec,
    Condition,
    Statevector,
    basis_probability,
    hadamard,
    inverse,
    run_circuit,
    sample_counts,
    zero_state,
)


def _check_ids(store: ParameterStore, h: int, r: int, t: int):
    for kind, i, n in (("entity", h, store.n_entities), ("relation", r, store.n_relations),
                       ("entity", t, store.n_entities)):
        if not 0 <= i < n:
            raise ParameterError(f"no {kind} with id {i}")


def triple_owners(triple) -> list:
    h, r, t = triple[:3]
    owners = [entity_owner(h), relation_owner(r)]
    if t != h:
        owners.append(entity_owner(t))
    return owners


def single_circuit(h: int, r: int, t: int, store: ParameterStore) -> CircuitSpec:
    """prep(h), relation layers, then the inverse of prep(t)."""
    _check_ids(store, h, r, t)
    return (entity_prep(store.entity_shape, owner=entity_owner(h))
            + entangling_layers(store.relation_shape, owner=relation_owner(r))
            + inverse(entity_prep(store.entity_shape, owner=entity_owner(t))))


def score_single(h: int, r: int, t: int, store: ParameterStore) -> float:
    circuit = single_circuit(h, r, t, store)
    angles = store.angle_map(circuit.owners)
    final = run_circuit(zero_state(store.n_qubits), circuit, angles)
    return basis_probability(final, [0] * store.n_qubits)


@dataclass(frozen=True)
class BatchLayout:
    n_data_qubits: int
    batch: tuple

    def __post_init__(self):
        object.__setattr__(self, "batch", tuple(self.batch))
        if not is_power_of_two(len(self.batch)):
            raise ConfigError(f"batch size must be a power of two, got {len(self.batch)}")

    @property
    def size(self) -> int:
        return len(self.batch)

    @property
    def n_address_qubits(self) -> int:
        return self.size.bit_length() - 1

    @property
    def n_qubits(self) -> int:
        return self.n_data_qubits + self.n_address_qubits

    @property
    def address_qubits(self) -> tuple:
        return tuple(range(self.n_data_qubits, self.n_qubits))

    def condition(self, i: int) -> Condition | None:
        if not self.n_address_qubits:
            return None
        return Condition.on_value(self.address_qubits, i)


def build_batched(layout: BatchLayout, store: ParameterStore) -> CircuitSpec:
    n, q = layout.n_data_qubits, layout.n_address_qubits
    if n != store.n_qubits:
        raise ConfigError(f"layout has {n} data qubits but store uses {store.n_qubits}")
    width = n + q
    gates = [hadamard(a) for a in layout.address_qubits]
    gates += [hadamard(d) for d in range(n)]
    for i, triple in enumerate(layout.batch):
        h, r, t = triple[:3]
        _check_ids(store, h, r, t)
        cond = layout.condition(i)
        gates += entangling_layers(store.entity_shape, owner=entity_owner(h),
                                   condition=cond, n_qubits=width).gates
        gates += entangling_layers(store.relation_shape, owner=relation_owner(r),
                                   condition=cond, n_qubits=width).gates
        gates += inverse(entangling_layers(store.entity_shape, owner=entity_owner(t),
                                           condition=cond, n_qubits=width)).gates
    # closing H layer in the order inverse(entity_prep) emits it
    gates += [hadamard(d) for d in reversed(range(n))]
    return CircuitSpec(width, gates)


def extract_scores(state: Statevector, layout: BatchLayout) -> np.ndarray:
    """Per-branch scores: ``2^q`` times P(data = 0, address = i)."""
    if state.n_qubits != layout.n_qubits:
        raise ConfigError("state width does not match the batch layout")
    # data qubits are the high bits, so data = 0 is the first 2^q amplitudes
    amps = state.amplitudes[: layout.size]
    return layout.size * (amps.real ** 2 + amps.imag ** 2)


def branch_probability(state: Statevector, layout: BatchLayout, i: int) -> float:
    """Same quantity as one entry of :func:`extract_scores`, via an explicit pattern."""
    pattern = [0] * layout.n_data_qubits + list(layout.condition(i).bits if layout.n_address_qubits else [])
    return basis_probability(state, pattern)


def score_batch(triples: Sequence, store: ParameterStore) -> np.ndarray:
    """Score ``len(triples)`` (a power of two) triples with one circuit execution."""
    layout = BatchLayout(store.n_qubits, triples)
    circuit = build_batched(layout, store)
    final = run_circuit(zero_state(layout.n_qubits), circuit, store.angle_map(circuit.owners))
    return extract_scores(final, layout)


def sample_scores(state: Statevector, layout: BatchLayout, shots: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Shot-based estimate of :func:`extract_scores` from multinomial draws."""
    counts = sample_counts(state, shots, rng)
    return layout.size * counts[: layout.size] / shots


# --------------------------------------------------------------------------
# Resources
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ResourceEstimate:
    """Cost of scoring one batch of B triples, batched vs one circuit per triple.

    ``parameters_touched`` assumes distinct owners in every branch (an upper
    bound). ``n_elements`` (N), ``n_features`` (M = 2^n) and ``epochs`` (m)
    feed the per-run execution totals.
    """

    batch_size: int
    n_data_qubits: int
    n_address_qubits: int
    qubits_total: int
    gate_count: int
    gate_count_sequential: int
    executions_batched: int
    executions_sequential: int
    parameters_touched: int
    n_features: int
    n_elements: int | None = None
    epochs: int | None = None

    @property
    def executions_per_epoch_batched(self) -> int | None:
        if self.n_elements is None:
            return None
        return math.ceil(self.n_elements / self.batch_size)

    @property
    def executions_per_epoch_sequential(self) -> int | None:
        return self.n_elements

    @property
    def executions_total_batched(self) -> int | None:
        per = self.executions_per_epoch_batched
        return None if per is None or self.epochs is None else per * self.epochs

    @property
    def executions_total_sequential(self) -> int | None:
        return None if self.n_elements is None or self.epochs is None else self.n_elements * self.epochs

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k in ("executions_per_epoch_batched", "executions_per_epoch_sequential",
                  "executions_total_batched", "executions_total_sequential"):
            out[k] = getattr(self, k)
        return out


def _layer_gate_count(n_qubits: int, n_layers: int) -> int:
    per_layer = n_qubits + (n_qubits if n_qubits > 1 else 0)
    return per_layer * n_layers


def resource_estimate(batch_size: int, n_data: int, entity_layers: int, relation_layers: int,
                      n_elements: int | None = None, epochs: int | None = None) -> ResourceEstimate:
    if not is_power_of_two(batch_size):
        raise ConfigError(f"batch size must be a power of two, got {batch_size}")
    q = batch_size.bit_length() - 1
    per_triple = 2 * _layer_gate_count(n_data, entity_layers) + _layer_gate_count(n_data, relation_layers)
    gates = q + 2 * n_data + batch_size * per_triple
    sequential = batch_size * (2 * n_data + per_triple)
    params = batch_size * (2 * 3 * entity_layers * n_data + 3 * relation_layers * n_data)
    return ResourceEstimate(
        batch_size=batch_size, n_data_qubits=n_data, n_address_qubits=q,
        qubits_total=n_data + q, gate_count=gates, gate_count_sequential=sequential,
        executions_batched=1, executions_sequential=batch_size,
        parameters_touched=params, n_features=2 ** n_data,
        n_elements=n_elements, epochs=epochs,
    )
