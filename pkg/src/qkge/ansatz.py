"""Strongly entangling layered circuits for entity and relation embeddings."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

from .errors import CircuitError
from .sim import CircuitSpec, Condition, GateOp, cnot, hadamard, inverse, rot, rot_param

__all__ = ["AnsatzShape", "entangling_layers", "entity_prep", "inverse", "ring_range"]


@dataclass(frozen=True)
class AnsatzShape:
    n_qubits: int
    n_layers: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise CircuitError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if self.n_layers < 0:
            raise CircuitError(f"n_layers must be >= 0, got {self.n_layers}")

    @property
    def param_count(self) -> int:
        return 3 * self.n_layers * self.n_qubits


def ring_range(layer: int, n_qubits: int) -> int:
    """Control/target distance of the CNOT ring in ``layer``."""
    return (layer % (n_qubits - 1)) + 1


def _layer_gates(shape, angles, owner, condition):
    n = shape.n_qubits
    gates = []
    for layer in range(shape.n_layers):
        for q in range(n):
            start = 3 * (layer * n + q)
            if owner is not None:
                gates.append(rot_param(q, owner, start, condition))
            else:
                phi, theta, omega = angles[start:start + 3]
                gates.append(rot(q, phi, theta, omega, condition))
        if n > 1:
            r = ring_range(layer, n)
            for q in range(n):
                gates.append(cnot(q, (q + r) % n, condition))
    return gates


def _check(shape, angles, owner):
    if (angles is None) == (owner is None):
        raise CircuitError("pass exactly one of literal angles or a parameter owner")
    if angles is not None and len(angles) != shape.param_count:
        raise CircuitError(f"expected {shape.param_count} angles for {shape}, got {len(angles)}")


def entangling_layers(shape: AnsatzShape, angles: Sequence[float] | None = None, *,
                      owner: Hashable | None = None,
                      condition: Condition | None = None,
                      n_qubits: int | None = None) -> CircuitSpec:
    """Layers of per-qubit Rot gates, each followed by a ring of CNOTs.

    Angles are consumed in ``[layer][qubit][phi, theta, omega]`` order, either
    as literal values or, when ``owner`` is given, as slots into that owner's
    flat parameter vector. ``n_qubits`` widens the circuit (extra qubits such
    as an address register sit after the ansatz qubits); every gate carries
    ``condition``.
    """
    _check(shape, angles, owner)
    width = shape.n_qubits if n_qubits is None else n_qubits
    return CircuitSpec(width, _layer_gates(shape, angles, owner, condition))


def entity_prep(shape: AnsatzShape, angles: Sequence[float] | None = None, *,
                owner: Hashable | None = None,
                condition: Condition | None = None,
                n_qubits: int | None = None) -> CircuitSpec:
    """Hadamard on every qubit followed by :func:`entangling_layers`.

    The Hadamard layer is never conditioned.
    """
    _check(shape, angles, owner)
    width = shape.n_qubits if n_qubits is None else n_qubits
    gates: list[GateOp] = [hadamard(q) for q in range(shape.n_qubits)]
    gates += _layer_gates(shape, angles, owner, condition)
    return CircuitSpec(width, gates)
