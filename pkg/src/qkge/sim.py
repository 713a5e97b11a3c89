"""Dense statevector simulator for the gate set {H, Rot, CNOT}.

Every gate may carry a :class:`Condition` on a set of address qubits, in which
case it acts only on the basis states whose address bits match and leaves the
remaining amplitudes untouched.

Conventions:
    * qubit 0 is the most significant bit of the basis index;
    * ``Rot(phi, theta, omega) = RZ(omega) @ RY(theta) @ RZ(phi)`` with
      ``RZ(l) = diag(exp(-il/2), exp(il/2))``.

Gradients of diagonal observables (basis-state probabilities and weighted sums
of them) are computed exactly with a reverse sweep over the circuit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Hashable, Mapping, Optional, Sequence

import numpy as np

from .errors import CircuitError, ParameterError, SizeError

MAX_QUBITS = 24
GATE_KINDS = ("H", "Rot", "CNOT")

_SQRT1_2 = 1.0 / math.sqrt(2.0)
_H = ((_SQRT1_2, _SQRT1_2), (_SQRT1_2, -_SQRT1_2))


class Statevector:
    """Amplitudes of an n-qubit pure state, stored as a flat complex array."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes):
        amps = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        dim = amps.shape[0]
        if dim < 2 or dim & (dim - 1):
            raise SizeError(f"statevector length must be a power of two >= 2, got {dim}")
        self.amplitudes = amps

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    def copy(self) -> "Statevector":
        return Statevector(self.amplitudes.copy())

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __len__(self):
        return self.amplitudes.shape[0]

    def __repr__(self):
        return f"Statevector(n_qubits={self.n_qubits})"


def zero_state(n_qubits: int) -> Statevector:
    """Return |0...0> on ``n_qubits`` qubits."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits!r}")
    amps = np.zeros(1 << int(n_qubits), dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(amps)


# --------------------------------------------------------------------------
# Gates and circuits
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    """Require ``qubits[j]`` to read ``bits[j]`` for a gate to act."""

    qubits: tuple
    bits: tuple

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if len(self.qubits) != len(self.bits):
            raise CircuitError("condition qubits and bits differ in length")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError("condition lists a qubit twice")
        if any(b not in (0, 1) for b in self.bits):
            raise CircuitError("condition bits must be 0 or 1")

    @classmethod
    def on_value(cls, qubits: Sequence[int], value: int) -> "Condition":
        """Condition on the register ``qubits`` (first = most significant) holding ``value``."""
        width = len(qubits)
        if not 0 <= value < (1 << width):
            raise CircuitError(f"value {value} does not fit in {width} address qubits")
        bits = tuple((value >> (width - 1 - j)) & 1 for j in range(width))
        return cls(tuple(qubits), bits)


@dataclass(frozen=True)
class Slot:
    """Binds one rotation angle to ``sign * params[owner][index]``."""

    owner: Hashable
    index: int
    sign: int = 1


@dataclass(frozen=True)
class GateOp:
    kind: str
    wires: tuple
    angles: Optional[tuple] = None
    slots: Optional[tuple] = None
    condition: Optional[Condition] = None

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        n_wires = 2 if self.kind == "CNOT" else 1
        if len(self.wires) != n_wires:
            raise CircuitError(f"{self.kind} takes {n_wires} wire(s), got {self.wires}")
        if len(set(self.wires)) != len(self.wires):
            raise CircuitError(f"{self.kind} control and target coincide: {self.wires}")
        if self.kind == "Rot":
            if (self.angles is None) == (self.slots is None):
                raise CircuitError("Rot needs either three literal angles or three slots")
            if self.angles is not None:
                object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
                if len(self.angles) != 3:
                    raise CircuitError("Rot needs exactly three angles")
            else:
                object.__setattr__(self, "slots", tuple(self.slots))
                if len(self.slots) != 3:
                    raise CircuitError("Rot needs exactly three slots")
        elif self.angles is not None or self.slots is not None:
            raise CircuitError(f"{self.kind} takes no angles")
        if self.condition is not None and set(self.condition.qubits) & set(self.wires):
            raise CircuitError(
                f"condition qubits {self.condition.qubits} overlap gate wires {self.wires}"
            )

    @property
    def is_parametrized(self) -> bool:
        return self.slots is not None


def hadamard(target: int, condition: Condition | None = None) -> GateOp:
    return GateOp("H", (target,), condition=condition)


def rot(target: int, phi: float, theta: float, omega: float,
        condition: Condition | None = None) -> GateOp:
    return GateOp("Rot", (target,), angles=(phi, theta, omega), condition=condition)


def rot_param(target: int, owner: Hashable, start: int,
              condition: Condition | None = None) -> GateOp:
    """Rot whose (phi, theta, omega) read ``params[owner][start:start + 3]``."""
    slots = tuple(Slot(owner, start + k) for k in range(3))
    return GateOp("Rot", (target,), slots=slots, condition=condition)


def cnot(control: int, target: int, condition: Condition | None = None) -> GateOp:
    return GateOp("CNOT", (control, target), condition=condition)


def inverse_gate(gate: GateOp) -> GateOp:
    if gate.kind != "Rot":
        return gate
    if gate.angles is not None:
        phi, theta, omega = gate.angles
        return GateOp("Rot", gate.wires, angles=(-omega, -theta, -phi), condition=gate.condition)
    slots = tuple(Slot(s.owner, s.index, -s.sign) for s in reversed(gate.slots))
    return GateOp("Rot", gate.wires, slots=slots, condition=gate.condition)


@dataclass(frozen=True)
class CircuitSpec:
    """An immutable, ordered gate list on ``n_qubits`` qubits."""

    n_qubits: int
    gates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        for pos, g in enumerate(self.gates):
            used = g.wires + (g.condition.qubits if g.condition else ())
            if any(not 0 <= q < self.n_qubits for q in used):
                raise CircuitError(f"gate {pos} ({g.kind}) uses a qubit outside 0..{self.n_qubits - 1}")

    def __add__(self, other: "CircuitSpec") -> "CircuitSpec":
        if other.n_qubits != self.n_qubits:
            raise CircuitError("cannot concatenate circuits of different width")
        return CircuitSpec(self.n_qubits, self.gates + other.gates)

    def __len__(self):
        return len(self.gates)

    @property
    def param_slots(self) -> dict:
        """Map gate position -> the three slots feeding that rotation."""
        return {pos: g.slots for pos, g in enumerate(self.gates) if g.slots is not None}

    @property
    def owners(self) -> list:
        seen = {}
        for g in self.gates:
            if g.slots is not None:
                for s in g.slots:
                    seen.setdefault(s.owner, None)
        return list(seen)

    @cached_property
    def _plan(self) -> tuple:
        return tuple(_gate_indices(self.n_qubits, g.kind, g.wires, g.condition) for g in self.gates)


def inverse(circuit: CircuitSpec) -> CircuitSpec:
    """Gates reversed and individually inverted; conditions are preserved."""
    return CircuitSpec(circuit.n_qubits, tuple(inverse_gate(g) for g in reversed(circuit.gates)))


# --------------------------------------------------------------------------
# Kernels
# --------------------------------------------------------------------------

# States are manipulated as tensors of shape (2,) * n + (1,); the trailing axis
# keeps every basic index a view, even when all qubits are fixed.


@lru_cache(maxsize=None)
def _gate_indices(n, kind, wires, condition):
    fixed = {}
    if condition is not None:
        fixed.update(zip(condition.qubits, condition.bits))
    if kind == "CNOT":
        fixed[wires[0]] = 1
    target = wires[-1]

    def index(bit):
        idx = [slice(None)] * (n + 1)
        for q, b in fixed.items():
            idx[q] = b
        idx[target] = bit
        return tuple(idx)

    return index(0), index(1)


def _as_tensor(amps: np.ndarray, n: int) -> np.ndarray:
    return amps.reshape((2,) * n + (1,))


def _apply_2x2(psi, i0, i1, m):
    a0 = psi[i0]
    a1 = psi[i1]
    b0 = m[0][0] * a0 + m[0][1] * a1
    a1 *= m[1][1]
    a1 += m[1][0] * a0
    a0[...] = b0


def _swap(psi, i0, i1):
    tmp = psi[i0].copy()
    psi[i0] = psi[i1]
    psi[i1] = tmp


def rot_matrix(phi: float, theta: float, omega: float) -> tuple:
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    a = complex(math.cos((phi + omega) / 2), -math.sin((phi + omega) / 2))
    b = complex(math.cos((phi - omega) / 2), math.sin((phi - omega) / 2))
    return ((a * c, -b * s), (b.conjugate() * s, a.conjugate() * c))


def rot_derivatives(phi: float, theta: float, omega: float) -> tuple:
    """Partial derivatives of :func:`rot_matrix` w.r.t. phi, theta and omega."""
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    a = complex(math.cos((phi + omega) / 2), -math.sin((phi + omega) / 2))
    b = complex(math.cos((phi - omega) / 2), math.sin((phi - omega) / 2))
    ac, bc = a.conjugate(), b.conjugate()
    h = 0.5j
    d_phi = ((-h * a * c, -h * b * s), (-h * bc * s, h * ac * c))
    d_theta = ((-0.5 * a * s, -0.5 * b * c), (0.5 * bc * c, -0.5 * ac * s))
    d_omega = ((-h * a * c, h * b * s), (h * bc * s, h * ac * c))
    return d_phi, d_theta, d_omega


def _dagger(m):
    return ((m[0][0].conjugate(), m[1][0].conjugate()), (m[0][1].conjugate(), m[1][1].conjugate()))


def _resolve(gate: GateOp, angles) -> tuple:
    if gate.angles is not None:
        return gate.angles
    out = []
    for s in gate.slots:
        try:
            vec = angles[s.owner]
        except (KeyError, TypeError):
            raise ParameterError(f"no angles supplied for owner {s.owner!r}") from None
        try:
            out.append(s.sign * float(vec[s.index]))
        except IndexError:
            raise ParameterError(f"owner {s.owner!r} has no angle at index {s.index}") from None
    return tuple(out)


def _apply(psi, gate, idx, angles, adjoint=False):
    i0, i1 = idx
    if gate.kind == "CNOT":
        _swap(psi, i0, i1)
    elif gate.kind == "H":
        _apply_2x2(psi, i0, i1, _H)
    else:
        m = rot_matrix(*_resolve(gate, angles))
        _apply_2x2(psi, i0, i1, _dagger(m) if adjoint else m)


def _check_width(state: Statevector, circuit: CircuitSpec):
    if state.n_qubits != circuit.n_qubits:
        raise CircuitError(
            f"circuit acts on {circuit.n_qubits} qubits but state has {state.n_qubits}"
        )


def apply_gate(state: Statevector, gate: GateOp, angles: Mapping | None = None) -> Statevector:
    """Return a new state with ``gate`` applied."""
    n = state.n_qubits
    used = gate.wires + (gate.condition.qubits if gate.condition else ())
    if any(not 0 <= q < n for q in used):
        raise CircuitError(f"{gate.kind} uses a qubit outside 0..{n - 1}")
    out = state.amplitudes.copy()
    _apply(_as_tensor(out, n), gate, _gate_indices(n, gate.kind, gate.wires, gate.condition), angles)
    return Statevector(out)


def run_circuit(state: Statevector, circuit: CircuitSpec, angles: Mapping | None = None) -> Statevector:
    """Apply every gate of ``circuit`` in order to a copy of ``state``.

    ``angles`` maps each parameter owner to a flat sequence of angles; it is
    only consulted for parametrized rotations.
    """
    _check_width(state, circuit)
    out = state.amplitudes.copy()
    psi = _as_tensor(out, circuit.n_qubits)
    for gate, idx in zip(circuit.gates, circuit._plan):
        _apply(psi, gate, idx, angles)
    return Statevector(out)


def circuit_unitary(circuit: CircuitSpec, angles: Mapping | None = None) -> np.ndarray:
    """Dense unitary of ``circuit``, built column by column from basis states."""
    dim = 1 << circuit.n_qubits
    cols = np.eye(dim, dtype=np.complex128)
    for k in range(dim):
        cols[:, k] = run_circuit(Statevector(cols[:, k]), circuit, angles).amplitudes
    return cols


def _pattern_index(pattern: Sequence, n: int) -> tuple:
    if len(pattern) != n:
        raise SizeError(f"pattern has {len(pattern)} entries for {n} qubits")
    idx = []
    for p in pattern:
        if p is None:
            idx.append(slice(None))
        elif p in (0, 1):
            idx.append(int(p))
        else:
            raise SizeError(f"pattern entries must be 0, 1 or None, got {p!r}")
    return tuple(idx) + (slice(None),)


def basis_probability(state: Statevector, pattern: Sequence) -> float:
    """Total probability of the basis states matching ``pattern``.

    ``pattern`` holds one entry per qubit: 0, 1, or None for "any".
    """
    n = state.n_qubits
    sel = _as_tensor(state.amplitudes, n)[_pattern_index(pattern, n)]
    return float(np.sum(sel.real ** 2 + sel.imag ** 2))


def pattern_mask(pattern: Sequence, n_qubits: int) -> np.ndarray:
    """0/1 weight vector selecting the basis states that match ``pattern``."""
    mask = np.zeros(1 << n_qubits)
    _as_tensor(mask, n_qubits)[_pattern_index(pattern, n_qubits)] = 1.0
    return mask


def overlap(a: Statevector, b: Statevector) -> complex:
    """Inner product <a|b>."""
    if a.n_qubits != b.n_qubits:
        raise SizeError(f"cannot overlap {a.n_qubits}-qubit and {b.n_qubits}-qubit states")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def sample_counts(state: Statevector, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial measurement counts over the computational basis."""
    p = state.probabilities()
    return rng.multinomial(shots, p / p.sum())


# --------------------------------------------------------------------------
# Gradients
# --------------------------------------------------------------------------


def _zero_grads(circuit: CircuitSpec, angles: Mapping) -> dict:
    grads = {}
    for owner in circuit.owners:
        if owner not in angles:
            raise ParameterError(f"no angles supplied for owner {owner!r}")
        grads[owner] = np.zeros(len(angles[owner]))
    return grads


def adjoint_gradient(circuit: CircuitSpec, angles: Mapping, weights: np.ndarray,
                     initial_state: Statevector | None = None,
                     final_state: Statevector | None = None):
    """Value and exact gradient of ``sum_k weights[k] * |psi_k|^2``.

    ``psi`` is the output of ``circuit`` on ``initial_state`` (default
    |0...0>). Pass ``final_state`` to reuse an output that was already
    computed. Returns ``(value, grads)`` where ``grads`` maps every owner in
    ``circuit`` to a gradient array shaped like ``angles[owner]``; an owner
    used by several gates accumulates all contributions.
    """
    n = circuit.n_qubits
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (1 << n,):
        raise SizeError(f"weights must have length {1 << n}")
    if final_state is None:
        start = initial_state if initial_state is not None else zero_state(n)
        final_state = run_circuit(start, circuit, angles)
    _check_width(final_state, circuit)
    grads = _zero_grads(circuit, angles)

    psi_flat = final_state.amplitudes.copy()
    lam_flat = weights * psi_flat
    value = float(np.vdot(psi_flat, lam_flat).real)
    psi = _as_tensor(psi_flat, n)
    lam = _as_tensor(lam_flat, n)

    for gate, idx in zip(reversed(circuit.gates), reversed(circuit._plan)):
        if gate.kind != "Rot":
            _apply(psi, gate, idx, angles)
            _apply(lam, gate, idx, angles)
            continue
        resolved = _resolve(gate, angles)
        m_dag = _dagger(rot_matrix(*resolved))
        i0, i1 = idx
        _apply_2x2(psi, i0, i1, m_dag)
        if gate.slots is not None:
            # psi is now the gate input, lam the adjoint at the gate output
            l0, l1, p0, p1 = lam[i0], lam[i1], psi[i0], psi[i1]
            ov = ((np.vdot(l0, p0), np.vdot(l0, p1)), (np.vdot(l1, p0), np.vdot(l1, p1)))
            for slot, d in zip(gate.slots, rot_derivatives(*resolved)):
                g = (d[0][0] * ov[0][0] + d[0][1] * ov[0][1]
                     + d[1][0] * ov[1][0] + d[1][1] * ov[1][1])
                grads[slot.owner][slot.index] += slot.sign * 2.0 * g.real
        _apply_2x2(lam, i0, i1, m_dag)
    return value, grads


def gradient_exact(circuit: CircuitSpec, angles: Mapping, pattern: Sequence,
                   initial_state: Statevector | None = None) -> dict:
    """Exact gradient of ``basis_probability(run_circuit(...), pattern)``."""
    weights = pattern_mask(pattern, circuit.n_qubits)
    return adjoint_gradient(circuit, angles, weights, initial_state=initial_state)[1]


def _expectation(circuit, angles, weights, initial_state):
    start = initial_state if initial_state is not None else zero_state(circuit.n_qubits)
    return float(np.dot(weights, run_circuit(start, circuit, angles).probabilities()))


def parameter_shift_gradient(circuit: CircuitSpec, angles: Mapping, weights: np.ndarray,
                             initial_state: Statevector | None = None) -> dict:
    """Two-term parameter-shift gradient, summed over every occurrence of a parameter.

    Only valid for circuits without conditioned gates.
    """
    if any(g.condition is not None for g in circuit.gates):
        raise CircuitError("parameter shift is only supported for unconditioned circuits")
    weights = np.asarray(weights, dtype=float)
    grads = _zero_grads(circuit, angles)
    gates = list(circuit.gates)
    for pos, gate in enumerate(circuit.gates):
        if gate.slots is None:
            continue
        base = _resolve(gate, angles)
        for k, slot in enumerate(gate.slots):
            evals = []
            for shift in (math.pi / 2, -math.pi / 2):
                shifted = list(base)
                shifted[k] += shift
                gates[pos] = GateOp("Rot", gate.wires, angles=tuple(shifted))
                evals.append(_expectation(CircuitSpec(circuit.n_qubits, gates), angles,
                                          weights, initial_state))
            gates[pos] = gate
            grads[slot.owner][slot.index] += slot.sign * 0.5 * (evals[0] - evals[1])
    return grads


def finite_difference_gradient(circuit: CircuitSpec, angles: Mapping, weights: np.ndarray,
                               step: float = 1e-5,
                               initial_state: Statevector | None = None) -> dict:
    """Central finite differences; a debugging aid, not a production path."""
    weights = np.asarray(weights, dtype=float)
    grads = _zero_grads(circuit, angles)
    work = {o: np.array(angles[o], dtype=float) for o in grads}
    merged = dict(angles)
    merged.update(work)
    for owner, vec in work.items():
        for i in range(vec.shape[0]):
            orig = vec[i]
            vec[i] = orig + step
            up = _expectation(circuit, merged, weights, initial_state)
            vec[i] = orig - step
            down = _expectation(circuit, merged, weights, initial_state)
            vec[i] = orig
            grads[owner][i] = (up - down) / (2 * step)
    return grads

