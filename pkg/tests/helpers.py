import numpy as np

from qkge.sim import CircuitSpec, Condition, GateOp, Slot


def random_circuit(rng, n_qubits, n_angles, n_gates=None, conditioned=True, owner="x",
                   share=False):
    """Random H/Rot/CNOT circuit whose rotations read ``angles[owner]``.

    Rotations consume angles three at a time; with ``share`` some slots point
    at already used indices so a parameter feeds several gates. When
    ``conditioned`` is set, gates randomly carry conditions on qubits they do
    not touch.
    """
    n_rot = n_angles // 3
    n_gates = n_gates or 2 * n_rot + 2
    kinds = ["Rot"] * n_rot + list(rng.choice(["H", "CNOT"] if n_qubits > 1 else ["H"],
                                              size=max(0, n_gates - n_rot)))
    rng.shuffle(kinds)
    gates = []
    next_idx = 0
    for kind in kinds:
        if kind == "CNOT":
            wires = tuple(int(w) for w in rng.choice(n_qubits, size=2, replace=False))
        else:
            wires = (int(rng.integers(n_qubits)),)
        cond = None
        free = [q for q in range(n_qubits) if q not in wires]
        if conditioned and free and rng.random() < 0.5:
            k = int(rng.integers(1, min(2, len(free)) + 1))
            qs = tuple(int(q) for q in rng.choice(free, size=k, replace=False))
            cond = Condition(qs, tuple(int(b) for b in rng.integers(0, 2, size=k)))
        if kind == "Rot":
            idx = []
            for _ in range(3):
                if share and next_idx > 0 and rng.random() < 0.3:
                    idx.append(int(rng.integers(next_idx)))
                else:
                    idx.append(next_idx)
                    next_idx += 1
            signs = rng.choice([-1, 1], size=3) if share else [1, 1, 1]
            slots = tuple(Slot(owner, i, int(s)) for i, s in zip(idx, signs))
            gates.append(GateOp("Rot", wires, slots=slots, condition=cond))
        else:
            gates.append(GateOp(kind, wires, condition=cond))
    angles = {owner: rng.uniform(-np.pi, np.pi, size=max(next_idx, 1))}
    return CircuitSpec(n_qubits, gates), angles


def random_state(rng, n_qubits):
    v = rng.normal(size=2 ** n_qubits) + 1j * rng.normal(size=2 ** n_qubits)
    return v / np.linalg.norm(v)


def central_difference(f, x, step=1e-5):
    """Gradient of scalar ``f`` at flat array ``x`` by central differences."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        up, down = x.copy(), x.copy()
        up[i] += step
        down[i] -= step
        g[i] = (f(up) - f(down)) / (2 * step)
    return g


# one line per acceptance criterion, printed in the pytest terminal summary
ACCEPTANCE_LINES = []


def record(number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}"
    if detail:
        line += f"  [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
