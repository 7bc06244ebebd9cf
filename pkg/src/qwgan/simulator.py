"""Dense statevector simulation of small gate circuits.

The state of n qubits is a complex vector of length 2**n indexed so that
qubit 0 is the least-significant bit.  Internally the vector is reshaped
to [2]*n with qubit q living on axis n-1-q, and gates are applied by
tensor contraction on the touched axes.
"""

from __future__ import annotations

import numpy as np

from .circuits import Circuit, GateOp, NativeCircuit, gate_matrix


def zero_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[0] = 1.0
    return psi


def apply_gate(psi: np.ndarray, op: GateOp, theta: np.ndarray | None = None) -> np.ndarray:
    """Apply one gate to a statevector, returning a new vector."""
    n = int(np.log2(psi.size))
    mat = gate_matrix(op, theta)
    tensor = psi.reshape([2] * n)
    axes = [n - 1 - q for q in op.targets]
    if op.n_targets == 1:
        out = np.tensordot(mat, tensor, axes=([1], [axes[0]]))
        out = np.moveaxis(out, 0, axes[0])
    else:
        # local basis index is 2*b(targets[0]) + b(targets[1])
        m = mat.reshape(2, 2, 2, 2)
        out = np.tensordot(m, tensor, axes=([2, 3], [axes[0], axes[1]]))
        out = np.moveaxis(out, (0, 1), (axes[0], axes[1]))
    return np.ascontiguousarray(out).reshape(psi.shape)


def simulate(circuit: Circuit | NativeCircuit, theta: np.ndarray | None = None) -> np.ndarray:
    """Run a circuit from |0...0> and return the final statevector."""
    if circuit.n_params and theta is None:
        raise ValueError("circuit has free parameters; theta is required")
    if theta is not None and circuit.n_params and len(theta) != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} parameters, got {len(theta)}")
    psi = zero_state(circuit.n_qubits)
    for op in circuit.ops:
        psi = apply_gate(psi, op, theta)
    norm = float(np.vdot(psi, psi).real)
    assert abs(norm - 1.0) < 1e-9, f"state norm drifted to {norm}"
    return psi


def born_probabilities(psi: np.ndarray) -> np.ndarray:
    """|amplitude|^2 over basis states, renormalized against rounding."""
    p = np.abs(psi) ** 2
    return p / p.sum()


def index_to_bits(index: int, n_qubits: int) -> str:
    """Basis index -> bitstring with character k holding qubit k (LSB first)."""
    return format(index, f"0{n_qubits}b")[::-1]


def bits_to_index(bits: str) -> int:
    return int(bits[::-1], 2)


def sample_bitstrings(psi: np.ndarray, shots: int, seed: int) -> list[str]:
    """Draw measurement outcomes in the computational basis."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = int(np.log2(psi.size))
    rng = np.random.default_rng(seed)
    p = born_probabilities(psi)
    idx = rng.choice(psi.size, size=shots, p=p)
    return [index_to_bits(int(i), n) for i in idx]


def states_equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-8) -> bool:
    """Equality of statevectors modulo global phase."""
    if a.shape != b.shape:
        return False
    k = int(np.argmax(np.abs(a)))
    if abs(a[k]) < 1e-12 or abs(b[k]) < 1e-12:
        return bool(np.allclose(a, b, atol=atol))
    phase = (b[k] / abs(b[k])) / (a[k] / abs(a[k]))
    return bool(np.allclose(a * phase, b, atol=atol))


def circuit_unitary(circuit: Circuit | NativeCircuit, theta: np.ndarray | None = None) -> np.ndarray:
    """Full 2^n x 2^n unitary (small n only), columns = images of basis states."""
    dim = 2**circuit.n_qubits
    cols = []
    for j in range(dim):
        psi = np.zeros(dim, dtype=complex)
        psi[j] = 1.0
        for op in circuit.ops:
            psi = apply_gate(psi, op, theta)
        cols.append(psi)
    return np.stack(cols, axis=1)
